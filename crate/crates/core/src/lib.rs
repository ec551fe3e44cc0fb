//! Simulation and verification of discrete-time trawl processes.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod scalar;
pub mod seeds;
pub mod simulate;
pub mod special;
pub mod stats;
pub mod theory;
pub mod trawl;

pub use error::{Result, TrawlError};
pub use experiments::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport};
pub use seeds::{MixingLaw, SeedModel, Volatility};
pub use simulate::{simulate_path, PastMethod, SimOptions, SimPlan, TrawlPath};
pub use theory::{theory_report, AsymptoticConstants, TheoryReport};
pub use trawl::{Regime, TailRule, TrawlSequence};

/// Exact rational scalar for the field-generic constants.
pub type Rational = num_rational::Rational64;

pub type Seed = SeedModel<f64>;
pub type Seed32 = SeedModel<f32>;
pub type Trawl = TrawlSequence<f64>;
pub type Trawl32 = TrawlSequence<f32>;
pub type Report = TheoryReport<f64>;
pub type Report32 = TheoryReport<f32>;
pub type Constants = AsymptoticConstants<f64>;
pub type ExactConstants = AsymptoticConstants<Rational>;
