//! Monte Carlo experiments that check the limit theorems of trawl processes.
//!
//! Each experiment simulates independent replicas on a worker pool, reduces them
//! in replica order and compares the estimates with analytic targets. Every
//! [`Criterion`] carries its estimate, target and acceptance band, so a report's
//! verdict can be re-derived from the report alone.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{build_seed, build_trawl, ModelSpec};
use crate::error::{Result, TrawlError};
use crate::rng::{StreamDomain, StreamKey};
use crate::seeds::SeedModel;
use crate::simulate::{sample_z_with, CirculantSampler, SimOptions, SimPlan};
use crate::stats::{self, SampleSet};
use crate::theory;
use crate::trawl::{Regime, TailRule, TrawlKind, TrawlSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(alias = "covariance-decay")]
    CovarianceDecay,
    #[serde(alias = "variance-scaling")]
    VarianceScaling,
    #[serde(alias = "gaussian-limit")]
    GaussianLimit,
    #[serde(alias = "stable-limit")]
    StableLimit,
    #[serde(alias = "tail-law")]
    TailLaw,
    #[serde(alias = "symmetric-difference")]
    SymmetricDifference,
    #[serde(rename = "ShortMemoryCLT", alias = "short-memory-clt")]
    ShortMemoryClt,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::CovarianceDecay => "CovarianceDecay",
            Self::VarianceScaling => "VarianceScaling",
            Self::GaussianLimit => "GaussianLimit",
            Self::StableLimit => "StableLimit",
            Self::TailLaw => "TailLaw",
            Self::SymmetricDifference => "SymmetricDifference",
            Self::ShortMemoryClt => "ShortMemoryCLT",
        }
    }
}

/// Acceptance thresholds. Unset fields take the per-experiment defaults listed
/// in the README.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Monte Carlo band in standard errors (4; 3 for closed-form survival checks).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_multiplier: Option<f64>,
    /// Share of lags that must agree with the oracle (0.95).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag_fraction: Option<f64>,
    /// Relative band on levels and asymptotic constants.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_rel: Option<f64>,
    /// Absolute band on fitted scaling exponents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_abs: Option<f64>,
    /// Level of the Kolmogorov–Smirnov test (0.01).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_level: Option<f64>,
    /// Model-error term of characteristic-function comparisons (0.03).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub charfn_model: Option<f64>,
    /// Absolute band on the evanescence slope (0.05).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evanescence_slope: Option<f64>,
}

/// Experiment knobs; unset fields take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOptions {
    /// Largest lag compared by the covariance experiment (500).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<usize>,
    /// Lag of the bias-corrected level check (300).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_lag: Option<usize>,
    /// Lag window of the analytic decay check (200..=2000).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory_lags: Option<(u64, u64)>,
    /// Partial-sum lengths (dyadic from 128 for variance scaling; n/16, n/4, n for evanescence).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    /// Time pairs `(s, t)` of the two-time covariance check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_pairs: Option<Vec<(f64, f64)>>,
    /// Arguments of characteristic-function comparisons.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_grid: Option<Vec<f64>>,
    /// Survival-probability window of the tail check ((0.99, 0.999)).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantile_window: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub past_horizon_override: Option<u64>,
    /// Absolute tolerance of analytic series (1e-10).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory_tol: Option<f64>,
    /// Path sampler of the Gaussian-limit experiments (`auto`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian_sampler: Option<GaussianSampler>,
}

/// How the Gaussian-limit experiments draw paths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaussianSampler {
    /// Circulant embedding for Brownian seeds, the source construction otherwise.
    #[default]
    Auto,
    /// Always build paths source by source.
    Construction,
    /// Circulant embedding of the exact autocovariance; Brownian seeds only.
    Circulant,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_replica: Option<PathBuf>,
}

/// Model of the second process in the symmetric-difference experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counterpart {
    pub seed_model: ModelSpec,
    pub trawl: ModelSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed_model: ModelSpec,
    pub trawl: ModelSpec,
    /// Path length (ignored by the tail experiment, which draws `Z` directly).
    pub n: usize,
    /// Independent replicas; for the tail experiment, the number of `Z` draws.
    pub replicas: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub options: ExperimentOptions,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterpart: Option<Counterpart>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, seed_model: ModelSpec, trawl: ModelSpec, n: usize, replicas: usize) -> Self {
        Self {
            experiment,
            seed_model,
            trawl,
            n,
            replicas,
            master_seed: 0,
            tolerances: Tolerances::default(),
            options: ExperimentOptions::default(),
            output: OutputPaths::default(),
            counterpart: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| TrawlError::Config(format!("experiment config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrawlError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(TrawlError::Config("n must be positive".into()));
        }
        if self.replicas < 2 {
            return Err(TrawlError::Config(format!("at least two replicas are needed, got {}", self.replicas)));
        }
        if self.experiment == ExperimentKind::VarianceScaling && self.replicas < 500 {
            return Err(TrawlError::Config(format!(
                "variance scaling needs at least 500 replicas, got {}",
                self.replicas
            )));
        }
        Ok(())
    }
}

/// One pass/fail check: `pass ⇔ lower ≤ estimate ≤ upper`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub estimate: f64,
    pub standard_error: Option<f64>,
    pub target: f64,
    pub lower: f64,
    pub upper: f64,
    /// Slack granted for finite-size (asymptotic) error.
    pub model_tolerance: f64,
    /// Slack granted for Monte Carlo error.
    pub mc_tolerance: f64,
    pub pass: bool,
}

impl Criterion {
    pub fn new(name: impl Into<String>, estimate: f64, se: Option<f64>, target: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            estimate,
            standard_error: se,
            target,
            lower,
            upper,
            model_tolerance: 0.0,
            mc_tolerance: 0.0,
            pass: estimate >= lower && estimate <= upper,
        }
    }

    /// `|estimate − target| ≤ model + mc`.
    pub fn around(name: impl Into<String>, estimate: f64, se: Option<f64>, target: f64, model: f64, mc: f64) -> Self {
        let mut c = Self::new(name, estimate, se, target, target - model - mc, target + model + mc);
        c.model_tolerance = model;
        c.mc_tolerance = mc;
        c
    }

    /// `estimate ≤ model + mc`, for nonnegative distances.
    pub fn at_most(name: impl Into<String>, estimate: f64, se: Option<f64>, model: f64, mc: f64) -> Self {
        let mut c = Self::new(name, estimate, se, 0.0, 0.0, model + mc);
        c.model_tolerance = model;
        c.mc_tolerance = mc;
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RngProvenance {
    pub generator: &'static str,
    pub derivation: &'static str,
    pub master_seed: u64,
    pub replicas: usize,
    pub lanes: Vec<u32>,
}

/// One row of the per-replica CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicaStat {
    pub replica: u64,
    pub n: usize,
    pub statistic: Cow<'static, str>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub regime: Regime,
    pub theory: Map<String, Value>,
    pub criteria: Vec<Criterion>,
    pub all_pass: bool,
    pub details: Map<String, Value>,
    pub warnings: Vec<String>,
    pub rng: RngProvenance,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub per_replica: Vec<ReplicaStat>,
}

impl ExperimentReport {
    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    /// 0 when every criterion passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_pass {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Flat `replica,n,statistic,value` table.
    pub fn per_replica_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.per_replica.len() + 32);
        out.push_str("replica,n,statistic,value\n");
        for r in &self.per_replica {
            let _ = writeln!(out, "{},{},{},{}", r.replica, r.n, r.statistic, r.value);
        }
        out
    }

    /// Writes the JSON report and the per-replica CSV, each atomically.
    pub fn write(&self, report: &Path, per_replica: &Path) -> Result<()> {
        write_atomic(report, self.to_json()?.as_bytes())?;
        write_atomic(per_replica, self.per_replica_csv().as_bytes())
    }
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

enum GaussianPaths {
    Construction(Box<SimPlan>),
    Circulant(CirculantSampler),
}

impl GaussianPaths {
    fn values(&self, replica: u64) -> Vec<f64> {
        match self {
            Self::Construction(p) => p.path(replica, 0).values,
            Self::Circulant(c) => c.path(replica, 0).values,
        }
    }

    fn mean(&self) -> f64 {
        match self {
            Self::Construction(p) => p.theoretical_mean(),
            Self::Circulant(_) => 0.0,
        }
    }
}

/// Runs the configured experiment on a pool of `workers` threads
/// (`None`: one per core). Results do not depend on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| TrawlError::Config(format!("worker pool: {e}")))?;
    pool.install(|| match cfg.experiment {
        ExperimentKind::CovarianceDecay => run_covariance_decay(cfg),
        ExperimentKind::VarianceScaling => run_variance_scaling(cfg),
        ExperimentKind::GaussianLimit => run_gaussian_limit(cfg),
        ExperimentKind::ShortMemoryClt => run_short_memory_clt(cfg),
        ExperimentKind::StableLimit => run_stable_limit(cfg),
        ExperimentKind::TailLaw => run_tail_law(cfg),
        ExperimentKind::SymmetricDifference => run_symmetric_difference(cfg),
    })
}

fn par_map<T: Send>(m: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..m as u64).into_par_iter().map(f).collect()
}

fn mc_se(xs: &[f64]) -> f64 {
    (stats::variance(xs) / xs.len() as f64).sqrt()
}

fn prefix_sums_at(values: &[f64], lengths: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; lengths.len()];
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| lengths[i]);
    let (mut acc, mut done) = (0.0, 0);
    for i in order {
        for v in &values[done..lengths[i]] {
            acc += v;
        }
        done = lengths[i];
        out[i] = acc;
    }
    out
}

fn is_zero_trawl(t: &TrawlSequence) -> bool {
    matches!(t.kind(), TrawlKind::Custom { values, tail: Some(TailRule::Zero) } if values.iter().all(|v| *v == 0.0))
}

fn regime_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(TrawlError::Regime(msg.into()))
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    seed: SeedModel,
    trawl: TrawlSequence,
    regime: Regime,
    sim: SimOptions,
    theory_tol: f64,
    started: Instant,
    lanes: Vec<u32>,
    theory: Map<String, Value>,
    criteria: Vec<Criterion>,
    details: Map<String, Value>,
    warnings: Vec<String>,
    per_replica: Vec<ReplicaStat>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a ExperimentConfig, kind: ExperimentKind) -> Result<Self> {
        let started = Instant::now();
        if cfg.experiment != kind {
            return Err(TrawlError::Config(format!(
                "config describes {}, not {}",
                cfg.experiment.as_str(),
                kind.as_str()
            )));
        }
        cfg.validate()?;
        let seed = build_seed(&cfg.seed_model)?;
        let trawl = build_trawl(&cfg.trawl)?;
        let cond = trawl.condition_report(&seed);
        let sim = SimOptions {
            truncation_tol: cfg.options.truncation_tol.unwrap_or(1e-3),
            past_horizon_override: cfg.options.past_horizon_override,
            master_seed: cfg.master_seed,
            ..SimOptions::default()
        };
        Ok(Self {
            cfg,
            seed,
            trawl,
            regime: cond.regime,
            sim,
            theory_tol: cfg.options.theory_tol.unwrap_or(1e-10),
            started,
            lanes: vec![0],
            theory: Map::new(),
            criteria: Vec::new(),
            details: Map::new(),
            warnings: cond.notes,
            per_replica: Vec::new(),
        })
    }

    fn se_mult(&self, default: f64) -> f64 {
        self.cfg.tolerances.se_multiplier.unwrap_or(default)
    }

    fn plan(&mut self) -> Result<SimPlan> {
        let plan = SimPlan::new(&self.seed, &self.trawl, self.cfg.n, &self.sim)?;
        self.details.insert("past_method".into(), serde_json::to_value(plan.past_method())?);
        self.details.insert("truncated_mean".into(), json!(plan.theoretical_mean()));
        Ok(plan)
    }

    fn gaussian_paths(&mut self) -> Result<GaussianPaths> {
        let choice = self.cfg.options.gaussian_sampler.unwrap_or_default();
        let brownian = matches!(self.seed, SeedModel::Brownian);
        if choice == GaussianSampler::Circulant || (choice == GaussianSampler::Auto && brownian) {
            match CirculantSampler::brownian(&self.seed, &self.trawl, self.cfg.n, &self.sim, self.theory_tol) {
                Ok(c) => {
                    self.details.insert("sampler".into(), json!("circulant"));
                    self.details.insert("past_method".into(), json!({"kind": "circulant"}));
                    return Ok(GaussianPaths::Circulant(c));
                }
                Err(e) if choice == GaussianSampler::Auto => {
                    self.warnings.push(format!("circulant sampling unavailable, using the construction: {e}"));
                }
                Err(e) => return Err(e),
            }
        }
        self.details.insert("sampler".into(), json!("construction"));
        Ok(GaussianPaths::Construction(Box::new(self.plan()?)))
    }

    fn target(&mut self, key: &str, v: impl Into<Value>) {
        self.theory.insert(key.into(), v.into());
    }

    fn push(&mut self, c: Criterion) {
        self.criteria.push(c);
    }

    fn stat(&mut self, replica: u64, n: usize, statistic: impl Into<Cow<'static, str>>, value: f64) {
        self.per_replica.push(ReplicaStat { replica, n, statistic: statistic.into(), value });
    }

    /// `(c0, α)` of the long-memory tail and the constants `c1, c2, H` with the
    /// seed's small-argument slope folded in.
    fn long_memory_constants(&mut self) -> Result<(f64, f64, f64, f64, f64)> {
        let Some((c0, alpha)) = self.trawl.power_tail_params() else {
            return regime_err("long-memory constants need a power-law tail");
        };
        let k = theory::asymptotic_constants(c0, alpha)?;
        let theta = theory::small_argument_slope(&self.seed)?;
        if k.near_boundary {
            self.warnings.push(format!("alpha = {alpha} is close to the boundary of (1, 2)"));
        }
        if theta != 1.0 {
            self.warnings.push(format!("seed variance behaves like {theta}·u near 0; c1 and c2 include this factor"));
        }
        Ok((c0, alpha, theta * k.c1, theta * k.c2, k.h))
    }

    /// Stable-limit parameters `(α, c0 · density of the first jump at 0)`.
    fn stable_params(&mut self) -> Result<(f64, f64)> {
        if !self.seed.is_jump() {
            return regime_err(format!("the stable limit needs a jump seed, got {}", self.seed.tag()));
        }
        let TrawlKind::PowerLaw { c0, alpha } = *self.trawl.kind() else {
            return regime_err(format!("the stable limit needs a power-law trawl, got {}", self.trawl.tag()));
        };
        let f0 = self.seed.first_jump_density_at_zero()?;
        if f0 != 1.0 {
            self.warnings.push(format!("first-jump density at 0 is {f0}; the stable scale is c0·{f0}"));
        }
        Ok((alpha, c0 * f0))
    }

    /// Every replica path must vanish identically.
    fn degenerate(mut self) -> Result<ExperimentReport> {
        let plan = self.plan()?;
        let lanes = self.lanes.clone();
        let worst = par_map(self.cfg.replicas, |r| {
            lanes.iter().flat_map(|&l| plan.path(r, l).values).fold(0.0f64, |m, v| m.max(v.abs()))
        });
        let max_abs = worst.iter().fold(0.0f64, |m, v| m.max(*v));
        self.details.insert("degenerate".into(), json!(true));
        self.push(Criterion::new("degenerate_max_abs", max_abs, None, 0.0, 0.0, 0.0));
        Ok(self.finish())
    }

    fn finish(self) -> ExperimentReport {
        let all_pass = self.criteria.iter().all(|c| c.pass);
        ExperimentReport {
            experiment: self.cfg.experiment,
            config: self.cfg.clone(),
            regime: self.regime,
            theory: self.theory,
            criteria: self.criteria,
            all_pass,
            details: self.details,
            warnings: self.warnings,
            rng: RngProvenance {
                generator: "xoshiro256++",
                derivation: "splitmix64 chain over (master_seed, replica, lane, domain, index)",
                master_seed: self.cfg.master_seed,
                replicas: self.cfg.replicas,
                lanes: self.lanes,
            },
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            per_replica: self.per_replica,
        }
    }
}

/// Sample autocovariances against the analytic sequence in the long-memory regime.
///
/// The comparison target is `E γ̂(k)`, which accounts exactly for the bias the
/// sample-mean correction introduces; without it the target would be off by
/// roughly `Var(x̄) ≍ n^{1−α}`, far more than the Monte Carlo error.
pub fn run_covariance_decay(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut ctx = Ctx::new(cfg, ExperimentKind::CovarianceDecay)?;
    if is_zero_trawl(&ctx.trawl) {
        return ctx.degenerate();
    }
    if ctx.regime != Regime::LongMemory {
        return regime_err(format!("covariance decay needs the long-memory regime, got {}", ctx.regime.as_str()));
    }
    let (_, alpha, c1, _, _) = ctx.long_memory_constants()?;
    ctx.target("c1", c1);
    ctx.target("alpha", alpha);
    let n = cfg.n;
    let tol = ctx.theory_tol;
    let r = theory::autocovariance_sequence(&ctx.seed, &ctx.trawl, n as u64 - 1, tol)?;
    let level_rel = cfg.tolerances.level_rel.unwrap_or(0.1);

    // analytic decay over a lag window, no simulation involved
    let (k_lo, k_hi) = cfg.options.theory_lags.unwrap_or((200, 2000));
    let mut worst = c1;
    for k in k_lo..=k_hi {
        let rk = match r.get(k as usize) {
            Some(v) => *v,
            None => theory::trawl_autocovariance(&ctx.seed, &ctx.trawl, k, tol)?,
        };
        let scaled = (k as f64).powf(alpha - 1.0) * rk;
        if (scaled - c1).abs() > (worst - c1).abs() {
            worst = scaled;
        }
    }
    ctx.details.insert("theory_lag_window".into(), json!([k_lo, k_hi]));
    ctx.push(Criterion::around("theory_scaled_autocov_worst", worst, None, c1, level_rel * c1, 0.0));

    let max_lag = cfg.options.max_lag.unwrap_or(500).min(n - 1);
    let expected = stats::expected_sample_autocovariances(&r, n, max_lag)?;
    let plan = ctx.plan()?;
    let acfs: Vec<Vec<f64>> = par_map(cfg.replicas, |rep| {
        let path = plan.path(rep, 0);
        stats::sample_autocovariances(&path.values, max_lag).expect("lag below path length")
    });
    let se_mult = ctx.se_mult(4.0);
    let mut agree = 0usize;
    let mut rows = Vec::with_capacity(max_lag + 1);
    let mut means = vec![0.0; max_lag + 1];
    let mut ses = vec![0.0; max_lag + 1];
    for k in 0..=max_lag {
        let col: Vec<f64> = acfs.iter().map(|a| a[k]).collect();
        let (mean, se) = (stats::mean(&col), mc_se(&col));
        means[k] = mean;
        ses[k] = se;
        let ok = (mean - expected[k]).abs() <= se_mult * se;
        if k >= 1 && ok {
            agree += 1;
        }
        rows.push(json!({"lag": k, "mean": mean, "se": se, "expected": expected[k], "autocov": r[k], "agree": ok}));
    }
    ctx.details.insert("lags".into(), Value::Array(rows));
    if max_lag >= 1 {
        let frac = agree as f64 / max_lag as f64;
        let need = cfg.tolerances.lag_fraction.unwrap_or(0.95);
        ctx.push(Criterion::new("lag_agreement_fraction", frac, None, 1.0, need, 1.0));
    }
    let level_lag = cfg.options.level_lag.unwrap_or(300);
    if level_lag <= max_lag && level_lag > 0 {
        let k = level_lag;
        let w = (k as f64).powf(alpha - 1.0);
        // bias-corrected estimate of Cov(X_0, X_k), scaled by k^{α−1}
        let est = w * (means[k] + r[k] - expected[k]);
        ctx.push(Criterion::around(
            format!("scaled_autocov_at_lag_{k}"),
            est,
            Some(w * ses[k]),
            c1,
            level_rel * c1,
            0.0,
        ));
    }
    for (rep, a) in acfs.iter().enumerate() {
        for (k, v) in a.iter().enumerate() {
            ctx.stat(rep as u64, n, format!("acov_lag_{k}"), *v);
        }
    }
    Ok(ctx.finish())
}

fn default_dyadic_grid(n: usize) -> Vec<usize> {
    let grid: Vec<usize> = (7..63).map(|b| 1usize << b).take_while(|&m| m <= n).collect();
    if grid.len() >= 3 {
        grid
    } else {
        let mut g = vec![(n / 4).max(1), (n / 2).max(1), n];
        g.dedup();
        g
    }
}

/// Across-replica `Var(S_n)` over a grid of `n` and its log-log slope.
pub fn run_variance_scaling(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut ctx = Ctx::new(cfg, ExperimentKind::VarianceScaling)?;
    if is_zero_trawl(&ctx.trawl) {
        return ctx.degenerate();
    }
    let grid = cfg.options.n_grid.clone().unwrap_or_else(|| default_dyadic_grid(cfg.n));
    if grid.len() < 3 || grid.iter().any(|&m| m == 0 || m > cfg.n) {
        return Err(TrawlError::Config(format!("n_grid needs at least three lengths in [1, {}]", cfg.n)));
    }
    let n_max = *grid.iter().max().expect("nonempty grid");
    let (slope_target, level_target, slope_tol, level_rel) = match ctx.regime {
        Regime::LongMemory => {
            let (_, alpha, _, c2, h) = ctx.long_memory_constants()?;
            ctx.target("c2", c2);
            ctx.target("H", h);
            (3.0 - alpha, c2, cfg.tolerances.slope_abs.unwrap_or(0.1), cfg.tolerances.level_rel.unwrap_or(0.15))
        }
        Regime::ShortMemory => {
            let s2 = theory::sigma_squared(&ctx.seed, &ctx.trawl, ctx.theory_tol)?;
            ctx.target("sigma2", s2);
            (1.0, s2, cfg.tolerances.slope_abs.unwrap_or(0.05), cfg.tolerances.level_rel.unwrap_or(0.1))
        }
        Regime::Undetermined => return regime_err("variance scaling needs a known memory regime"),
    };
    ctx.target("slope", slope_target);
    let plan = ctx.plan()?;
    let sums: Vec<Vec<f64>> = par_map(cfg.replicas, |rep| prefix_sums_at(&plan.path(rep, 0).values, &grid));
    let autocov = theory::autocovariance_sequence(&ctx.seed, &ctx.trawl, n_max as u64 - 1, ctx.theory_tol).ok();
    let mut pairs = Vec::new();
    let mut rows = Vec::new();
    let mut level = (0.0, 0.0);
    for (i, &m) in grid.iter().enumerate() {
        let col: Vec<f64> = sums.iter().map(|s| s[i]).collect();
        let mean = stats::mean(&col);
        let v = stats::variance(&col);
        let sq: Vec<f64> = col.iter().map(|x| (x - mean) * (x - mean)).collect();
        let v_se = mc_se(&sq);
        let exact = autocov.as_ref().and_then(|r| theory::partial_sum_variance_from_autocov(r, m).ok());
        rows.push(json!({"n": m, "variance": v, "se": v_se, "exact_variance": exact}));
        pairs.push((m as f64, v));
        if m == n_max {
            let norm = (m as f64).powf(slope_target);
            level = (v / norm, v_se / norm);
        }
    }
    ctx.details.insert("variances".into(), Value::Array(rows));
    let fit = stats::scaling_exponent_fit(&pairs)?;
    ctx.details.insert("fit".into(), serde_json::to_value(fit)?);
    ctx.push(Criterion::around("slope", fit.slope, Some(fit.slope_se), slope_target, slope_tol, 0.0));
    ctx.push(Criterion::around(
        format!("level_at_n_{n_max}"),
        level.0,
        Some(level.1),
        level_target,
        level_rel * level_target,
        0.0,
    ));
    for (rep, s) in sums.iter().enumerate() {
        for (i, &m) in grid.iter().enumerate() {
            ctx.stat(rep as u64, m, "partial_sum", s[i]);
        }
    }
    Ok(ctx.finish())
}

/// Normal limit of normalized partial sums: KS at time 1 and two-time covariances.
pub fn run_gaussian_limit(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    gaussian_limit(cfg, ExperimentKind::GaussianLimit)
}

/// [`run_gaussian_limit`] restricted to the short-memory regime, normalized by `√n`.
pub fn run_short_memory_clt(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    gaussian_limit(cfg, ExperimentKind::ShortMemoryClt)
}

fn gaussian_limit(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<ExperimentReport> {
    let mut ctx = Ctx::new(cfg, kind)?;
    if is_zero_trawl(&ctx.trawl) {
        return ctx.degenerate();
    }
    let (h, var) = match ctx.regime {
        Regime::LongMemory if kind == ExperimentKind::GaussianLimit => {
            if !ctx.seed.is_continuous() {
                return regime_err(format!(
                    "a {} seed in the long-memory regime has a stable, not Gaussian, limit",
                    ctx.seed.tag()
                ));
            }
            let (_, _, _, c2, h) = ctx.long_memory_constants()?;
            ctx.target("c2", c2);
            (h, c2)
        }
        Regime::ShortMemory => {
            let s2 = theory::sigma_squared(&ctx.seed, &ctx.trawl, ctx.theory_tol)?;
            ctx.target("sigma2", s2);
            (0.5, s2)
        }
        other => {
            return regime_err(format!("{} does not apply in the {} regime", kind.as_str(), other.as_str()));
        }
    };
    ctx.target("H", h);
    let n = cfg.n;
    let pairs = cfg.options.time_pairs.clone().unwrap_or_else(|| vec![(0.5, 1.0), (0.25, 0.75)]);
    let mut times: Vec<f64> = vec![1.0];
    for &(s, t) in &pairs {
        if !(s > 0.0 && t > 0.0 && s <= 1.0 && t <= 1.0) {
            return Err(TrawlError::Config(format!("time pair ({s}, {t}) must lie in (0, 1]")));
        }
        times.extend([s, t]);
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let lengths: Vec<usize> = times.iter().map(|t| ((n as f64 * t).floor() as usize).max(1)).collect();
    let sampler = ctx.gaussian_paths()?;
    let mu = sampler.mean();
    let norm = (n as f64).powf(-h);
    let scaled: Vec<Vec<f64>> = par_map(cfg.replicas, |rep| {
        let s = prefix_sums_at(&sampler.values(rep), &lengths);
        s.iter().zip(&lengths).map(|(v, &m)| norm * (v - m as f64 * mu)).collect()
    });
    let col = |i: usize| -> Vec<f64> { scaled.iter().map(|s| s[i]).collect() };
    let idx = |t: f64| times.iter().position(|x| *x == t).expect("time on grid");
    let m = cfg.replicas;

    let y1 = col(idx(1.0));
    let d = stats::ks_statistic(&SampleSet::new(y1.clone())?, |x| stats::normal_cdf(x / var.sqrt()));
    let level = cfg.tolerances.ks_level.unwrap_or(0.01);
    let crit = stats::ks_critical_value(m, level);
    let mut ks = Criterion::at_most("ks_statistic", d, None, 0.0, crit);
    ks.target = 0.0;
    ctx.push(ks);
    ctx.details.insert("ks_p_value".into(), json!(stats::kolmogorov_q((m as f64).sqrt() * d)));
    ctx.details.insert("ks_level".into(), json!(level));
    ctx.details.insert("sample_variance_t1".into(), json!(stats::variance(&y1)));

    let se_mult = ctx.se_mult(4.0);
    for &(s, t) in &pairs {
        let (a, b) = (col(idx(s)), col(idx(t)));
        let (ma, mb) = (stats::mean(&a), stats::mean(&b));
        let prods: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        let cov = stats::covariance(&a, &b);
        let se = mc_se(&prods);
        let target = var * theory::fbm_covariance(h, s, t)?;
        ctx.push(Criterion::around(format!("cov_s{s}_t{t}"), cov, Some(se), target, 0.0, se_mult * se));
    }
    for (rep, s) in scaled.iter().enumerate() {
        for (i, &len) in lengths.iter().enumerate() {
            ctx.stat(rep as u64, len, "scaled_partial_sum", s[i]);
        }
    }
    Ok(ctx.finish())
}

const DEFAULT_Z_GRID: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// Stable limit of `n^{−1/α}(S_n − E S_n)` through its characteristic function,
/// and the decay of the `n^{−H}`-normalized spread.
pub fn run_stable_limit(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut ctx = Ctx::new(cfg, ExperimentKind::StableLimit)?;
    let (alpha, scale) = ctx.stable_params()?;
    let h = (3.0 - alpha) / 2.0;
    ctx.target("alpha", alpha);
    ctx.target("stable_c0", scale);
    ctx.target("H", h);
    ctx.target("evanescence_slope", -(h - 1.0 / alpha));
    let n = cfg.n;
    let z_grid = cfg.options.z_grid.clone().unwrap_or_else(|| DEFAULT_Z_GRID.to_vec());
    let ev_grid = cfg.options.n_grid.clone().unwrap_or_else(|| vec![(n / 16).max(1), (n / 4).max(1), n]);
    if ev_grid.iter().any(|&m| m == 0 || m > n) {
        return Err(TrawlError::Config(format!("n_grid lengths must lie in [1, {n}]")));
    }
    let mut lengths = ev_grid.clone();
    lengths.push(n);
    let plan = ctx.plan()?;
    let mu = plan.theoretical_mean();
    let sums: Vec<Vec<f64>> = par_map(cfg.replicas, |rep| {
        let s = prefix_sums_at(&plan.path(rep, 0).values, &lengths);
        s.iter().zip(&lengths).map(|(v, &m)| v - m as f64 * mu).collect()
    });
    let m = cfg.replicas;
    let stable_norm = (n as f64).powf(-1.0 / alpha);
    let y: Vec<f64> = sums.iter().map(|s| stable_norm * s[ev_grid.len()]).collect();

    let phi_hat = stats::empirical_charfn(&SampleSet::new(y.clone())?, &z_grid);
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for (z, ph) in z_grid.iter().zip(&phi_hat) {
        let target = theory::stable_charfn(alpha, scale, 1.0, *z)?;
        worst = worst.max((ph - target).norm());
        rows.push(json!({"z": z, "empirical": [ph.re, ph.im], "target": [target.re, target.im]}));
    }
    ctx.details.insert("charfn".into(), Value::Array(rows));
    let model = cfg.tolerances.charfn_model.unwrap_or(0.03);
    let mc = ctx.se_mult(4.0) / (m as f64).sqrt();
    ctx.push(Criterion::at_most("charfn_max_deviation", worst, None, model, mc));

    let se = mc_se(&y);
    ctx.push(Criterion::around("centered_mean", stats::mean(&y), Some(se), 0.0, 0.0, ctx.se_mult(4.0) * se));

    let mut sd_pairs = Vec::new();
    let mut iqr_pairs = Vec::new();
    let mut sd_rows = Vec::new();
    for (i, &len) in ev_grid.iter().enumerate() {
        let mut w: Vec<f64> = sums.iter().map(|s| (len as f64).powf(-h) * s[i]).collect();
        let sd = stats::variance(&w).sqrt();
        w.sort_by(f64::total_cmp);
        // the interquartile range tracks the bulk, which lives on the n^{1/α} scale
        let iqr = stats::quantile(&w, 0.75) - stats::quantile(&w, 0.25);
        sd_rows.push(json!({"n": len, "sd": sd, "iqr": iqr}));
        sd_pairs.push((len as f64, sd));
        iqr_pairs.push((len as f64, iqr));
    }
    ctx.details.insert("evanescence".into(), Value::Array(sd_rows));
    if let Ok(f) = stats::scaling_exponent_fit(&iqr_pairs) {
        ctx.details.insert("iqr_slope".into(), json!(f.slope));
    }
    let fit = stats::scaling_exponent_fit(&sd_pairs)?;
    ctx.push(Criterion::around(
        "evanescence_slope",
        fit.slope,
        Some(fit.slope_se),
        -(h - 1.0 / alpha),
        cfg.tolerances.evanescence_slope.unwrap_or(0.05),
        0.0,
    ));
    for (rep, s) in sums.iter().enumerate() {
        ctx.stat(rep as u64, n, "stable_scaled_sum", stable_norm * s[ev_grid.len()]);
        for (i, &len) in ev_grid.iter().enumerate() {
            ctx.stat(rep as u64, len, "hurst_scaled_sum", (len as f64).powf(-h) * s[i]);
        }
    }
    Ok(ctx.finish())
}

/// Regular variation of `P(Z > y)` from exact draws of `Z = Σ_j γ(a_j)`,
/// with the first-jump count `Z*` examined separately.
pub fn run_tail_law(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut ctx = Ctx::new(cfg, ExperimentKind::TailLaw)?;
    if !ctx.seed.is_jump() {
        return regime_err(format!("the tail experiment needs a jump seed, got {}", ctx.seed.tag()));
    }
    ctx.seed.check_arg(ctx.trawl.max_value())?;
    let draws: Vec<(f64, f64)> = {
        let (seed, trawl, master) = (&ctx.seed, &ctx.trawl, cfg.master_seed);
        let out: Vec<Result<(f64, f64)>> = par_map(cfg.replicas, |i| {
            let mut rng = StreamKey::new(master, i, 0, StreamDomain::AggregateDraw, 0).rng();
            sample_z_with(seed, trawl, &mut rng).map(|d| (d.z, d.z_star.unwrap_or(0.0)))
        });
        out.into_iter().collect::<Result<_>>()?
    };
    let m = draws.len();
    let z: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let z_star: Vec<f64> = draws.iter().map(|d| d.1).collect();
    for (i, d) in draws.iter().enumerate() {
        ctx.stat(i as u64, 0, "Z", d.0);
        ctx.stat(i as u64, 0, "Z_star", d.1);
    }
    let mut sorted = z.clone();
    sorted.sort_by(f64::total_cmp);
    ctx.details.insert("draws".into(), json!(m));
    ctx.details.insert("max_z".into(), json!(sorted[m - 1]));

    let Some((c0, alpha)) = ctx.trawl.power_tail_params().filter(|&(_, a)| a < 2.0) else {
        // no regularly varying tail: the survival function vanishes beyond the sample
        ctx.details.insert("heavy_tail".into(), json!(false));
        let y = sorted[m - 1];
        let ratio = stats::tail_ratio(&SampleSet::new(z)?, 1.5, &[y])[0].1;
        ctx.push(Criterion::new("tail_ratio_at_max", ratio, None, 0.0, 0.0, 0.0));
        return Ok(ctx.finish());
    };
    ctx.details.insert("heavy_tail".into(), json!(true));
    let f0 = ctx.seed.first_jump_density_at_zero()?;
    let scale = c0 * f0;
    ctx.target("alpha", alpha);
    ctx.target("tail_c0", scale);
    let (p_lo, p_hi) = cfg.options.quantile_window.unwrap_or((0.99, 0.999));
    let points = cfg.options.window_points.unwrap_or(5).max(2);
    if !(0.0 < p_lo && p_lo < p_hi && p_hi < 1.0) {
        return Err(TrawlError::Config(format!("quantile window ({p_lo}, {p_hi}) must satisfy 0 < lo < hi < 1")));
    }
    let probs: Vec<f64> = (0..points).map(|i| p_lo + (p_hi - p_lo) * i as f64 / (points - 1) as f64).collect();
    let ys: Vec<f64> = probs.iter().map(|&p| stats::quantile(&sorted, p)).collect();
    ctx.details.insert("window".into(), json!({"probabilities": probs, "y": ys}));
    let rel = cfg.tolerances.level_rel.unwrap_or(0.15);
    let z_set = SampleSet::new(z)?;
    let star_set = SampleSet::new(z_star)?;
    for (label, set) in [("tail_ratio", &z_set), ("z_star_tail_ratio", &star_set)] {
        for ((y, ratio), p) in stats::tail_ratio(set, alpha, &ys).into_iter().zip(&probs) {
            let surv = ratio / y.powf(alpha);
            let se = y.powf(alpha) * (surv * (1.0 - surv) / m as f64).sqrt();
            ctx.push(Criterion::around(format!("{label}@{p:.4}"), ratio, Some(se), scale, rel * scale, 0.0));
        }
    }
    if matches!(ctx.seed, SeedModel::Bernoulli) && ctx.trawl.is_monotone() {
        // Z = #{j : a_j ≥ U}, so P(Z > y) = a_⌊y⌋ exactly
        let mult = ctx.se_mult(3.0);
        for (y, p) in ys.iter().zip(&probs) {
            let exact = ctx.trawl.value(y.floor() as u64)?.min(1.0);
            let emp = stats::tail_ratio(&z_set, 0.0, &[*y])[0].1;
            let se = (exact * (1.0 - exact) / m as f64).sqrt();
            ctx.push(Criterion::around(format!("bernoulli_survival@{p:.4}"), emp, Some(se), exact, 0.0, mult * se));
        }
    }
    Ok(ctx.finish())
}

/// Charfn of the difference of two independent copies: real and equal to `|φ|²`.
pub fn run_symmetric_difference(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut ctx = Ctx::new(cfg, ExperimentKind::SymmetricDifference)?;
    if let Some(other) = &cfg.counterpart {
        if other.seed_model != cfg.seed_model || other.trawl != cfg.trawl {
            return Err(TrawlError::Config(
                "the two processes of a symmetric difference must be configured identically".into(),
            ));
        }
    }
    ctx.lanes = vec![0, 1];
    if is_zero_trawl(&ctx.trawl) {
        return ctx.degenerate();
    }
    let (alpha, scale) = ctx.stable_params()?;
    ctx.target("alpha", alpha);
    ctx.target("stable_c0", scale);
    let n = cfg.n;
    let z_grid = cfg.options.z_grid.clone().unwrap_or_else(|| DEFAULT_Z_GRID.to_vec());
    let plan = ctx.plan()?;
    let norm = (n as f64).powf(-1.0 / alpha);
    let diffs: Vec<f64> = par_map(cfg.replicas, |rep| {
        let plus: f64 = plan.path(rep, 0).values.iter().sum();
        let minus: f64 = plan.path(rep, 1).values.iter().sum();
        norm * (plus - minus)
    });
    let m = cfg.replicas;
    let phi_hat = stats::empirical_charfn(&SampleSet::new(diffs.clone())?, &z_grid);
    let (mut worst_im, mut worst_mod): (f64, f64) = (0.0, 0.0);
    let mut rows = Vec::new();
    for (z, ph) in z_grid.iter().zip(&phi_hat) {
        let target = theory::stable_charfn(alpha, scale, 1.0, *z)?.norm_sqr();
        worst_im = worst_im.max(ph.im.abs());
        worst_mod = worst_mod.max((ph.norm() - target).abs());
        rows.push(json!({"z": z, "empirical": [ph.re, ph.im], "target_modulus": target}));
    }
    ctx.details.insert("charfn".into(), Value::Array(rows));
    let mc = ctx.se_mult(4.0) / (m as f64).sqrt();
    ctx.push(Criterion::at_most("max_imaginary_part", worst_im, None, 0.0, mc));
    let model = cfg.tolerances.charfn_model.unwrap_or(0.03);
    ctx.push(Criterion::at_most("modulus_max_deviation", worst_mod, None, model, mc));
    for (rep, d) in diffs.iter().enumerate() {
        ctx.stat(rep as u64, n, "scaled_difference", *d);
    }
    Ok(ctx.finish())
}
