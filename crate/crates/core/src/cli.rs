//! Command-line front end.
//!
//! Exit codes: 0 success (and all criteria passed), 1 an experiment criterion
//! failed, 2 invalid invocation or configuration.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{build_seed, build_trawl, ModelSpec};
use crate::error::{Result, TrawlError};
use crate::experiments::{run_experiment, write_atomic, ExperimentConfig};
use crate::seeds::SeedModel;
use crate::simulate::{simulate_path, SimOptions};
use crate::stats;
use crate::theory;
use crate::trawl::TrawlSequence;

/// Environment variable consulted when `--master-seed` is absent.
pub const MASTER_SEED_ENV: &str = "TRAWLKIT_MASTER_SEED";

#[derive(Debug, Parser)]
#[command(name = "trawlkit", version, about = "Simulate and verify discrete-time trawl processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path and write it as CSV `k,x` plus a JSON sidecar.
    Simulate(SimulateArgs),
    /// Print the analytic report (mean, autocovariances, constants) as JSON.
    Theory(TheoryArgs),
    /// Sample autocovariances of a path stored as CSV `k,x`.
    Acf(AcfArgs),
    /// Run a Monte Carlo experiment described by a JSON config.
    Experiment(ExperimentArgs),
    /// Print the summability conditions and the memory regime as JSON.
    Conditions(ModelArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Seed process, `tag[:key=value,...]` (line, bm, poisson, mixed-poisson, bernoulli, gbm, diffusion).
    #[arg(long)]
    pub seed: Option<String>,
    /// Trawl sequence, `tag[:key=value,...]` (power-law, geometric, custom).
    #[arg(long)]
    pub trawl: Option<String>,
    /// JSON file with `seed_model` and/or `trawl` objects; wins over inline flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Path length.
    #[arg(long)]
    pub n: usize,
    /// Master seed (default: $TRAWLKIT_MASTER_SEED, else 0).
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub replica: u64,
    #[arg(long, default_value_t = 0)]
    pub lane: u32,
    /// Bound on the per-step mean error from truncating the past.
    #[arg(long, default_value_t = 1e-3)]
    pub truncation_tol: f64,
    /// Force a dense past of exactly this depth.
    #[arg(long)]
    pub past_horizon: Option<u64>,
    /// Output CSV; the sidecar is written next to it with extension `.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 20)]
    pub max_lag: u64,
    /// Absolute tolerance of every series.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct AcfArgs {
    /// CSV path with header `k,x`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub max_lag: usize,
    /// Optional model: adds a `theory` column with the analytic autocovariances.
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report JSON path (default: config `output.report`, else `<config>.report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-replica CSV path (default: config `output.per_replica`, else `<config>.replicas.csv`).
    #[arg(long)]
    pub per_replica: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("trawlkit: {e}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Theory(a) => cmd_theory(&a),
        Command::Acf(a) => cmd_acf(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::Conditions(a) => cmd_conditions(&a),
    }
}

/// Inline specs merged with the config file; the file wins on conflict.
fn resolve_specs(m: &ModelArgs) -> Result<(Option<ModelSpec>, Option<ModelSpec>)> {
    let mut seed = m.seed.as_deref().map(ModelSpec::parse_inline).transpose()?;
    let mut trawl = m.trawl.as_deref().map(ModelSpec::parse_inline).transpose()?;
    if let Some(path) = &m.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrawlError::Config(format!("cannot read {}: {e}", path.display())))?;
        let v: Value =
            serde_json::from_str(&text).map_err(|e| TrawlError::Config(format!("{}: {e}", path.display())))?;
        for (key, slot, flag) in [("seed_model", &mut seed, "--seed"), ("trawl", &mut trawl, "--trawl")] {
            if let Some(obj) = v.get(key) {
                let spec: ModelSpec = serde_json::from_value(obj.clone())
                    .map_err(|e| TrawlError::Config(format!("{}: {key}: {e}", path.display())))?;
                if slot.as_ref().is_some_and(|s| *s != spec) {
                    eprintln!("warning: {key} from {} overrides {flag}", path.display());
                }
                *slot = Some(spec);
            }
        }
    }
    Ok((seed, trawl))
}

fn require_model(m: &ModelArgs) -> Result<(SeedModel, TrawlSequence, ModelSpec, ModelSpec)> {
    let (seed, trawl) = resolve_specs(m)?;
    let seed = seed.ok_or_else(|| TrawlError::Config("a seed is required (--seed or --config)".into()))?;
    let trawl = trawl.ok_or_else(|| TrawlError::Config("a trawl is required (--trawl or --config)".into()))?;
    Ok((build_seed(&seed)?, build_trawl(&trawl)?, seed, trawl))
}

fn master_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(MASTER_SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| TrawlError::Config(format!("{MASTER_SEED_ENV} must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let (seed, trawl, seed_spec, trawl_spec) = require_model(&a.model)?;
    let opts = SimOptions {
        truncation_tol: a.truncation_tol,
        past_horizon_override: a.past_horizon,
        master_seed: master_seed(a.master_seed)?,
        replica_index: a.replica,
        stream_lane: a.lane,
        ..SimOptions::default()
    };
    if a.n == 0 {
        return Err(TrawlError::Config("--n must be positive".into()));
    }
    let path = simulate_path(&seed, &trawl, a.n, &opts)?;
    let mut csv = String::with_capacity(path.values.len() * 8 + 4);
    csv.push_str("k,x\n");
    for (k, x) in path.values.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", k + 1, x));
    }
    write_atomic(&a.out, csv.as_bytes())?;
    let sidecar = json!({
        "seed_model": seed_spec,
        "trawl": trawl_spec,
        "n": a.n,
        "master_seed": opts.master_seed,
        "replica": opts.replica_index,
        "lane": opts.stream_lane,
        "truncation_tol": opts.truncation_tol,
        "theoretical_mean": path.theoretical_mean,
        "past_horizon_used": path.past_horizon_used,
        "truncation_mean_bound": path.truncation_mean_bound,
        "past_method": path.past_method,
        "approximate": path.approximate,
        "grid_step": path.grid_step,
    });
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    write_atomic(&sidecar_path(&a.out), text.as_bytes())?;
    Ok(0)
}

/// `out.csv` → `out.json`; other names get `.json` appended.
pub fn sidecar_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "csv") {
        out.with_extension("json")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }
}

fn cmd_theory(a: &TheoryArgs) -> Result<i32> {
    let (seed, trawl, _, _) = require_model(&a.model)?;
    let report = theory::theory_report(&seed, &trawl, a.max_lag, a.tol)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn cmd_conditions(a: &ModelArgs) -> Result<i32> {
    let (seed, trawl, _, _) = require_model(a)?;
    println!("{}", serde_json::to_string_pretty(&trawl.condition_report(&seed))?);
    Ok(0)
}

fn read_path_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| TrawlError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let col = header
        .split(',')
        .position(|h| h.trim() == "x")
        .ok_or_else(|| TrawlError::Config(format!("{}: header must contain an 'x' column", path.display())))?;
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .nth(col)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| TrawlError::Config(format!("{}: bad value on data line {}", path.display(), i + 1)))
        })
        .collect()
}

fn cmd_acf(a: &AcfArgs) -> Result<i32> {
    let x = read_path_csv(&a.input)?;
    let acf = stats::sample_autocovariances(&x, a.max_lag).map_err(|e| TrawlError::Config(e.to_string()))?;
    let has_model = a.model.seed.is_some() || a.model.trawl.is_some() || a.model.config.is_some();
    let theory = if has_model {
        let (seed, trawl, _, _) = require_model(&a.model)?;
        Some(theory::autocovariance_sequence(&seed, &trawl, a.max_lag as u64, 1e-10)?)
    } else {
        None
    };
    let mut out = String::from(if theory.is_some() { "k,acov,theory\n" } else { "k,acov\n" });
    for (k, v) in acf.iter().enumerate() {
        match &theory {
            Some(t) => out.push_str(&format!("{k},{v},{}\n", t[k])),
            None => out.push_str(&format!("{k},{v}\n")),
        }
    }
    match &a.out {
        Some(p) => write_atomic(p, out.as_bytes())?,
        None => print!("{out}"),
    }
    Ok(0)
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<i32> {
    let cfg = ExperimentConfig::from_file(&a.config)?;
    if a.workers == Some(0) {
        return Err(TrawlError::Config("--workers must be positive".into()));
    }
    let default = |suffix: &str| {
        let mut s = a.config.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    let report_path = a.report.clone().or(cfg.output.report.clone()).unwrap_or_else(|| default(".report.json"));
    let csv_path = a.per_replica.clone().or(cfg.output.per_replica.clone()).unwrap_or_else(|| default(".replicas.csv"));
    let report = run_experiment(&cfg, a.workers)?;
    report.write(&report_path, &csv_path)?;
    for c in &report.criteria {
        eprintln!(
            "{} {}: estimate {} in [{}, {}]",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.estimate,
            c.lower,
            c.upper
        );
    }
    Ok(report.exit_code())
}
