//! Desk-scale acceptance run: ten criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the verdict lines are always printed.
//! Pass a substring of a criterion name to run a subset. The process fails on
//! any unexpected FAIL; criteria listed in `KNOWN_RED` are still evaluated and
//! printed, but do not fail the run.

use std::time::Instant;

use rand::Rng;
use trawlkit::config::ModelSpec;
use trawlkit::experiments::{
    run_covariance_decay, run_experiment, run_gaussian_limit, run_short_memory_clt, run_stable_limit,
    run_symmetric_difference, run_tail_law, run_variance_scaling, Criterion, ExperimentConfig, ExperimentKind,
    ExperimentReport, GaussianSampler,
};
use trawlkit::rng::{StreamDomain, StreamKey};
use trawlkit::simulate::{jump_direct_evaluation, jump_fast_path, simulate_decomposition, simulate_path, SimPlan};
use trawlkit::{stats, MixingLaw, SeedModel, SimOptions, TailRule, TrawlSequence};

const MASTER: u64 = 20_261_014;

/// Criteria whose target cannot be met by a faithful implementation.
const KNOWN_RED: &[(u32, &str)] = &[(
    7,
    "Var(S_n) ~ c2 n^{3-alpha} is finite, so the sample SD of n^{-H}(S_n - ES_n) tends to sqrt(c2) and its \
     log-log slope to 0; only the bulk (e.g. the interquartile range) shrinks like n^{1/alpha-H}",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn pl() -> TrawlSequence {
    TrawlSequence::power_law(1.0, 1.5).unwrap()
}

fn config(kind: ExperimentKind, seed: &str, trawl: &str, n: usize, replicas: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        kind,
        ModelSpec::parse_inline(seed).unwrap(),
        ModelSpec::parse_inline(trawl).unwrap(),
        n,
        replicas,
    );
    c.master_seed = MASTER;
    c
}

fn get<'a>(r: &'a ExperimentReport, name: &str) -> &'a Criterion {
    r.criterion(name).unwrap_or_else(|| panic!("report lacks criterion {name}"))
}

fn describe(c: &Criterion) -> String {
    format!("{} = {:.5} in [{:.5}, {:.5}]", c.name, c.estimate, c.lower, c.upper)
}

fn combine(parts: &[&Criterion]) -> Outcome {
    Outcome {
        pass: parts.iter().all(|c| c.pass),
        detail: parts.iter().map(|c| describe(c)).collect::<Vec<_>>().join("; "),
    }
}

/// Brownian seed on a geometric trawl behaves like an AR(1) with `r(k) = 2 · 0.5^k`.
fn ar1_exactness() -> Outcome {
    let n = 100_000;
    let trawl = TrawlSequence::geometric(0.5).unwrap();
    let path = simulate_path(&SeedModel::Brownian, &trawl, n, &SimOptions::with_seed(MASTER, 0)).unwrap();
    let acf = stats::sample_autocovariances(&path.values, 5).unwrap();
    let r: Vec<f64> = (0..80).map(|l| 2.0 * 0.5f64.powi(l)).collect();
    let mut worst: f64 = 0.0;
    for (k, g) in acf.iter().enumerate() {
        let se = stats::bartlett_variance(&r, n, k).sqrt();
        worst = worst.max((g - r[k]).abs() / se);
    }
    Outcome { pass: worst <= 4.0, detail: format!("max |acov − 2·0.5^k| over k ≤ 5 = {worst:.2} SE (≤ 4)") }
}

/// Marginal of `X_1` against Poisson with the truncated mean, over independent replicas.
fn poisson_marginal() -> Outcome {
    let draws = 100_000u64;
    let plan = SimPlan::new(&SeedModel::Poisson, &pl(), 1, &SimOptions::with_seed(MASTER, 0)).unwrap();
    let x: Vec<f64> = (0..draws).map(|r| plan.path(r, 0).values[0]).collect();
    let t = stats::chi_square_poisson(&x, plan.theoretical_mean(), 5.0).unwrap();
    Outcome {
        pass: t.p_value > 0.01,
        detail: format!(
            "chi² = {:.2} on {} dof, p = {:.4} (> 0.01), mean {:.6}",
            t.statistic,
            t.dof,
            t.p_value,
            plan.theoretical_mean()
        ),
    }
}

fn covariance_decay() -> Outcome {
    let c = config(ExperimentKind::CovarianceDecay, "poisson", "power-law:c0=1,alpha=1.5", 200_000, 200);
    let r = run_covariance_decay(&c).unwrap();
    combine(&[get(&r, "theory_scaled_autocov_worst"), get(&r, "lag_agreement_fraction")])
}

fn variance_scaling() -> Outcome {
    let mut c = config(ExperimentKind::VarianceScaling, "poisson", "power-law:c0=1,alpha=1.5", 1 << 13, 1000);
    c.options.n_grid = Some((7..=13).map(|b| 1usize << b).collect());
    let r = run_variance_scaling(&c).unwrap();
    combine(&[get(&r, "slope"), get(&r, "level_at_n_8192")])
}

/// Full scale with the exact circulant sampler, plus a smaller run of the
/// source-by-source construction held to its own 1% KS critical value.
fn gaussian_limit() -> Outcome {
    let mut c = config(ExperimentKind::GaussianLimit, "bm", "power-law:c0=1,alpha=1.5", 1 << 13, 2000);
    c.options.time_pairs = Some(vec![(0.5, 1.0)]);
    let r = run_gaussian_limit(&c).unwrap();
    assert_eq!(r.details["sampler"], "circulant");

    let mut k = c.clone();
    k.replicas = 300;
    k.master_seed = MASTER + 1;
    k.options.gaussian_sampler = Some(GaussianSampler::Construction);
    let rk = run_gaussian_limit(&k).unwrap();
    let mut ks = get(&rk, "ks_statistic").clone();
    ks.name = "construction_ks_statistic".into();
    let mut cov = get(&rk, "cov_s0.5_t1").clone();
    cov.name = "construction_cov_s0.5_t1".into();
    combine(&[get(&r, "ks_statistic"), get(&r, "cov_s0.5_t1"), &ks, &cov])
}

fn short_memory_clt() -> Outcome {
    let c = config(ExperimentKind::ShortMemoryClt, "poisson", "geometric:a=0.5", 1 << 13, 2000);
    let r = run_short_memory_clt(&c).unwrap();
    combine(&[get(&r, "ks_statistic")])
}

fn stable_limit() -> Outcome {
    let c = config(ExperimentKind::StableLimit, "poisson", "power-law:c0=1,alpha=1.5", 1 << 14, 5000);
    let r = run_stable_limit(&c).unwrap();
    let mut o = combine(&[get(&r, "charfn_max_deviation"), get(&r, "evanescence_slope")]);
    if let Some(s) = r.details.get("iqr_slope") {
        o.detail.push_str(&format!("; interquartile-range slope {:.4}", s.as_f64().unwrap_or(f64::NAN)));
    }
    o
}

fn tail_law() -> Outcome {
    let poisson =
        run_tail_law(&config(ExperimentKind::TailLaw, "poisson", "power-law:c0=1,alpha=1.5", 1, 1_000_000)).unwrap();
    let bernoulli =
        run_tail_law(&config(ExperimentKind::TailLaw, "bernoulli", "power-law:c0=1,alpha=1.5", 1, 1_000_000)).unwrap();
    let ratios: Vec<&Criterion> = poisson.criteria.iter().filter(|c| c.name.starts_with("tail_ratio@")).collect();
    let exact: Vec<&Criterion> =
        bernoulli.criteria.iter().filter(|c| c.name.starts_with("bernoulli_survival@")).collect();
    let lo = ratios.iter().map(|c| c.estimate).fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().map(|c| c.estimate).fold(f64::NEG_INFINITY, f64::max);
    let worst_se =
        exact.iter().map(|c| (c.estimate - c.target).abs() / c.standard_error.unwrap()).fold(0.0f64, f64::max);
    Outcome {
        pass: !ratios.is_empty() && !exact.is_empty() && ratios.iter().chain(&exact).all(|c| c.pass),
        detail: format!(
            "Poisson y^1.5·P(Z>y) in [{lo:.4}, {hi:.4}] over the 99–99.9% window (need [0.85, 1.15]); \
             Bernoulli survival within {worst_se:.2} SE of a_⌊y⌋ (≤ 3)"
        ),
    }
}

fn symmetry() -> Outcome {
    let c = config(ExperimentKind::SymmetricDifference, "poisson", "power-law:c0=1,alpha=1.5", 1 << 14, 5000);
    let r = run_symmetric_difference(&c).unwrap();
    combine(&[get(&r, "max_imaginary_part"), get(&r, "modulus_max_deviation")])
}

fn engineering_invariants() -> Outcome {
    // decomposition identity
    let mut identity_ok = true;
    let seeds = [
        SeedModel::Poisson,
        SeedModel::Bernoulli,
        SeedModel::mixed_poisson(MixingLaw::exponential(2.0).unwrap()).unwrap(),
    ];
    let trawls = [
        pl(),
        TrawlSequence::geometric(0.6).unwrap(),
        TrawlSequence::custom(vec![1.0, 0.7, 0.2], Some(TailRule::Zero)).unwrap(),
    ];
    for seed in &seeds {
        for trawl in &trawls {
            for rep in 0..3 {
                let opts = SimOptions::with_seed(MASTER, rep);
                let path = simulate_path(seed, trawl, 300, &opts).unwrap();
                let dec = simulate_decomposition(seed, trawl, 300, &opts).unwrap();
                identity_ok &= dec.total() == path.values.iter().sum::<f64>();
            }
        }
    }

    // determinism across worker counts
    let c = config(ExperimentKind::StableLimit, "poisson", "power-law:c0=1,alpha=1.5", 512, 64);
    let key = |w| {
        let mut r = run_experiment(&c, Some(w)).unwrap();
        r.wall_clock_seconds = 0.0;
        (r.to_json().unwrap(), r.per_replica_csv())
    };
    let deterministic = key(1) == key(4);

    // fast path against direct evaluation, 10^4 random small instances
    let mut rng = StreamKey::new(MASTER, 0, 0, StreamDomain::Replica, 10).rng();
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=6usize);
        let len = rng.random_range(1..=6usize);
        let mut a: Vec<f64> = (0..len).map(|_| (rng.random_range(0..=8u32) as f64) / 8.0).collect();
        a.sort_by(|x, y| y.total_cmp(x));
        let sources: Vec<(i64, Vec<f64>)> = (1 - len as i64..=n as i64)
            .map(|s| {
                let jumps = rng.random_range(0..=3usize);
                // grid-valued times hit trawl heights exactly, exercising ties
                let times = (0..jumps).map(|_| rng.random_range(1..=9u32) as f64 / 8.0).collect();
                (s, times)
            })
            .collect();
        if jump_fast_path(&a, n, &sources).unwrap() != jump_direct_evaluation(&a, n, &sources) {
            mismatches += 1;
        }
    }
    Outcome {
        pass: identity_ok && deterministic && mismatches == 0,
        detail: format!(
            "decomposition identity exact: {identity_ok}; workers 1 vs 4 identical: {deterministic}; \
             fast-path mismatches: {mismatches}/10000"
        ),
    }
}

type Check = fn() -> Outcome;

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(u32, &str, f64, Check); 10] = [
        (1, "ar1_exactness", 10.0, ar1_exactness),
        (2, "poisson_marginal", 60.0, poisson_marginal),
        (3, "covariance_decay", 600.0, covariance_decay),
        (4, "variance_scaling", 600.0, variance_scaling),
        (5, "gaussian_limit", 600.0, gaussian_limit),
        (6, "short_memory_clt", 300.0, short_memory_clt),
        (7, "stable_limit", 1200.0, stable_limit),
        (8, "tail_law", 120.0, tail_law),
        (9, "symmetry", 1200.0, symmetry),
        (10, "engineering_invariants", 600.0, engineering_invariants),
    ];
    let mut unexpected = 0;
    for (id, name, budget, check) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let pass = outcome.pass && secs < budget;
        let known = KNOWN_RED.iter().find(|(k, _)| *k == id);
        let verdict = match (pass, known) {
            (true, None) => "PASS",
            (true, Some(_)) => "PASS (expected red)",
            (false, Some(_)) => "FAIL (known unattainable)",
            (false, None) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("criterion {id:>2} {name}: {verdict} — {}; {secs:.1} s (budget {budget} s)", outcome.detail);
        if let (false, Some((_, why))) = (pass, known) {
            println!("             reason: {why}");
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
