//! Trajectories `X_1..X_n` of a trawl process built source by source.
//!
//! Source `s` carries one seed path `γ_s` and contributes `γ_s(a_{k−s})` to every
//! `X_k` with `k ≥ s`. Sources `s ∈ [1, n]` are always simulated individually.
//! The infinite past `s ≤ 0` is handled by one of the [`PastMethod`]s:
//!
//! * `Dense` — every past source down to depth `S` is simulated, the rest dropped;
//! * `Sparse` — jump seeds on a monotone trawl: past sources beyond a dense window
//!   are visited by geometric skipping, since a source far in the past is almost
//!   surely inactive (no jump before the largest trawl height it sees);
//! * `GaussianAggregate` — the whole remote past is replaced by one Brownian
//!   motion read at the tail sums `Σ_{j≥m} g(a_j)`. For a Brownian seed this is an
//!   exact identity in law; for other continuous seeds it matches two moments only.
//!
//! For a Brownian seed the process is exactly a stationary Gaussian sequence, so
//! [`CirculantSampler`] offers an `O(n log n)` alternative to the `O(n²)`
//! source-by-source construction.
//!
//! Every source draws from its own counter-based stream, so a trajectory is a pure
//! function of `(master_seed, replica_index, stream_lane)` and the parameters.

use std::collections::BTreeMap;

use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{domain, Result, TrawlError};
use crate::rng::{StreamDomain, StreamKey, StreamRng};
use crate::seeds::{uniform_open_closed, Moment, SeedModel};
use crate::theory;
use crate::trawl::{Regime, TrawlSequence};

/// Past sources simulated one by one for jump seeds before sparse sampling takes over.
const MIN_DENSE_JUMP_DEPTH: u64 = 1 << 12;
const MAX_HORIZON: u64 = 1 << 62;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimOptions {
    /// Bound on the mean error of each `X_k` caused by dropping the remote past.
    pub truncation_tol: f64,
    pub past_horizon_override: Option<u64>,
    pub master_seed: u64,
    pub replica_index: u64,
    /// Separates independent processes that share a master seed and replica.
    pub stream_lane: u32,
    /// Largest number of past sources simulated one by one for continuous seeds.
    pub max_dense_past: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            truncation_tol: 1e-3,
            past_horizon_override: None,
            master_seed: 0,
            replica_index: 0,
            stream_lane: 0,
            max_dense_past: 1 << 16,
        }
    }
}

impl SimOptions {
    pub fn with_seed(master_seed: u64, replica_index: u64) -> Self {
        Self { master_seed, replica_index, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.truncation_tol > 0.0 && self.truncation_tol.is_finite()) {
            return domain(format!("truncation tolerance must be positive, got {}", self.truncation_tol));
        }
        if let Some(s) = self.past_horizon_override {
            if s > MAX_HORIZON {
                return domain(format!("past horizon {s} is too large"));
            }
        }
        Ok(())
    }
}

/// How the sources `s ≤ 0` were treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PastMethod {
    Dense {
        depth: u64,
    },
    Sparse {
        depth: u64,
        dense_depth: u64,
    },
    GaussianAggregate {
        dense_depth: u64,
        exact: bool,
    },
    /// No sources at all: the whole path is drawn from its exact stationary
    /// Gaussian law by circulant embedding (see [`CirculantSampler`]).
    Circulant,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrawlPath {
    /// `X_1, …, X_n`.
    pub values: Vec<f64>,
    /// `Σ_{j ≤ S} μ(a_j)`: the mean of `X_1` under the truncation actually used.
    pub theoretical_mean: f64,
    /// `S`, or `None` when no past source was dropped.
    pub past_horizon_used: Option<u64>,
    /// Upper bound on `Σ_{j > S} |μ(a_j)|`.
    pub truncation_mean_bound: f64,
    pub past_method: PastMethod,
    /// Set when the law of the path is only approximately that of the trawl process.
    pub approximate: bool,
    /// Euler step of the diffusion seed, when one was used.
    pub grid_step: Option<f64>,
}

/// Per-source sums `Z_{s,n} = Σ_{k=1∨s}^n γ_s(a_{k−s})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    /// Dense sources appear whether or not they contribute; sparse past sources
    /// appear only when active.
    pub terms: BTreeMap<i64, f64>,
    /// Total of the aggregated remote past, when an aggregate was used.
    pub aggregate: Option<f64>,
    pub past_horizon_used: Option<u64>,
    pub past_method: PastMethod,
}

impl Decomposition {
    /// `Σ_s Z_{s,n}` (plus the aggregate), summed in source order.
    pub fn total(&self) -> f64 {
        self.terms.values().sum::<f64>() + self.aggregate.unwrap_or(0.0)
    }
}

/// One draw of `Z = Σ_j γ(a_j)` together with `Z* = #{j : a_j ≥ τ_1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZSample {
    pub z: f64,
    /// `None` when the draw has no jump at all.
    pub z_star: Option<f64>,
}

/// Receiver of source contributions.
trait Sink {
    /// `X_k += 1` for `k ∈ [lo, hi]`, from source `s`.
    fn range(&mut self, s: i64, lo: usize, hi: usize);
    fn value(&mut self, s: i64, k: usize, v: f64);
    /// `X_{k0 + i} += vals[i]`, from source `s`.
    fn run(&mut self, s: i64, k0: usize, vals: &[f64]);
    fn aggregate(&mut self, k: usize, v: f64);
    /// Direct view of `X_{k0..k0+len}` for sinks that only accumulate the path.
    fn window(&mut self, _k0: usize, _len: usize) -> Option<&mut [f64]> {
        None
    }
}

struct PathSink {
    diff: Vec<i64>,
    real: Vec<f64>,
}

impl PathSink {
    fn new(n: usize) -> Self {
        Self { diff: vec![0; n + 2], real: vec![0.0; n + 1] }
    }

    fn finish(self) -> Vec<f64> {
        let n = self.real.len() - 1;
        let mut acc = 0i64;
        (1..=n)
            .map(|k| {
                acc += self.diff[k];
                acc as f64 + self.real[k]
            })
            .collect()
    }
}

impl Sink for PathSink {
    #[inline]
    fn range(&mut self, _s: i64, lo: usize, hi: usize) {
        self.diff[lo] += 1;
        self.diff[hi + 1] -= 1;
    }

    #[inline]
    fn value(&mut self, _s: i64, k: usize, v: f64) {
        self.real[k] += v;
    }

    #[inline]
    fn run(&mut self, _s: i64, k0: usize, vals: &[f64]) {
        for (x, v) in self.real[k0..k0 + vals.len()].iter_mut().zip(vals) {
            *x += *v;
        }
    }

    #[inline]
    fn aggregate(&mut self, k: usize, v: f64) {
        self.real[k] += v;
    }

    #[inline]
    fn window(&mut self, k0: usize, len: usize) -> Option<&mut [f64]> {
        Some(&mut self.real[k0..k0 + len])
    }
}

struct DecompSink {
    terms: BTreeMap<i64, f64>,
    aggregate: Option<f64>,
}

impl Sink for DecompSink {
    fn range(&mut self, s: i64, lo: usize, hi: usize) {
        *self.terms.entry(s).or_insert(0.0) += (hi - lo + 1) as f64;
    }

    fn value(&mut self, s: i64, _k: usize, v: f64) {
        *self.terms.entry(s).or_insert(0.0) += v;
    }

    fn run(&mut self, s: i64, _k0: usize, vals: &[f64]) {
        let t = self.terms.entry(s).or_insert(0.0);
        for v in vals {
            *t += *v;
        }
    }

    fn aggregate(&mut self, _k: usize, v: f64) {
        *self.aggregate.get_or_insert(0.0) += v;
    }
}

/// Smallest `S` with `Σ_{j>S} |μ(a_j)| ≤ tol` and `Σ_{j>S} g(a_j) ≤ tol²`.
///
/// The first condition bounds the mean of the dropped contribution to each
/// `X_k`, hence also the average over `k = 1..n`; the second bounds its variance.
pub fn choose_past_horizon(seed: &SeedModel, trawl: &TrawlSequence, n: usize, tol: f64) -> Result<u64> {
    if n == 0 {
        return domain("path length must be positive");
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    if trawl.condition_report(seed).regime == Regime::Undetermined && trawl.support_len().is_none() {
        return Err(TrawlError::Regime(
            "cannot bound the neglected past of this trawl; give an explicit past horizon".into(),
        ));
    }
    let ok = |s: u64| -> Result<bool> {
        Ok(trawl.tail_mean_sum(seed, s)? <= tol && trawl.tail_variance_sum(seed, s)? <= tol * tol)
    };
    if ok(0)? {
        return Ok(0);
    }
    let mut hi = 1u64;
    while !ok(hi)? {
        if hi >= MAX_HORIZON {
            return Err(TrawlError::Unattainable(format!("no past horizon below 2^62 reaches tolerance {tol}")));
        }
        hi *= 2;
    }
    let mut lo = hi / 2; // fails
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Evaluation {
    /// Jump seed on a monotone trawl: counts by binary search on the trawl.
    JumpCounts,
    /// Brownian or geometric Brownian seed on a monotone trawl: Gaussian
    /// increments with standard deviations shared by all sources.
    BrownianKernel,
    /// Continuous seed on a monotone trawl: arguments are contiguous slices.
    SortedSlices,
    /// Non-monotone trawl: arguments sorted per source.
    Unsorted,
}

/// Precomputed simulation layout for one `(seed, trawl, n, opts)`; paths for any
/// replica can be drawn from it.
#[derive(Clone, Debug)]
pub struct SimPlan {
    seed: SeedModel,
    trawl: TrawlSequence,
    n: usize,
    master_seed: u64,
    eval: Evaluation,
    /// Past sources `s ∈ [1 − dense_depth, 0]` are simulated one by one.
    dense_depth: u64,
    /// Full depth of a sparse past.
    sparse_depth: Option<u64>,
    /// `a_0, …, a_{n−1+dense_depth}`.
    values: Vec<f64>,
    /// `values` reversed (ascending for a monotone trawl).
    ascending: Vec<f64>,
    /// Number of leading lags with `a_j ≠ 0`; later lags contribute exactly 0.
    active_lags: usize,
    /// `√(a_j − a_{j+1})`, for the Brownian kernel.
    increment_sd: Vec<f64>,
    /// Variances `Σ_{j ≥ k + dense_depth} g(a_j)` of the aggregated past, `k = 1..n`.
    aggregate_times: Option<Vec<f64>>,
    meta: PathMeta,
}

#[derive(Clone, Debug)]
struct PathMeta {
    theoretical_mean: f64,
    past_horizon_used: Option<u64>,
    truncation_mean_bound: f64,
    past_method: PastMethod,
    approximate: bool,
}

impl SimPlan {
    pub fn new(seed: &SeedModel, trawl: &TrawlSequence, n: usize, opts: &SimOptions) -> Result<Self> {
        opts.validate()?;
        seed.validate()?;
        if n == 0 {
            return domain("path length must be positive");
        }
        if !matches!(seed, SeedModel::RandomLine { .. }) && trawl.has_negative_values() {
            return domain(format!("{} seed needs a nonnegative trawl", seed.tag()));
        }
        seed.check_arg(trawl.max_value())?;
        let cond = trawl.condition_report(seed);
        if cond.variance_summable == Some(false) {
            return Err(TrawlError::Divergent("Σ g(a_j) diverges: the process is not defined".into()));
        }
        let monotone = trawl.is_monotone();
        let horizon = match opts.past_horizon_override {
            Some(s) => s,
            None => choose_past_horizon(seed, trawl, n, opts.truncation_tol)?,
        };
        let finite_support = trawl.support_len().is_some();
        let continuous_tail = |dense: u64| -> Result<Vec<f64>> {
            (1..=n as u64).map(|k| variance_tail(seed, trawl, k + dense)).collect()
        };

        let (eval, dense_depth, sparse_depth, aggregate_times, past_method) = if seed.is_jump() && monotone {
            let window = MIN_DENSE_JUMP_DEPTH.max(n as u64);
            if horizon > window {
                (
                    Evaluation::JumpCounts,
                    window,
                    Some(horizon),
                    None,
                    PastMethod::Sparse { depth: horizon, dense_depth: window },
                )
            } else {
                (Evaluation::JumpCounts, horizon, None, None, PastMethod::Dense { depth: horizon })
            }
        } else {
            let eval = match seed {
                _ if !monotone => Evaluation::Unsorted,
                SeedModel::Brownian | SeedModel::GeomBrownian => Evaluation::BrownianKernel,
                _ => Evaluation::SortedSlices,
            };
            let aggregate_ok = monotone && !finite_support && opts.past_horizon_override.is_none();
            if aggregate_ok && matches!(seed, SeedModel::Brownian) {
                let times = continuous_tail(0)?;
                (eval, 0, None, Some(times), PastMethod::GaussianAggregate { dense_depth: 0, exact: true })
            } else if horizon <= opts.max_dense_past {
                (eval, horizon, None, None, PastMethod::Dense { depth: horizon })
            } else if aggregate_ok && seed.has_min_covariance() {
                let d = opts.max_dense_past;
                let times = continuous_tail(d)?;
                (eval, d, None, Some(times), PastMethod::GaussianAggregate { dense_depth: d, exact: false })
            } else {
                return Err(TrawlError::Unattainable(format!(
                    "past horizon {horizon} exceeds the dense limit {}; raise max_dense_past or the tolerance",
                    opts.max_dense_past
                )));
            }
        };

        let max_lag = n as u64 - 1 + dense_depth;
        let values: Vec<f64> = trawl.values(max_lag + 1)?;
        let ascending: Vec<f64> = values.iter().rev().copied().collect();
        let active_lags = if monotone { values.partition_point(|&a| a > 0.0) } else { values.len() };
        let increment_sd = if eval == Evaluation::BrownianKernel {
            let mut sd: Vec<f64> = values.windows(2).map(|w| (w[0] - w[1]).sqrt()).collect();
            sd.push(0.0);
            sd
        } else {
            Vec::new()
        };

        let full_mean = theory::trawl_mean(seed, trawl, 1e-12).or_else(|e| match e {
            // no closed-form tail: sum the simulated window directly
            TrawlError::Unavailable(_) => values.iter().map(|&a| seed.mean(a)).sum(),
            e => Err(e),
        })?;
        let (theoretical_mean, past_horizon_used, truncation_mean_bound) = match past_method {
            PastMethod::GaussianAggregate { .. } | PastMethod::Circulant => (full_mean, None, 0.0),
            PastMethod::Dense { depth } | PastMethod::Sparse { depth, .. } => {
                let bound = trawl.tail_mean_sum(seed, depth).unwrap_or(f64::NAN);
                let dropped = mean_tail(seed, trawl, depth + 1).unwrap_or(0.0);
                (full_mean - dropped, Some(depth), bound)
            }
        };
        let approximate = matches!(seed, SeedModel::Diffusion { .. })
            || matches!(past_method, PastMethod::GaussianAggregate { exact: false, .. });
        Ok(Self {
            seed: seed.clone(),
            trawl: trawl.clone(),
            n,
            master_seed: opts.master_seed,
            eval,
            dense_depth,
            sparse_depth,
            values,
            ascending,
            active_lags,
            increment_sd,
            aggregate_times,
            meta: PathMeta { theoretical_mean, past_horizon_used, truncation_mean_bound, past_method, approximate },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn past_method(&self) -> PastMethod {
        self.meta.past_method
    }

    pub fn theoretical_mean(&self) -> f64 {
        self.meta.theoretical_mean
    }

    /// Trajectory for `replica` on stream lane `lane`.
    pub fn path(&self, replica: u64, lane: u32) -> TrawlPath {
        let mut sink = PathSink::new(self.n);
        let grid_step = self.run(replica, lane, &mut sink);
        TrawlPath {
            values: sink.finish(),
            theoretical_mean: self.meta.theoretical_mean,
            past_horizon_used: self.meta.past_horizon_used,
            truncation_mean_bound: self.meta.truncation_mean_bound,
            past_method: self.meta.past_method,
            approximate: self.meta.approximate,
            grid_step,
        }
    }

    /// Per-source sums for `replica`, drawn from exactly the streams used by [`Self::path`].
    pub fn decomposition(&self, replica: u64, lane: u32) -> Decomposition {
        let mut terms = BTreeMap::new();
        for s in (1 - self.dense_depth as i64)..=self.n as i64 {
            terms.insert(s, 0.0);
        }
        let mut sink = DecompSink { terms, aggregate: None };
        self.run(replica, lane, &mut sink);
        if self.aggregate_times.is_some() {
            sink.aggregate.get_or_insert(0.0);
        }
        Decomposition {
            terms: sink.terms,
            aggregate: sink.aggregate,
            past_horizon_used: self.meta.past_horizon_used,
            past_method: self.meta.past_method,
        }
    }

    fn key(&self, replica: u64, lane: u32, domain: StreamDomain, index: u64) -> StreamRng {
        StreamKey::new(self.master_seed, replica, lane, domain, index).rng()
    }

    fn run<S: Sink>(&self, replica: u64, lane: u32, sink: &mut S) -> Option<f64> {
        let n = self.n as i64;
        let max_lag = self.values.len() - 1;
        let mut scratch = vec![0.0; self.n + self.dense_depth as usize];
        let mut args: Vec<f64> = Vec::new();
        let mut order: Vec<usize> = Vec::new();
        let mut times: Vec<f64> = Vec::new();
        let mut grid_step: Option<f64> = None;

        for s in (1 - self.dense_depth as i64)..=n {
            let j_lo = (1 - s).max(0) as usize;
            let j_hi = ((n - s) as usize).min(self.active_lags.saturating_sub(1));
            if self.active_lags == 0 || j_lo > j_hi {
                continue;
            }
            let mut rng = self.key(replica, lane, StreamDomain::Source, s as u64);
            match self.eval {
                Evaluation::JumpCounts => {
                    times.clear();
                    self.seed.push_jump_times(self.values[j_lo], &mut rng, &mut times);
                    add_jump_source(&self.values, s, j_lo, j_hi, &times, sink);
                }
                Evaluation::BrownianKernel => {
                    // B(a_{j_hi}) first, then independent increments towards a_{j_lo}
                    let len = j_hi - j_lo + 1;
                    let k0 = (s + j_lo as i64) as usize;
                    let gbm = matches!(self.seed, SeedModel::GeomBrownian);
                    let mut b = self.values[j_hi].sqrt() * rng.sample::<f64, _>(StandardNormal);
                    let sds = &self.increment_sd[j_lo..j_hi];
                    if !gbm {
                        if let Some(dst) = sink.window(k0, len) {
                            // same draws as below, accumulated in place
                            dst[len - 1] += b;
                            for (o, &sd) in dst[..len - 1].iter_mut().zip(sds).rev() {
                                if sd > 0.0 {
                                    b += sd * rng.sample::<f64, _>(StandardNormal);
                                }
                                *o += b;
                            }
                            continue;
                        }
                    }
                    let out = &mut scratch[..len];
                    out[len - 1] = b;
                    for (o, &sd) in out[..len - 1].iter_mut().zip(sds).rev() {
                        if sd > 0.0 {
                            b += sd * rng.sample::<f64, _>(StandardNormal);
                        }
                        *o = b;
                    }
                    if gbm {
                        for (o, &a) in out.iter_mut().zip(&self.values[j_lo..=j_hi]) {
                            *o = (*o - 0.5 * a).exp_m1();
                        }
                    }
                    sink.run(s, k0, out);
                }
                Evaluation::SortedSlices => {
                    let start = max_lag - j_hi;
                    let len = j_hi - j_lo + 1;
                    let out = &mut scratch[..len];
                    let step = self.seed.sample_into(&self.ascending[start..start + len], &mut rng, out);
                    grid_step = merge_step(grid_step, step);
                    // ascending arguments are descending lags; flip to time order
                    out.reverse();
                    sink.run(s, (s + j_lo as i64) as usize, out);
                }
                Evaluation::Unsorted => {
                    order.clear();
                    order.extend(j_lo..=j_hi);
                    order.sort_by(|&x, &y| self.values[x].total_cmp(&self.values[y]));
                    args.clear();
                    args.extend(order.iter().map(|&j| self.values[j]));
                    let out = &mut scratch[..args.len()];
                    if self.seed.is_jump() {
                        times.clear();
                        self.seed.push_jump_times(args[args.len() - 1], &mut rng, &mut times);
                        crate::seeds::count_jumps_into(&times, &args, out);
                    } else {
                        let step = self.seed.sample_into(&args, &mut rng, out);
                        grid_step = merge_step(grid_step, step);
                    }
                    for (&j, &v) in order.iter().zip(out.iter()) {
                        sink.value(s, (s + j as i64) as usize, v);
                    }
                }
            }
        }

        if let Some(depth) = self.sparse_depth {
            self.run_sparse(replica, lane, depth, &mut times, sink);
        }

        if let Some(tv) = &self.aggregate_times {
            // A_k = W(T(k + D)) with T decreasing in k: walk from k = n upwards in time
            let mut rng = self.key(replica, lane, StreamDomain::PastAggregate, 0);
            let mut w = 0.0;
            let mut prev = 0.0;
            for k in (1..=self.n).rev() {
                let t = tv[k - 1];
                if t > prev {
                    w += (t - prev).sqrt() * rng.sample::<f64, _>(StandardNormal);
                    prev = t;
                }
                sink.aggregate(k, w);
            }
        }
        grid_step
    }

    /// Past sources with lag-at-time-one `m ∈ (dense_depth, depth]`, visited in
    /// dyadic blocks by thinning a geometric skip with the block's largest
    /// activation probability.
    fn run_sparse<S: Sink>(&self, replica: u64, lane: u32, depth: u64, times: &mut Vec<f64>, sink: &mut S) {
        let n = self.n as u64;
        let mut block = 0u32;
        let mut start = self.dense_depth + 1;
        while start <= depth {
            let end = depth.min(start.saturating_mul(2).saturating_sub(1)).max(start);
            let mut rng = self.key(replica, lane, StreamDomain::PastBlock, block as u64);
            let top = self.trawl.value(start).unwrap_or(0.0);
            let p_bar = self.seed.first_jump_cdf(top);
            let mut m = start;
            if p_bar > 0.0 {
                loop {
                    m = match skip(m, p_bar, &mut rng) {
                        Some(v) if v <= end => v,
                        _ => break,
                    };
                    let a_m = self.trawl.value(m).unwrap_or(0.0);
                    let p = self.seed.first_jump_cdf(a_m);
                    if rng.random::<f64>() * p_bar < p {
                        times.clear();
                        self.seed.push_jump_times_given_first(a_m, &mut rng, times);
                        let s = 1 - m as i64;
                        for &tau in times.iter() {
                            // lags j ≥ m with a_j ≥ τ map to k = j − m + 1
                            let c = self.trawl.count_at_least(tau).unwrap_or(m);
                            if c > m {
                                sink.range(s, 1, (c - m).min(n) as usize);
                            }
                        }
                    }
                    m += 1;
                }
            }
            if end == u64::MAX {
                break;
            }
            start = end + 1;
            block += 1;
        }
    }
}

/// First index `≥ m` of a Bernoulli(p) success sequence.
fn skip<R: Rng + ?Sized>(m: u64, p: f64, rng: &mut R) -> Option<u64> {
    if p >= 1.0 {
        return Some(m);
    }
    let u = uniform_open_closed(rng);
    let g = (u.ln() / (-p).ln_1p()).floor();
    if !(g < (u64::MAX - m) as f64) {
        return None;
    }
    Some(m + g as u64)
}

fn merge_step(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Adds the contribution of one jump-seed source on a descending trawl.
fn add_jump_source<S: Sink>(values: &[f64], s: i64, j_lo: usize, j_hi: usize, times: &[f64], sink: &mut S) {
    let window = &values[..=j_hi];
    for &tau in times {
        let c = window.partition_point(|&a| a >= tau);
        if c > j_lo {
            sink.range(s, (s + j_lo as i64) as usize, (s + c as i64 - 1) as usize);
        }
    }
}

/// `Σ_{j ≥ from} μ(a_j)`; exact because every mean function is polynomial.
fn mean_tail(seed: &SeedModel, trawl: &TrawlSequence, from: u64) -> Result<f64> {
    let e = seed.expansion(Moment::Mean, trawl.max_abs_from(from)?)?;
    let mut acc = 0.0;
    for (i, &c) in e.min_powers.iter().enumerate() {
        if c != 0.0 {
            acc += c * trawl.power_sum_tail(i as f64 + 1.0, from)?;
        }
    }
    Ok(acc)
}

/// `Σ_{j ≥ from} g(a_j)` via the seed's covariance expansion.
fn variance_tail(seed: &SeedModel, trawl: &TrawlSequence, from: u64) -> Result<f64> {
    let e = seed.expansion(Moment::Covariance, trawl.max_abs_from(from)?)?;
    let mut acc = 0.0;
    for (i, &c) in e.min_powers.iter().enumerate() {
        if c != 0.0 {
            acc += c * trawl.power_sum_tail(i as f64 + 1.0, from)?;
        }
    }
    if e.product != 0.0 {
        acc += e.product * trawl.power_sum_tail(2.0, from)?;
    }
    Ok(acc)
}

/// Exact sampler of a stationary Gaussian path from its autocovariance
/// (Davies–Harte). The autocovariance `r(0..=n)` is embedded in a circulant of
/// size `2n`; when its eigenvalues are nonnegative, which holds for every convex
/// nonincreasing `r`, paths have exactly the law `N(mean, [r(|k−l|)])`.
#[derive(Clone)]
pub struct CirculantSampler {
    n: usize,
    mean: f64,
    master_seed: u64,
    /// `√(λ_j / 2n)` for the circulant eigenvalues `λ_j`.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler").field("n", &self.n).field("mean", &self.mean).finish_non_exhaustive()
    }
}

impl CirculantSampler {
    /// `autocov` must hold `r(0), …, r(n)`.
    pub fn new(autocov: &[f64], n: usize, mean: f64, master_seed: u64) -> Result<Self> {
        if n == 0 || autocov.len() < n + 1 {
            return Err(TrawlError::Contract(format!(
                "circulant embedding of length {n} needs {} autocovariances, got {}",
                n + 1,
                autocov.len()
            )));
        }
        let m = 2 * n;
        let mut c: Vec<Complex<f64>> = (0..m).map(|j| Complex::new(autocov[j.min(m - j)], 0.0)).collect();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
        fft.process(&mut c);
        let top = c.iter().map(|z| z.re).fold(0.0f64, f64::max);
        let low = c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        // rounding can leave eigenvalues of order 1e-16·top below zero
        if low < -1e-9 * top.max(f64::MIN_POSITIVE) {
            return Err(TrawlError::Unattainable(format!(
                "circulant embedding is not nonnegative definite (smallest eigenvalue {low:e})"
            )));
        }
        let scale = c.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
        Ok(Self { n, mean, master_seed, scale, fft })
    }

    /// Sampler for the trawl process with a Brownian seed.
    pub fn brownian(seed: &SeedModel, trawl: &TrawlSequence, n: usize, opts: &SimOptions, tol: f64) -> Result<Self> {
        if !matches!(seed, SeedModel::Brownian) {
            return Err(TrawlError::Config(format!("circulant sampling needs a Brownian seed, got {}", seed.tag())));
        }
        opts.validate()?;
        let r = theory::autocovariance_sequence(seed, trawl, n as u64, tol)?;
        Self::new(&r, n, 0.0, opts.master_seed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn path(&self, replica: u64, lane: u32) -> TrawlPath {
        let mut rng = StreamKey::new(self.master_seed, replica, lane, StreamDomain::Spectral, 0).rng();
        let mut w: Vec<Complex<f64>> = self
            .scale
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut w);
        TrawlPath {
            values: w[..self.n].iter().map(|z| self.mean + z.re).collect(),
            theoretical_mean: self.mean,
            past_horizon_used: None,
            truncation_mean_bound: 0.0,
            past_method: PastMethod::Circulant,
            approximate: false,
            grid_step: None,
        }
    }
}

/// One trajectory `X_1..X_n`.
pub fn simulate_path(seed: &SeedModel, trawl: &TrawlSequence, n: usize, opts: &SimOptions) -> Result<TrawlPath> {
    Ok(SimPlan::new(seed, trawl, n, opts)?.path(opts.replica_index, opts.stream_lane))
}

/// Per-source sums driven by the same streams as [`simulate_path`].
pub fn simulate_decomposition(
    seed: &SeedModel,
    trawl: &TrawlSequence,
    n: usize,
    opts: &SimOptions,
) -> Result<Decomposition> {
    Ok(SimPlan::new(seed, trawl, n, opts)?.decomposition(opts.replica_index, opts.stream_lane))
}

/// Exact draw of `Z = Σ_j γ(a_j)` from `rng`.
///
/// For a jump seed on a monotone trawl, `Z = Σ_i #{j : a_j ≥ τ_i}` over the jump
/// times `τ_i ≤ a_0`. A trawl with finite support is summed directly.
pub fn sample_z_with<R: Rng + ?Sized>(seed: &SeedModel, trawl: &TrawlSequence, rng: &mut R) -> Result<ZSample> {
    seed.validate()?;
    seed.check_arg(trawl.max_value())?;
    if seed.is_jump() && trawl.is_monotone() {
        let a0 = trawl.value(0)?;
        let mut times = Vec::new();
        if a0 > 0.0 {
            seed.push_jump_times(a0, rng, &mut times);
        }
        let mut z = 0.0;
        for &tau in &times {
            z += trawl.count_at_least(tau)? as f64;
        }
        let z_star = match times.first() {
            Some(&t) => Some(trawl.count_at_least(t)? as f64),
            None => None,
        };
        return Ok(ZSample { z, z_star });
    }
    let Some(len) = trawl.support_len() else {
        return Err(TrawlError::Unsupported(
            "exact draws of Z need a jump seed on a monotone trawl or a finite trawl".into(),
        ));
    };
    let mut args = trawl.values(len)?;
    args.sort_by(f64::total_cmp);
    let path = seed.sample_path(&args, rng)?;
    Ok(ZSample { z: path.values.iter().sum(), z_star: None })
}

/// One draw of `Z` from the stream of `(opts.master_seed, opts.replica_index)`.
pub fn sample_z(seed: &SeedModel, trawl: &TrawlSequence, opts: &SimOptions) -> Result<f64> {
    let mut rng =
        StreamKey::new(opts.master_seed, opts.replica_index, opts.stream_lane, StreamDomain::AggregateDraw, 0).rng();
    Ok(sample_z_with(seed, trawl, &mut rng)?.z)
}

/// Jump-seed trajectory from explicit per-source jump times on a monotone trawl
/// `a_0 ≥ a_1 ≥ …` (zero past the listed values): the binary-search evaluation
/// used by the simulator.
pub fn jump_fast_path(trawl_values: &[f64], n: usize, sources: &[(i64, Vec<f64>)]) -> Result<Vec<f64>> {
    if trawl_values.windows(2).any(|w| w[1] > w[0]) || trawl_values.iter().any(|a| *a < 0.0) {
        return Err(TrawlError::Unsupported("the jump fast path needs a nonincreasing nonnegative trawl".into()));
    }
    let deepest = sources.iter().map(|(s, _)| *s).min().unwrap_or(1).min(1);
    let max_lag = (n as i64 - deepest) as usize;
    let mut values = trawl_values.to_vec();
    values.resize(values.len().max(max_lag + 1), 0.0);
    let mut sink = PathSink::new(n);
    for (s, times) in sources {
        if *s > n as i64 {
            continue;
        }
        let mut times = times.clone();
        times.sort_by(f64::total_cmp);
        let j_lo = (1 - s).max(0) as usize;
        let j_hi = (n as i64 - s) as usize;
        add_jump_source(&values, *s, j_lo, j_hi, &times, &mut sink);
    }
    Ok(sink.finish())
}

/// `X_k = Σ_j γ_{k−j}(a_j)` evaluated term by term with `γ_s(u) = #{τ ∈ times_s : τ ≤ u}`.
pub fn jump_direct_evaluation(trawl_values: &[f64], n: usize, sources: &[(i64, Vec<f64>)]) -> Vec<f64> {
    (1..=n as i64)
        .map(|k| {
            let mut x = 0.0;
            for (j, &a) in trawl_values.iter().enumerate() {
                let s = k - j as i64;
                for (src, times) in sources {
                    if *src == s {
                        x += times.iter().filter(|&&t| t <= a).count() as f64;
                    }
                }
            }
            x
        })
        .collect()
}
