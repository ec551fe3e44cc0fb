//! Estimators and goodness-of-fit statistics for simulated trawl paths.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::FftPlanner;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use crate::error::{Result, TrawlError};

/// A nonempty sample with optional nonnegative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(TrawlError::Contract("sample set must be nonempty".into()));
        }
        Ok(Self { values, weights: None })
    }

    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != values.len() {
            return Err(TrawlError::Contract("weights and values differ in length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(TrawlError::Contract("weights must be nonnegative with a positive total".into()));
        }
        let mut s = Self::new(values)?;
        s.weights = Some(weights);
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    fn total_weight(&self) -> f64 {
        self.weights.as_ref().map_or(self.values.len() as f64, |w| w.iter().sum())
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (`n − 1` denominator).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Sample covariance (`n − 1` denominator).
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    covariance(x, y) / (variance(x) * variance(y)).sqrt()
}

/// Empirical quantile by linear interpolation of the order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `γ̂(k) = (1/n) Σ_{i=1}^{n−k} (x_i − x̄)(x_{i+k} − x̄)`.
pub fn sample_autocovariance(path: &[f64], k: usize) -> Result<f64> {
    let n = path.len();
    if k >= n {
        return Err(TrawlError::Contract(format!("lag {k} needs a path longer than {n}")));
    }
    let m = mean(path);
    let s: f64 = path[..n - k].iter().zip(&path[k..]).map(|(a, b)| (a - m) * (b - m)).sum();
    Ok(s / n as f64)
}

/// `γ̂(0..=max_lag)` through one FFT of the centered, zero-padded path.
pub fn sample_autocovariances(path: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = path.len();
    if max_lag >= n {
        return Err(TrawlError::Contract(format!("lag {max_lag} needs a path longer than {n}")));
    }
    let m = mean(path);
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<f64>> = path.iter().map(|x| Complex::new(x - m, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    fwd.process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    Ok(buf[..=max_lag].iter().map(|c| c.re * scale).collect())
}

/// Across-replica sample variance of `S_n = Σ_{k≤n} X_k` for each `n` in the grid.
pub fn partial_sum_variance(paths: &[Vec<f64>], n_grid: &[usize]) -> Result<Vec<(usize, f64)>> {
    if paths.len() < 2 {
        return Err(TrawlError::Contract("partial-sum variance needs at least two replicas".into()));
    }
    let sums = partial_sums_at(paths, n_grid)?;
    Ok(n_grid.iter().zip(sums).map(|(&n, s)| (n, variance(&s))).collect())
}

/// `S_n` of every replica, for each `n` in the grid.
pub fn partial_sums_at(paths: &[Vec<f64>], n_grid: &[usize]) -> Result<Vec<Vec<f64>>> {
    for &n in n_grid {
        if n == 0 || paths.iter().any(|p| p.len() < n) {
            return Err(TrawlError::Contract(format!("partial sum of length {n} exceeds a path")));
        }
    }
    Ok(n_grid.iter().map(|&n| paths.iter().map(|p| p[..n].iter().sum()).collect()).collect())
}

/// Least-squares line through `(log n, log v)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope (0 for an exact fit or two points).
    pub slope_se: f64,
}

pub fn scaling_exponent_fit(pairs: &[(f64, f64)]) -> Result<ScalingFit> {
    if pairs.len() < 3 {
        return Err(TrawlError::Contract("a scaling fit needs at least three points".into()));
    }
    if pairs.iter().any(|&(n, v)| !(n > 0.0 && v > 0.0)) {
        return Err(TrawlError::Domain("scaling fit needs positive coordinates".into()));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    Ok(linear_fit(&xs, &ys))
}

/// Ordinary least squares `y = intercept + slope · x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> ScalingFit {
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let dof = xs.len() as f64 - 2.0;
    let slope_se = if dof > 0.0 { (sse / dof / sxx).sqrt() } else { 0.0 };
    ScalingFit { slope, intercept, r2, slope_se }
}

/// `φ̂(z) = Σ w_j e^{i z x_j} / Σ w_j` at each `z`.
pub fn empirical_charfn(samples: &SampleSet, z_grid: &[f64]) -> Vec<Complex<f64>> {
    let total = samples.total_weight();
    z_grid
        .iter()
        .map(|&z| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in samples.values.iter().enumerate() {
                let (s, c) = (z * x).sin_cos();
                let w = samples.weight(i);
                re += w * c;
                im += w * s;
            }
            let v = Complex::new(re / total, im / total);
            // rounding can push |φ̂| a hair above one
            if v.norm() > 1.0 {
                v / v.norm()
            } else {
                v
            }
        })
        .collect()
}

/// `sup_x |F̂(x) − F(x)|`, evaluated on both sides of every sample point.
pub fn ks_statistic(samples: &SampleSet, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.sort_by(|&a, &b| samples.values[a].total_cmp(&samples.values[b]));
    let total = samples.total_weight();
    let mut below = 0.0;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let x = samples.values[idx[i]];
        let mut w = 0.0;
        while i < idx.len() && samples.values[idx[i]] == x {
            w += samples.weight(idx[i]);
            i += 1;
        }
        let before = below / total;
        below += w;
        let after = below / total;
        d = d.max((cdf(x.next_down()) - before).abs()).max((after - cdf(x)).abs());
    }
    d.clamp(0.0, 1.0)
}

/// Asymptotic level-`p` critical value `c(p)/√m` of the one-sample KS statistic.
pub fn ks_critical_value(m: usize, level: f64) -> f64 {
    // c(p) = sqrt(−ln(p/2)/2)
    (-(level / 2.0).ln() / 2.0).sqrt() / (m as f64).sqrt()
}

/// Kolmogorov tail `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2 j² λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let t = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        s += if j % 2 == 1 { t } else { -t };
        if t < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample KS statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] == v {
            i += 1;
        }
        while j < y.len() && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// `(y, y^α · P̂(Z > y))` for each `y`, with strict inequality.
pub fn tail_ratio(samples: &SampleSet, alpha: f64, y_grid: &[f64]) -> Vec<(f64, f64)> {
    let total = samples.total_weight();
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.sort_by(|&a, &b| samples.values[a].total_cmp(&samples.values[b]));
    // suffix weights: survival above a sorted position
    let mut suffix = vec![0.0; idx.len() + 1];
    for p in (0..idx.len()).rev() {
        suffix[p] = suffix[p + 1] + samples.weight(idx[p]);
    }
    y_grid
        .iter()
        .map(|&y| {
            let pos = idx.partition_point(|&i| samples.values[i] <= y);
            (y, y.powf(alpha) * suffix[pos] / total)
        })
        .collect()
}

/// Pearson chi-square goodness of fit of integer data against a Poisson law.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Integer bins `[lo, hi]` used (the last bin is open above).
    pub bins: Vec<(u64, u64)>,
}

/// Bins are merged until every expected count is at least `min_expected`.
pub fn chi_square_poisson(samples: &[f64], mean: f64, min_expected: f64) -> Result<ChiSquareTest> {
    if samples.is_empty() {
        return Err(TrawlError::Contract("chi-square test needs data".into()));
    }
    if samples.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
        return Err(TrawlError::Domain("chi-square Poisson test needs nonnegative integers".into()));
    }
    let law = Poisson::new(mean).map_err(|e| TrawlError::Domain(format!("Poisson mean {mean}: {e}")))?;
    let m = samples.len() as f64;
    let max = samples.iter().fold(0.0f64, |a, b| a.max(*b)) as u64;
    let mut counts = vec![0u64; max as usize + 1];
    for v in samples {
        counts[*v as usize] += 1;
    }
    // greedy left-to-right merging, the last bin absorbs the upper tail
    let mut bins: Vec<(u64, u64, f64, u64)> = Vec::new();
    let mut lo = 0u64;
    let mut exp = 0.0;
    let mut obs = 0u64;
    let mut k = 0u64;
    loop {
        exp += m * law.pmf(k);
        obs += counts.get(k as usize).copied().unwrap_or(0);
        let upper_mass = m * (1.0 - law.cdf(k));
        if exp >= min_expected && upper_mass >= min_expected {
            bins.push((lo, k, exp, obs));
            lo = k + 1;
            exp = 0.0;
            obs = 0;
        } else if upper_mass < min_expected {
            let rest: u64 = counts.iter().skip(k as usize + 1).sum();
            bins.push((lo, u64::MAX, exp + upper_mass, obs + rest));
            break;
        }
        k += 1;
    }
    if bins.len() < 2 {
        return Err(TrawlError::Contract("too few bins for a chi-square test".into()));
    }
    let statistic: f64 = bins.iter().map(|&(_, _, e, o)| (o as f64 - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let p_value = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic);
    Ok(ChiSquareTest { statistic, dof, p_value, bins: bins.iter().map(|b| (b.0, b.1)).collect() })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `E γ̂(k)` for `k = 0..=max_lag` of a stationary path of length `n` whose
/// autocovariances are `r(0..n)`: the mean-correction bias of the estimator is
/// included exactly.
pub fn expected_sample_autocovariances(r: &[f64], n: usize, max_lag: usize) -> Result<Vec<f64>> {
    if r.len() < n || max_lag >= n {
        return Err(TrawlError::Contract(format!("need r(0..{n}) and a lag below {n}")));
    }
    // c_j = Σ_i r(|i − j|) = R(j−1) + R(n−j) − r(0), with R(m) = Σ_{d≤m} r(d)
    let mut big_r = vec![0.0; n];
    let mut acc = 0.0;
    for d in 0..n {
        acc += r[d];
        big_r[d] = acc;
    }
    let c: Vec<f64> = (1..=n).map(|j| big_r[j - 1] + big_r[n - j] - r[0]).collect();
    let mut prefix = vec![0.0; n + 1];
    for j in 0..n {
        prefix[j + 1] = prefix[j] + c[j];
    }
    let nf = n as f64;
    let mean_sq = prefix[n] / (nf * nf);
    Ok((0..=max_lag)
        .map(|k| {
            let cross = (prefix[n - k] + (prefix[n] - prefix[k])) / nf;
            ((n - k) as f64 * r[k] - cross + (n - k) as f64 * mean_sq) / nf
        })
        .collect())
}

/// Large-sample variance of `γ̂(k)` for a Gaussian path with autocovariances `r`:
/// `(1/n) Σ_l [r(l)² + r(l+k) r(l−k)]`, summed over the available lags.
pub fn bartlett_variance(r: &[f64], n: usize, k: usize) -> f64 {
    let at = |l: i64| -> f64 { r.get(l.unsigned_abs() as usize).copied().unwrap_or(0.0) };
    let lmax = r.len() as i64 - 1;
    let mut s = 0.0;
    for l in -lmax..=lmax {
        s += at(l) * at(l) + at(l + k as i64) * at(l - k as i64);
    }
    s / n as f64
}

/// Poisson(λ) probability mass, for reporting.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    Poisson::new(lambda).map(|p| p.pmf(k)).unwrap_or(f64::NAN)
}

/// A CDF closure of `N(0, var)`.
pub fn normal_cdf_with_variance(var: f64) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    let sd = var.sqrt();
    Arc::new(move |x| {
        if sd == 0.0 {
            if x >= 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            normal_cdf(x / sd)
        }
    })
}
