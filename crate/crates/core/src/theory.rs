//! Analytic moments of trawl processes and descriptors of their scaling limits.
//!
//! Infinite series over the trawl are split into a directly summed head and a
//! tail that is evaluated through the seed's moment expansion and closed-form
//! power sums of the trawl (Hurwitz zeta for power laws, geometric series
//! otherwise). Each tail carries an explicit error bound, and the head grows
//! until that bound is below the requested tolerance.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{domain, Result, TrawlError};
use crate::scalar::{Field, Scalar};
use crate::seeds::{Moment, MomentExpansion, SeedModel};
use crate::special::{gamma, hurwitz_zeta};
use crate::trawl::{Regime, TailRule, TrawlKind, TrawlSequence};

const MIN_HEAD: u64 = 256;
const MAX_HEAD: u64 = 1 << 26;

/// Analytic summary of a (seed, trawl) pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryReport<T = f64> {
    pub mean: T,
    /// `Cov(X_0, X_k)` for `k = 0..=max_lag`.
    pub autocov: Vec<T>,
    pub sigma2: Option<T>,
    pub c1: Option<T>,
    pub c2: Option<T>,
    #[serde(rename = "H")]
    pub h: Option<T>,
    pub regime: Regime,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// `c1 = c0/(α−1)`, `c2 = 2c1/((2−α)(3−α))`, `H = (3−α)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticConstants<F> {
    pub c1: F,
    pub c2: F,
    pub h: F,
    /// Set when α is within 0.05 of an endpoint, where `c1` or `c2` blow up.
    pub near_boundary: bool,
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub(crate) fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }

    pub(crate) fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> T {
        self.sum + self.comp
    }
}

fn check_tol<T: Scalar>(tol: T) -> Result<()> {
    if !(tol > T::zero() && tol.is_finite()) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    Ok(())
}

/// Number of leading values that must be summed directly before the tail is
/// described by a closed form.
fn head_floor<T: Scalar>(trawl: &TrawlSequence<T>) -> Result<u64> {
    match trawl.kind() {
        TrawlKind::Custom { tail: None, .. } => {
            Err(TrawlError::Unavailable("custom trawl has no tail rule; its series cannot be summed".into()))
        }
        TrawlKind::Custom { values, .. } => Ok(values.len() as u64),
        _ => Ok(0),
    }
}

fn check_seed_domain<T: Scalar>(seed: &SeedModel<T>, trawl: &TrawlSequence<T>) -> Result<()> {
    seed.validate()?;
    if !matches!(seed, SeedModel::RandomLine { .. }) && trawl.has_negative_values() {
        return domain(format!("{} seed needs a nonnegative trawl", seed.tag()));
    }
    seed.check_arg(trawl.max_value())
}

/// `Σ_m c_m P_m(from)` with error `rel · P_1(from)`.
fn expansion_tail<T: Scalar>(trawl: &TrawlSequence<T>, e: &MomentExpansion<T>, from: u64) -> Result<(T, T)> {
    let mut acc = T::zero();
    for (i, &c) in e.min_powers.iter().enumerate() {
        if c != T::zero() {
            acc += c * trawl.power_sum_tail(T::from_index(i as u64 + 1), from)?;
        }
    }
    let err =
        if e.rel_remainder > T::zero() { e.rel_remainder * trawl.power_sum_tail(T::one(), from)? } else { T::zero() };
    Ok((acc, err))
}

/// Bracket for `Σ_{j ≥ from} a_j a_{j+k}` on the monotone tail: midpoint and half-width.
fn cross_tail<T: Scalar>(trawl: &TrawlSequence<T>, from: u64, k: u64) -> Result<(T, T)> {
    let two = T::lit(2.0);
    match trawl.kind() {
        TrawlKind::Geometric { a } => {
            let a = *a;
            Ok((a.powf(T::from_index(k)) * a.powf(T::from_index(2 * from)) / (T::one() - a * a), T::zero()))
        }
        _ => {
            let lo = trawl.power_sum_tail(two, from + k)?;
            let hi = (trawl.power_sum_tail(two, from)? * lo).sqrt();
            Ok(((lo + hi) / two, (hi - lo) / two))
        }
    }
}

/// `E X_k = Σ_j μ(a_j)`.
pub fn trawl_mean<T: Scalar>(seed: &SeedModel<T>, trawl: &TrawlSequence<T>, tol: T) -> Result<T> {
    check_tol(tol)?;
    check_seed_domain(seed, trawl)?;
    let floor = head_floor(trawl)?;
    let mut head_len = floor.max(MIN_HEAD);
    loop {
        let e = seed.expansion(Moment::Mean, trawl.max_abs_from(head_len)?)?;
        let (tail, err) = expansion_tail(trawl, &e, head_len)?;
        if err <= tol / T::lit(2.0) || head_len >= MAX_HEAD {
            if err > tol {
                return Err(TrawlError::Unattainable(format!("mean tail error {err} exceeds tolerance {tol}")));
            }
            let mut s = CompensatedSum::new();
            for j in (0..head_len).rev() {
                s.add(seed.mean(trawl.value(j)?)?);
            }
            return Ok(s.value() + tail);
        }
        head_len *= 2;
    }
}

/// `Cov(X_0, X_k) = Σ_j ρ(a_j, a_{j+k})`.
pub fn trawl_autocovariance<T: Scalar>(seed: &SeedModel<T>, trawl: &TrawlSequence<T>, k: u64, tol: T) -> Result<T> {
    check_tol(tol)?;
    check_seed_domain(seed, trawl)?;
    autocov_checked(seed, trawl, k, tol, head_floor(trawl)?)
}

fn autocov_checked<T: Scalar>(seed: &SeedModel<T>, trawl: &TrawlSequence<T>, k: u64, tol: T, floor: u64) -> Result<T> {
    let mut head_len = floor.max(MIN_HEAD);
    loop {
        let (tail, err) = autocov_tail(seed, trawl, k, head_len)?;
        if err <= tol / T::lit(2.0) || head_len >= MAX_HEAD {
            if err > tol {
                return Err(TrawlError::Unattainable(format!(
                    "autocovariance tail error {err} exceeds tolerance {tol}"
                )));
            }
            let mut s = CompensatedSum::new();
            for j in (0..head_len).rev() {
                s.add(seed.covariance(trawl.value(j)?, trawl.value(j + k)?)?);
            }
            return Ok(s.value() + tail);
        }
        head_len *= 2;
    }
}

fn autocov_tail<T: Scalar>(seed: &SeedModel<T>, trawl: &TrawlSequence<T>, k: u64, from: u64) -> Result<(T, T)> {
    let e = seed.expansion(Moment::Covariance, trawl.max_abs_from(from)?)?;
    // on the monotone tail u ∧ v = a_{j+k}
    let (mut val, mut err) = expansion_tail(trawl, &e, from + k)?;
    if e.product != T::zero() {
        let (mid, half) = cross_tail(trawl, from, k)?;
        val += e.product * mid;
        err += e.product.abs() * half;
    }
    Ok((val, err))
}

/// `Cov(X_0, X_k)` for `k = 0..=max_lag`, each within `tol`.
pub fn autocovariance_sequence<T: Scalar>(
    seed: &SeedModel<T>,
    trawl: &TrawlSequence<T>,
    max_lag: u64,
    tol: T,
) -> Result<Vec<T>> {
    check_tol(tol)?;
    check_seed_domain(seed, trawl)?;
    let floor = head_floor(trawl)?;
    if let Some(len) = trawl.support_len() {
        // finite support: Cov(X_0, X_k) = 0 once k ≥ len
        return (0..=max_lag)
            .map(|k| if k >= len { Ok(T::zero()) } else { autocov_checked(seed, trawl, k, tol, floor) })
            .collect();
    }
    (0..=max_lag).map(|k| autocov_checked(seed, trawl, k, tol, floor)).collect()
}

/// `Σ_{i ≥ from} (2i + 1) a_i^m` on the closed-form tail.
fn weighted_power_tail<T: Scalar>(trawl: &TrawlSequence<T>, m: T, from: u64) -> Result<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let power = |c0: T, alpha: T, from: u64| -> Result<T> {
        let s = m * alpha;
        if !(s - one > one) {
            return Err(TrawlError::Divergent(format!("Σ j a_j^{m} diverges for alpha = {alpha}")));
        }
        // (2i + 1)(i + 1)^{-s} = 2 (i + 1)^{1-s} − (i + 1)^{-s}
        let q = T::from_index(from) + one;
        Ok(c0.powf(m) * (two * hurwitz_zeta(s - one, q) - hurwitz_zeta(s, q)))
    };
    match trawl.kind() {
        TrawlKind::Geometric { a } => {
            let x = a.powf(m);
            let j = T::from_index(from);
            Ok(x.powf(j) * ((two * j + one) / (one - x) + two * x / ((one - x) * (one - x))))
        }
        TrawlKind::PowerLaw { c0, alpha } => power(*c0, *alpha, from),
        TrawlKind::Custom { values, tail } => {
            let len = values.len() as u64;
            let mut acc = T::zero();
            for i in from..len {
                acc += (two * T::from_index(i) + one) * values[i as usize].abs().powf(m);
            }
            match tail {
                Some(TailRule::Zero) => Ok(acc),
                Some(TailRule::PowerLaw { c0, alpha }) => Ok(acc + power(*c0, *alpha, from.max(len))?),
                None => Err(TrawlError::Unavailable("custom trawl has no tail rule".into())),
            }
        }
    }
}

/// Signed `Σ_j a_j`.
fn trawl_sum<T: Scalar>(trawl: &TrawlSequence<T>) -> Result<T> {
    match trawl.kind() {
        TrawlKind::Custom { values, tail } => {
            let head = values.iter().fold(T::zero(), |s, v| s + *v);
            match tail {
                Some(TailRule::Zero) => Ok(head),
                Some(TailRule::PowerLaw { .. }) => Ok(head + trawl.power_sum_tail(T::one(), values.len() as u64)?),
                None => Err(TrawlError::Unavailable("custom trawl has no tail rule".into())),
            }
        }
        _ => trawl.power_sum_tail(T::one(), 0),
    }
}

/// `σ² = Σ_{k ∈ ℤ} Cov(X_0, X_k)` in the short-memory regime.
///
/// For a monotone trawl and `ρ(u, v) = f(u ∧ v) + q·uv` the double series
/// collapses to `Σ_i (2i + 1) f(a_i) + q (Σ_i a_i)²`.
pub fn sigma_squared<T: Scalar>(seed: &SeedModel<T>, trawl: &TrawlSequence<T>, tol: T) -> Result<T> {
    check_tol(tol)?;
    check_seed_domain(seed, trawl)?;
    let regime = trawl.condition_report(seed).regime;
    if regime != Regime::ShortMemory {
        return Err(TrawlError::Regime(format!(
            "σ² needs summable autocovariances, but the regime is {}",
            regime.as_str()
        )));
    }
    let floor = head_floor(trawl)?;
    if !trawl.is_monotone() {
        let Some(len) = trawl.support_len() else {
            return Err(TrawlError::Unsupported("σ² for a non-monotone trawl needs finite support".into()));
        };
        let r = autocovariance_sequence(seed, trawl, len, tol / T::from_index(2 * len + 1))?;
        let mut s = CompensatedSum::new();
        s.add(r[0]);
        for v in &r[1..] {
            s.add(*v + *v);
        }
        return Ok(s.value());
    }
    let sum_a = trawl_sum(trawl)?;
    let two = T::lit(2.0);
    let mut head_len = floor.max(MIN_HEAD);
    loop {
        let mut e = seed.expansion(Moment::Covariance, trawl.max_abs_from(head_len)?)?;
        let q = e.product;
        e.product = T::zero();
        let mut tail = T::zero();
        for (i, &c) in e.min_powers.iter().enumerate() {
            if c != T::zero() {
                tail += c * weighted_power_tail(trawl, T::from_index(i as u64 + 1), head_len)?;
            }
        }
        let err = if e.rel_remainder > T::zero() {
            e.rel_remainder * weighted_power_tail(trawl, T::one(), head_len)?
        } else {
            T::zero()
        };
        if err <= tol / two || head_len >= MAX_HEAD {
            if err > tol {
                return Err(TrawlError::Unattainable(format!("σ² tail error {err} exceeds tolerance {tol}")));
            }
            let mut s = CompensatedSum::new();
            for i in (0..head_len).rev() {
                let a = trawl.value(i)?;
                let f = seed.variance(a)? - q * a * a;
                s.add((two * T::from_index(i) + T::one()) * f);
            }
            return Ok(s.value() + tail + q * sum_a * sum_a);
        }
        head_len *= 2;
    }
}

fn field_int<F: Field>(n: u32) -> F {
    (0..n).fold(F::zero(), |acc, _| acc + F::one())
}

/// Long-memory constants of a power-law trawl, exact in any field.
pub fn asymptotic_constants<F: Field>(c0: F, alpha: F) -> Result<AsymptoticConstants<F>> {
    let one = F::one();
    let two = field_int::<F>(2);
    let three = field_int::<F>(3);
    if !(alpha > one && alpha < two) {
        return domain(format!("alpha must lie in (1, 2), got {alpha:?}"));
    }
    if !(c0 > F::zero()) {
        return domain(format!("c0 must be positive, got {c0:?}"));
    }
    let c1 = c0 / (alpha.clone() - one.clone());
    let c2 = two.clone() * c1.clone() / ((two.clone() - alpha.clone()) * (three.clone() - alpha.clone()));
    let h = (three - alpha.clone()) / two.clone();
    let margin = one.clone() / field_int::<F>(20);
    let near_boundary = alpha.clone() - one < margin || two - alpha < margin;
    Ok(AsymptoticConstants { c1, c2, h, near_boundary })
}

/// `Cov(B_H(s), B_H(t)) = ½(s^{2H} + t^{2H} − |t − s|^{2H})`.
pub fn fbm_covariance<T: Scalar>(h: T, s: T, t: T) -> Result<T> {
    if !(h > T::zero() && h < T::one()) {
        return domain(format!("Hurst index must lie in (0, 1), got {h}"));
    }
    if !(s >= T::zero() && t >= T::zero()) {
        return domain(format!("fbm times must be nonnegative, got ({s}, {t})"));
    }
    let e = h + h;
    Ok((s.powf(e) + t.powf(e) - (t - s).abs().powf(e)) / T::lit(2.0))
}

/// Positive constant `κ` with `log |φ_t(z)| = −κ t |z|^α` for the stable limit.
pub fn stable_log_modulus_coefficient<T: Scalar>(alpha: T, c0: T) -> Result<T> {
    let (re, _) = stable_exponent_parts(alpha, c0)?;
    Ok(re)
}

/// Real and imaginary-sign coefficients of the stable exponent:
/// `log φ_t(z) = −t |z|^α (re − i sgn(z) im)`.
fn stable_exponent_parts<T: Scalar>(alpha: T, c0: T) -> Result<(T, T)> {
    if !(alpha > T::one() && alpha < T::lit(2.0)) {
        return domain(format!("alpha must lie in (1, 2), got {alpha}"));
    }
    if !(c0 > T::zero()) {
        return domain(format!("c0 must be positive, got {c0}"));
    }
    let k = c0 * gamma(T::lit(2.0) - alpha) / (T::one() - alpha);
    let half_angle = T::PI() * alpha / T::lit(2.0);
    Ok((k * half_angle.cos(), k * half_angle.sin()))
}

/// Characteristic function at `z` of the α-stable limit process at time `t`.
pub fn stable_charfn<T: Scalar>(alpha: T, c0: T, t: T, z: T) -> Result<Complex<T>> {
    if !(t >= T::zero()) {
        return domain(format!("time must be nonnegative, got {t}"));
    }
    let (re, im) = stable_exponent_parts(alpha, c0)?;
    if z == T::zero() {
        return Ok(Complex::new(T::one(), T::zero()));
    }
    let scale = t * z.abs().powf(alpha);
    let sgn = z.signum();
    Ok(Complex::new(-scale * re, scale * sgn * im).exp())
}

/// Leading coefficient `θ` in `g(u) = θ u (1 + o(1))`.
pub fn small_argument_slope<T: Scalar>(seed: &SeedModel<T>) -> Result<T> {
    let e = seed.expansion(Moment::Covariance, T::lit(1e-3))?;
    Ok(e.min_powers.first().copied().unwrap_or(T::zero()))
}

/// `Var(S_n) = n r(0) + 2 Σ_{k=1}^{n-1} (n − k) r(k)` from an autocovariance sequence.
pub fn partial_sum_variance_from_autocov<T: Scalar>(autocov: &[T], n: usize) -> Result<T> {
    if n == 0 || autocov.len() < n {
        return Err(TrawlError::Contract(format!(
            "partial-sum variance of length {n} needs {n} autocovariances, got {}",
            autocov.len()
        )));
    }
    let mut s = CompensatedSum::new();
    s.add(T::from_index(n as u64) * autocov[0]);
    for (k, r) in autocov.iter().enumerate().take(n).skip(1) {
        s.add(T::lit(2.0) * T::from_index((n - k) as u64) * *r);
    }
    Ok(s.value())
}

/// Full analytic report with autocovariances up to `max_lag`.
pub fn theory_report<T: Scalar>(
    seed: &SeedModel<T>,
    trawl: &TrawlSequence<T>,
    max_lag: u64,
    tol: T,
) -> Result<TheoryReport<T>> {
    let cond = trawl.condition_report(seed);
    if cond.variance_summable == Some(false) {
        return Err(TrawlError::Divergent("Σ g(a_j) diverges: the process is not defined".into()));
    }
    let mean = trawl_mean(seed, trawl, tol)?;
    let autocov = autocovariance_sequence(seed, trawl, max_lag, tol)?;
    let mut warnings = cond.notes.clone();
    let sigma2 = match cond.regime {
        Regime::ShortMemory => Some(sigma_squared(seed, trawl, tol)?),
        _ => None,
    };
    let (mut c1, mut c2, mut h) = (None, None, None);
    if cond.regime == Regime::LongMemory {
        if let Some((c0, alpha)) = trawl.power_tail_params() {
            let k = asymptotic_constants(c0, alpha)?;
            let theta = small_argument_slope(seed)?;
            if k.near_boundary {
                warnings.push(format!("alpha = {alpha} is close to the boundary of (1, 2); c1/c2 are ill-conditioned"));
            }
            if theta != T::one() {
                warnings.push(format!("seed variance behaves like {theta}·u near 0; c1 and c2 include this factor"));
            }
            c1 = Some(theta * k.c1);
            c2 = Some(theta * k.c2);
            h = Some(k.h);
        }
    }
    Ok(TheoryReport { mean, autocov, sigma2, c1, c2, h, regime: cond.regime, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{MixingLaw, Volatility};
    use approx::assert_relative_eq;

    const ZETA_3_2: f64 = 2.612_375_348_685_488;

    fn pl() -> TrawlSequence {
        TrawlSequence::power_law(1.0, 1.5).unwrap()
    }

    fn geo() -> TrawlSequence {
        TrawlSequence::geometric(0.5).unwrap()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(trawl_mean(&SeedModel::Brownian, &pl(), 1e-9).unwrap(), 0.0);
        assert_relative_eq!(trawl_mean(&SeedModel::Poisson, &geo(), 1e-12).unwrap(), 2.0, max_relative = 1e-13);
        assert_relative_eq!(trawl_mean(&SeedModel::Poisson, &pl(), 1e-9).unwrap(), ZETA_3_2, max_relative = 1e-12);
    }

    #[test]
    fn autocov_examples() {
        assert_relative_eq!(
            trawl_autocovariance(&SeedModel::Brownian, &geo(), 2, 1e-12).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        let zero = TrawlSequence::zero();
        assert_eq!(trawl_autocovariance(&SeedModel::Poisson, &zero, 3, 1e-9).unwrap(), 0.0);
        assert_relative_eq!(
            trawl_autocovariance(&SeedModel::Poisson, &pl(), 0, 1e-9).unwrap(),
            ZETA_3_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn ar1_covariances() {
        for k in 0..10u64 {
            let r = trawl_autocovariance(&SeedModel::Brownian, &geo(), k, 1e-13).unwrap();
            assert_relative_eq!(r, 2.0 * 0.5f64.powi(k as i32), max_relative = 1e-12);
        }
    }

    #[test]
    fn sigma2_examples() {
        assert_relative_eq!(sigma_squared(&SeedModel::Brownian, &geo(), 1e-12).unwrap(), 6.0, max_relative = 1e-12);
        assert_relative_eq!(sigma_squared(&SeedModel::Poisson, &geo(), 1e-12).unwrap(), 6.0, max_relative = 1e-12);
        assert_eq!(sigma_squared(&SeedModel::Poisson, &TrawlSequence::zero(), 1e-9).unwrap(), 0.0);
        assert!(matches!(sigma_squared(&SeedModel::Poisson, &pl(), 1e-9), Err(TrawlError::Regime(_))));
    }

    #[test]
    fn sigma2_matches_direct_lag_sum() {
        let seeds = [
            SeedModel::Bernoulli,
            SeedModel::GeomBrownian,
            SeedModel::mixed_poisson(MixingLaw::exponential(2.0).unwrap()).unwrap(),
            SeedModel::random_line(1.5).unwrap(),
        ];
        let t = TrawlSequence::geometric(0.7).unwrap();
        for s in &seeds {
            let r = autocovariance_sequence(s, &t, 200, 1e-14).unwrap();
            let direct = r[0] + 2.0 * r[1..].iter().sum::<f64>();
            assert_relative_eq!(sigma_squared(s, &t, 1e-12).unwrap(), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn random_line_power_law_sigma2() {
        // product kernel: σ² = σ_ξ² (Σ a_j)²
        let s = SeedModel::random_line(2.0).unwrap();
        assert_relative_eq!(sigma_squared(&s, &pl(), 1e-9).unwrap(), 2.0 * ZETA_3_2 * ZETA_3_2, max_relative = 1e-12);
    }

    #[test]
    fn non_monotone_custom_sigma2() {
        let t = TrawlSequence::custom(vec![0.2, 0.6, 0.1], Some(TailRule::Zero)).unwrap();
        let s = SeedModel::Poisson;
        let r: Vec<f64> = (0..3).map(|k| trawl_autocovariance(&s, &t, k, 1e-12).unwrap()).collect();
        // Cov(X_0, X_k) = Σ_j a_j ∧ a_{j+k}
        assert_relative_eq!(r[0], 0.9, max_relative = 1e-14);
        assert_relative_eq!(r[1], 0.2 + 0.1, max_relative = 1e-14);
        assert_relative_eq!(r[2], 0.1, max_relative = 1e-14);
        assert_relative_eq!(sigma_squared(&s, &t, 1e-12).unwrap(), 0.9 + 2.0 * 0.4, max_relative = 1e-13);
    }

    #[test]
    fn constants_examples() {
        let k = asymptotic_constants(1.0, 1.5).unwrap();
        assert_relative_eq!(k.c1, 2.0, max_relative = 1e-15);
        assert_relative_eq!(k.c2, 16.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(k.h, 0.75, max_relative = 1e-15);
        let k2 = asymptotic_constants(2.0, 1.5).unwrap();
        assert_relative_eq!(k2.c1, 4.0, max_relative = 1e-15);
        assert_relative_eq!(k2.c2, 32.0 / 3.0, max_relative = 1e-15);
        let edge = asymptotic_constants(1.0, 1.999).unwrap();
        assert!(edge.near_boundary && edge.c2 > 1000.0);
        assert!(asymptotic_constants(1.0, 2.5).is_err());
    }

    #[test]
    fn fbm_examples() {
        assert_relative_eq!(fbm_covariance(0.7, 1.3, 1.3).unwrap(), 1.3f64.powf(1.4), max_relative = 1e-14);
        assert_relative_eq!(fbm_covariance(0.5, 0.3, 0.8).unwrap(), 0.3, max_relative = 1e-14);
        assert_relative_eq!(fbm_covariance(0.75, 1.0, 2.0).unwrap(), 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn charfn_basics() {
        let one = stable_charfn(1.5, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(one, Complex::new(1.0, 0.0));
        for &z in &[0.1, 0.25, 0.5, 1.0, 2.0, 5.0] {
            let p = stable_charfn(1.5, 1.0, 1.0, z).unwrap();
            let m = stable_charfn(1.5, 1.0, 1.0, -z).unwrap();
            assert_relative_eq!(p.re, m.re, max_relative = 1e-15);
            assert_relative_eq!(p.im, -m.im, max_relative = 1e-15);
            assert!(p.norm() <= 1.0);
        }
        assert!(stable_charfn(2.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn charfn_value_at_one() {
        // κ = c0 Γ(1/2)/(−1/2) · cos(3π/4) = √(2π), imaginary coefficient −√(2π)
        let k = (2.0 * std::f64::consts::PI).sqrt();
        let p = stable_charfn(1.5, 1.0, 1.0, 1.0).unwrap();
        let expected = Complex::new(-k, -k).exp();
        assert_relative_eq!(p.re, expected.re, max_relative = 1e-13);
        assert_relative_eq!(p.im, expected.im, max_relative = 1e-13);
    }

    #[test]
    fn log_modulus_coefficient_positive() {
        for i in 1..100 {
            let alpha = 1.0 + i as f64 / 100.0;
            assert!(stable_log_modulus_coefficient(alpha, 1.0).unwrap() > 0.0, "{alpha}");
        }
    }

    #[test]
    fn long_memory_covariance_ratio() {
        let r = autocovariance_sequence(&SeedModel::Poisson, &pl(), 2000, 1e-10).unwrap();
        for k in 200..=2000usize {
            let v = (k as f64).powf(0.5) * r[k];
            assert!((1.8..=2.2).contains(&v), "{k}: {v}");
        }
    }

    #[test]
    fn variance_growth_constants() {
        let n = 10_000;
        let r = autocovariance_sequence(&SeedModel::Poisson, &pl(), n as u64, 1e-10).unwrap();
        let v = partial_sum_variance_from_autocov(&r, n).unwrap() / (n as f64).powf(1.5);
        assert!((v / (16.0 / 3.0) - 1.0).abs() < 0.1, "{v}");
        let rg = autocovariance_sequence(&SeedModel::Poisson, &geo(), n as u64, 1e-13).unwrap();
        let vg = partial_sum_variance_from_autocov(&rg, n).unwrap() / n as f64;
        assert!((vg / 6.0 - 1.0).abs() < 0.01, "{vg}");
    }

    #[test]
    fn report_fields() {
        let rep = theory_report(&SeedModel::Poisson, &pl(), 3, 1e-9).unwrap();
        assert_eq!(rep.regime, Regime::LongMemory);
        assert_relative_eq!(rep.c1.unwrap(), 2.0);
        assert_relative_eq!(rep.h.unwrap(), 0.75);
        assert!(rep.sigma2.is_none());
        let json = serde_json::to_value(&rep).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["mean", "autocov", "sigma2", "c1", "c2", "H", "regime"]);
        assert_eq!(json["regime"], "long-memory");
        let g = theory_report(&SeedModel::Brownian, &geo(), 2, 1e-12).unwrap();
        assert_relative_eq!(g.sigma2.unwrap(), 6.0, max_relative = 1e-12);
        assert!(g.c1.is_none());
    }

    #[test]
    fn mixed_poisson_constants_scale_with_mean_intensity() {
        let s = SeedModel::mixed_poisson(MixingLaw::constant(2.0).unwrap()).unwrap();
        let rep = theory_report(&s, &pl(), 0, 1e-9).unwrap();
        assert_relative_eq!(rep.c1.unwrap(), 4.0, max_relative = 1e-14);
        assert!(!rep.warnings.is_empty());
    }

    #[test]
    fn diffusion_and_gbm_autocov_converge() {
        let t = pl();
        let d = SeedModel::diffusion(Volatility::Exponential { scale: 1.0, rate: 0.3 }, None).unwrap();
        for s in [SeedModel::GeomBrownian, d] {
            let a = trawl_autocovariance(&s, &t, 5, 1e-8).unwrap();
            let b = trawl_autocovariance(&s, &t, 5, 1e-11).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn bernoulli_rejects_tall_trawl() {
        let t = TrawlSequence::power_law(1.5, 1.5).unwrap();
        assert!(matches!(trawl_mean(&SeedModel::Bernoulli, &t, 1e-6), Err(TrawlError::Domain(_))));
    }

    #[test]
    fn custom_without_tail_is_unavailable() {
        let t = TrawlSequence::custom(vec![0.5], None).unwrap();
        assert!(matches!(trawl_mean(&SeedModel::Poisson, &t, 1e-6), Err(TrawlError::Unavailable(_))));
    }

    #[test]
    fn rational_constants_are_exact() {
        use num_rational::Ratio;
        let k = asymptotic_constants(Ratio::new(1i64, 1), Ratio::new(3, 2)).unwrap();
        assert_eq!(k.c1, Ratio::new(2, 1));
        assert_eq!(k.c2, Ratio::new(16, 3));
        assert_eq!(k.h, Ratio::new(3, 4));
        assert!(!k.near_boundary);
    }

    #[test]
    fn single_precision_theory() {
        let t: TrawlSequence<f32> = TrawlSequence::geometric(0.5).unwrap();
        let s = SeedModel::<f32>::Brownian;
        assert_relative_eq!(sigma_squared(&s, &t, 1e-5).unwrap(), 6.0_f32, max_relative = 1e-5);
        let c = stable_charfn(1.5_f32, 1.0, 1.0, 0.5).unwrap();
        assert!(c.norm() <= 1.0);
    }
}
