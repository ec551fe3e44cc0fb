//! Trawl sequences `{a_j}` and their tail analytics.

use serde::Serialize;

use crate::error::{domain, Result, TrawlError};
use crate::scalar::Scalar;
use crate::seeds::{Moment, SeedModel};
use crate::special::hurwitz_zeta;

/// Behaviour of a custom trawl past its listed values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailRule<T = f64> {
    /// `a_j = 0` past the listed values.
    Zero,
    /// `a_j = c0 (j + 1)^{-α}` past the listed values.
    PowerLaw { c0: T, alpha: T },
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrawlKind<T = f64> {
    /// `a_j = c0 (j + 1)^{-α}`, `1 < α < 2`.
    PowerLaw {
        c0: T,
        alpha: T,
    },
    /// `a_j = a^j`, `0 < a < 1`.
    Geometric {
        a: T,
    },
    Custom {
        values: Vec<T>,
        tail: Option<TailRule<T>>,
    },
}

/// A validated deterministic trawl sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct TrawlSequence<T = f64> {
    kind: TrawlKind<T>,
}

/// Memory regime of a (seed, trawl) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    LongMemory,
    ShortMemory,
    Undetermined,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LongMemory => "long-memory",
            Self::ShortMemory => "short-memory",
            Self::Undetermined => "undetermined",
        }
    }
}

/// Summability diagnostics; `None` means the answer cannot be decided from the
/// declared trawl.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `Σ |a_j| < ∞`
    pub abs_summable: Option<bool>,
    /// `Σ j |a_j| < ∞`
    pub weighted_summable: Option<bool>,
    /// `Σ √|a_j| < ∞`
    pub sqrt_summable: Option<bool>,
    /// `Σ |a_j|^{1/(2+δ)} < ∞` for some `δ > 0`
    pub fractional_summable: Option<bool>,
    /// `Σ g(a_j) < ∞`, checked numerically
    pub variance_summable: Option<bool>,
    pub regime: Regime,
    pub notes: Vec<String>,
}

impl<T: Scalar> TrawlSequence<T> {
    pub fn power_law(c0: T, alpha: T) -> Result<Self> {
        if !(c0 > T::zero() && c0.is_finite()) {
            return domain(format!("power-law c0 must be positive, got {c0}"));
        }
        if !(alpha > T::one() && alpha < T::lit(2.0)) {
            return domain(format!("power-law alpha must lie in (1, 2), got {alpha}"));
        }
        Ok(Self { kind: TrawlKind::PowerLaw { c0, alpha } })
    }

    pub fn geometric(a: T) -> Result<Self> {
        if !(a > T::zero() && a < T::one()) {
            return domain(format!("geometric ratio must lie in (0, 1), got {a}"));
        }
        Ok(Self { kind: TrawlKind::Geometric { a } })
    }

    pub fn custom(values: Vec<T>, tail: Option<TailRule<T>>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return domain(format!("custom trawl values must be finite, got {v}"));
        }
        if let Some(TailRule::PowerLaw { c0, alpha }) = tail {
            if !(c0 > T::zero() && c0.is_finite() && alpha > T::zero() && alpha.is_finite()) {
                return domain(format!("custom power tail needs c0 > 0 and alpha > 0, got c0={c0}, alpha={alpha}"));
            }
        }
        Ok(Self { kind: TrawlKind::Custom { values, tail } })
    }

    /// Trawl with every `a_j = 0`.
    pub fn zero() -> Self {
        Self { kind: TrawlKind::Custom { values: Vec::new(), tail: Some(TailRule::Zero) } }
    }

    pub fn kind(&self) -> &TrawlKind<T> {
        &self.kind
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            TrawlKind::PowerLaw { .. } => "power-law",
            TrawlKind::Geometric { .. } => "geometric",
            TrawlKind::Custom { .. } => "custom",
        }
    }

    /// `(c0, α)` of the power-law tail, if there is one.
    pub fn power_tail_params(&self) -> Option<(T, T)> {
        match self.kind {
            TrawlKind::PowerLaw { c0, alpha } => Some((c0, alpha)),
            TrawlKind::Custom { tail: Some(TailRule::PowerLaw { c0, alpha }), .. } => Some((c0, alpha)),
            _ => None,
        }
    }

    /// `a_j`.
    pub fn value(&self, j: u64) -> Result<T> {
        match &self.kind {
            TrawlKind::PowerLaw { c0, alpha } => Ok(power_value(*c0, *alpha, j)),
            TrawlKind::Geometric { a } => Ok(a.powf(T::from_index(j))),
            TrawlKind::Custom { values, tail } => {
                if let Some(v) = usize::try_from(j).ok().and_then(|i| values.get(i)) {
                    return Ok(*v);
                }
                match tail {
                    Some(TailRule::Zero) => Ok(T::zero()),
                    Some(TailRule::PowerLaw { c0, alpha }) => Ok(power_value(*c0, *alpha, j)),
                    None => Err(TrawlError::Domain(format!(
                        "index {j} is past the {} declared trawl values and no tail rule is set",
                        values.len()
                    ))),
                }
            }
        }
    }

    /// `a_0, …, a_{len-1}`.
    pub fn values(&self, len: u64) -> Result<Vec<T>> {
        (0..len).map(|j| self.value(j)).collect()
    }

    /// Number of values before the sequence is identically zero, if it ever is.
    pub fn support_len(&self) -> Option<u64> {
        match &self.kind {
            TrawlKind::Custom { values, tail: Some(TailRule::Zero) } => {
                Some(values.iter().rposition(|v| *v != T::zero()).map_or(0, |i| i as u64 + 1))
            }
            _ => None,
        }
    }

    /// Whether `j ↦ a_j` is nonincreasing (and, where known, tends to 0 from above).
    pub fn is_monotone(&self) -> bool {
        match &self.kind {
            TrawlKind::PowerLaw { .. } | TrawlKind::Geometric { .. } => true,
            TrawlKind::Custom { values, tail } => {
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return false;
                }
                let last = values.last().copied();
                match tail {
                    Some(TailRule::Zero) => last.is_none_or(|v| v >= T::zero()),
                    Some(TailRule::PowerLaw { c0, alpha }) => {
                        last.is_none_or(|v| v >= power_value(*c0, *alpha, values.len() as u64))
                    }
                    None => last.is_none_or(|v| v >= T::zero()),
                }
            }
        }
    }

    pub fn has_negative_values(&self) -> bool {
        match &self.kind {
            TrawlKind::Custom { values, .. } => values.iter().any(|v| *v < T::zero()),
            _ => false,
        }
    }

    /// `sup_j a_j`, which for a monotone trawl is `a_0`.
    pub fn max_value(&self) -> T {
        match &self.kind {
            TrawlKind::PowerLaw { c0, .. } => *c0,
            TrawlKind::Geometric { .. } => T::one(),
            TrawlKind::Custom { values, tail } => {
                let head = values.iter().copied().fold(T::zero(), T::max);
                match tail {
                    Some(TailRule::PowerLaw { c0, alpha }) => head.max(power_value(*c0, *alpha, values.len() as u64)),
                    _ => head,
                }
            }
        }
    }

    /// `sup_{j ≥ from} |a_j|`.
    pub fn max_abs_from(&self, from: u64) -> Result<T> {
        match &self.kind {
            TrawlKind::PowerLaw { c0, alpha } => Ok(power_value(*c0, *alpha, from)),
            TrawlKind::Geometric { a } => Ok(a.powf(T::from_index(from))),
            TrawlKind::Custom { values, tail } => {
                let start = usize::try_from(from).unwrap_or(usize::MAX).min(values.len());
                let head = values[start..].iter().fold(T::zero(), |m, v| m.max(v.abs()));
                match tail {
                    Some(TailRule::Zero) => Ok(head),
                    Some(TailRule::PowerLaw { c0, alpha }) => {
                        Ok(head.max(power_value(*c0, *alpha, from.max(values.len() as u64))))
                    }
                    None => Err(TrawlError::Unavailable("custom trawl has no tail rule".into())),
                }
            }
        }
    }

    /// `Σ_{j ≥ from} |a_j|^m`.
    pub fn power_sum_tail(&self, m: T, from: u64) -> Result<T> {
        match &self.kind {
            TrawlKind::PowerLaw { c0, alpha } => power_tail(*c0, *alpha, m, from),
            TrawlKind::Geometric { a } => {
                let am = a.powf(m);
                Ok(am.powf(T::from_index(from)) / (T::one() - am))
            }
            TrawlKind::Custom { values, tail } => {
                let len = values.len() as u64;
                let start = usize::try_from(from).unwrap_or(usize::MAX).min(values.len());
                let head = values[start..].iter().fold(T::zero(), |s, v| s + v.abs().powf(m));
                match tail {
                    Some(TailRule::Zero) => Ok(head),
                    Some(TailRule::PowerLaw { c0, alpha }) => Ok(head + power_tail(*c0, *alpha, m, from.max(len))?),
                    None => Err(TrawlError::Unavailable("custom trawl has no tail rule".into())),
                }
            }
        }
    }

    /// `#{j : a_j ≥ τ}` for a monotone trawl and `τ > 0`, saturating at `u64::MAX`.
    pub fn count_at_least(&self, tau: T) -> Result<u64> {
        if !self.is_monotone() {
            return Err(TrawlError::Unsupported("level counts need a monotone trawl".into()));
        }
        if !(tau > T::zero()) {
            return domain(format!("level must be positive, got {tau}"));
        }
        let guess = match &self.kind {
            TrawlKind::PowerLaw { c0, alpha } => power_count_guess(*c0, *alpha, tau),
            TrawlKind::Geometric { a } => {
                if tau > T::one() {
                    0.0
                } else {
                    (tau.ln() / a.ln()).floor().as_f64() + 1.0
                }
            }
            TrawlKind::Custom { values, tail } => {
                let head = values.partition_point(|v| *v >= tau) as u64;
                if head < values.len() as u64 {
                    return Ok(head);
                }
                match tail {
                    Some(TailRule::PowerLaw { c0, alpha }) => {
                        power_count_guess(*c0, *alpha, tau).max(values.len() as f64)
                    }
                    Some(TailRule::Zero) => return Ok(head),
                    None => {
                        return Err(TrawlError::Unavailable("custom trawl has no tail rule".into()));
                    }
                }
            }
        };
        if guess >= u64::MAX as f64 {
            return Ok(u64::MAX);
        }
        // correct the floating-point guess against the exact values
        let mut k = guess.max(0.0) as u64;
        while k > 0 && self.value(k - 1)? < tau {
            k -= 1;
        }
        while k < u64::MAX && self.value(k)? >= tau {
            k += 1;
        }
        Ok(k)
    }

    /// Upper bound on `Σ_{j > J} |μ(a_j)|`.
    pub fn tail_mean_sum(&self, seed: &SeedModel<T>, from: u64) -> Result<T> {
        self.tail_moment_sum(seed, Moment::Mean, from)
    }

    /// Upper bound on `Σ_{j > J} g(a_j)`.
    pub fn tail_variance_sum(&self, seed: &SeedModel<T>, from: u64) -> Result<T> {
        self.tail_moment_sum(seed, Moment::Covariance, from)
    }

    fn tail_moment_sum(&self, seed: &SeedModel<T>, moment: Moment, j: u64) -> Result<T> {
        let first = j.saturating_add(1);
        let eval = |u: T| -> Result<T> {
            Ok(match moment {
                Moment::Mean => seed.mean(u)?.abs(),
                Moment::Covariance => seed.variance(u)?.abs(),
            })
        };
        match &self.kind {
            TrawlKind::PowerLaw { c0, alpha } => power_moment_tail(seed, moment, *c0, *alpha, first),
            TrawlKind::Geometric { a } => {
                let x = a.powf(T::from_index(first));
                let ratio = seed.expansion(moment, x)?.ratio_bound(x);
                if ratio == T::zero() {
                    return Ok(T::zero());
                }
                let mut acc = T::zero();
                let mut u = x;
                let mut steps = 0u64;
                loop {
                    let term = eval(u)?;
                    acc += term;
                    u = u * *a;
                    steps += 1;
                    if term < T::lit(1e-16) || steps >= 10_000_000 {
                        break;
                    }
                }
                // remaining terms are at most ratio · u / (1 - a)
                Ok(acc + ratio * u / (T::one() - *a))
            }
            TrawlKind::Custom { values, tail } => {
                let len = values.len() as u64;
                let mut acc = T::zero();
                for idx in first..len {
                    acc += eval(values[idx as usize])?;
                }
                match tail {
                    Some(TailRule::Zero) => Ok(acc),
                    Some(TailRule::PowerLaw { c0, alpha }) => {
                        Ok(acc + power_moment_tail(seed, moment, *c0, *alpha, first.max(len))?)
                    }
                    None => Err(TrawlError::Unavailable("custom trawl has no tail rule".into())),
                }
            }
        }
    }

    /// Summability diagnostics and the regime classification for `seed`.
    pub fn condition_report(&self, seed: &SeedModel<T>) -> ConditionReport {
        let two = T::lit(2.0);
        let mut notes = Vec::new();
        let (abs, weighted, sqrt, frac) = match &self.kind {
            TrawlKind::Geometric { .. } => (Some(true), Some(true), Some(true), Some(true)),
            TrawlKind::Custom { tail: Some(TailRule::Zero), .. } => (Some(true), Some(true), Some(true), Some(true)),
            TrawlKind::PowerLaw { alpha, .. }
            | TrawlKind::Custom { tail: Some(TailRule::PowerLaw { alpha, .. }), .. } => {
                let a = *alpha;
                (Some(a > T::one()), Some(a > two), Some(a > two), Some(a > two))
            }
            TrawlKind::Custom { tail: None, .. } => {
                notes.push("custom trawl without a tail rule: summability cannot be decided".into());
                (None, None, None, None)
            }
        };
        let variance_summable = match self.tail_variance_sum(seed, 0) {
            Ok(v) => Some(v.is_finite()),
            Err(TrawlError::Unavailable(msg)) => {
                notes.push(msg);
                None
            }
            Err(_) => Some(false),
        };
        // a seed whose covariance has no (u ∧ v) part behaves like a product
        // kernel Σ a_j a_{j+k}, which is summable whenever Σ a_j is
        let min_part = seed
            .expansion(Moment::Covariance, self.max_value())
            .map(|e| e.min_powers.iter().any(|c| *c != T::zero()))
            .unwrap_or(true);
        let regime = match (abs, weighted) {
            (Some(true), Some(true)) => Regime::ShortMemory,
            (Some(true), Some(false)) if !min_part => {
                notes.push("seed covariance is a product kernel; autocovariances are summable".into());
                Regime::ShortMemory
            }
            (Some(true), Some(false)) => match self.power_tail_params() {
                Some((_, alpha)) if alpha < two => Regime::LongMemory,
                _ => Regime::Undetermined,
            },
            _ => Regime::Undetermined,
        };
        if variance_summable == Some(false) {
            notes.push("Σ g(a_j) diverges: the trawl process is not defined".into());
        }
        if regime == Regime::LongMemory {
            match seed {
                SeedModel::Diffusion { .. } => notes.push(
                    "moments of order above 2(α−1) needed by the limit theorems are not verified for diffusion seeds"
                        .into(),
                ),
                SeedModel::MixedPoisson { .. } => notes.push(
                    "the two-jump condition E γ(v)1(τ1 ≤ u, τ2 ≤ v) = o(u) is assumed, not verified, for mixed Poisson seeds"
                        .into(),
                ),
                _ => {}
            }
        }
        ConditionReport {
            abs_summable: abs,
            weighted_summable: weighted,
            sqrt_summable: sqrt,
            fractional_summable: frac,
            variance_summable,
            regime,
            notes,
        }
    }
}

/// `a_j` of the power-law trawl.
pub fn trawl_value<T: Scalar>(t: &TrawlSequence<T>, j: u64) -> Result<T> {
    t.value(j)
}

/// Upper bound on `Σ_{j > J} |μ(a_j)|`.
pub fn tail_mean_sum<T: Scalar>(seed: &SeedModel<T>, t: &TrawlSequence<T>, from: u64) -> Result<T> {
    t.tail_mean_sum(seed, from)
}

/// Upper bound on `Σ_{j > J} g(a_j)`.
pub fn tail_variance_sum<T: Scalar>(seed: &SeedModel<T>, t: &TrawlSequence<T>, from: u64) -> Result<T> {
    t.tail_variance_sum(seed, from)
}

pub fn condition_report<T: Scalar>(seed: &SeedModel<T>, t: &TrawlSequence<T>) -> ConditionReport {
    t.condition_report(seed)
}

fn power_value<T: Scalar>(c0: T, alpha: T, j: u64) -> T {
    c0 * (T::from_index(j) + T::one()).powf(-alpha)
}

fn power_count_guess<T: Scalar>(c0: T, alpha: T, tau: T) -> f64 {
    // a_j ≥ τ  ⇔  j + 1 ≤ (c0/τ)^{1/α}
    (c0 / tau).powf(alpha.recip()).floor().as_f64()
}

/// `Σ_{j ≥ from} (c0 (j+1)^{-α})^m`.
fn power_tail<T: Scalar>(c0: T, alpha: T, m: T, from: u64) -> Result<T> {
    let s = m * alpha;
    if !(s > T::one()) {
        return Err(TrawlError::Divergent(format!("Σ a_j^{m} diverges for a power tail with alpha = {alpha}")));
    }
    Ok(c0.powf(m) * hurwitz_zeta(s, T::from_index(from) + T::one()))
}

/// `Σ_{j ≥ first} |f(a_j)|` bounded by `sup |f(u)|/u · c0 ∫_{first-1}^∞ (x+1)^{-α} dx`.
fn power_moment_tail<T: Scalar>(seed: &SeedModel<T>, moment: Moment, c0: T, alpha: T, first: u64) -> Result<T> {
    let x = power_value(c0, alpha, first);
    let ratio = seed.expansion(moment, x)?.ratio_bound(x);
    if ratio == T::zero() {
        return Ok(T::zero());
    }
    if !(alpha > T::one()) {
        return Err(TrawlError::Divergent(format!("trawl tail with alpha = {alpha} is not summable")));
    }
    let integral = c0 * T::from_index(first).powf(T::one() - alpha) / (alpha - T::one());
    Ok(ratio * integral)
}
