//! Seed processes γ(u): analytic moments and exact path sampling.
//!
//! A trawl process is assembled from i.i.d. copies of one seed process. Each
//! family here comes with its mean `μ(u)`, variance `g(u)` and covariance
//! `ρ(u, v)` in closed form, plus a sampler that draws one consistent path at a
//! sorted set of evaluation points.
//!
//! All families except the random line live on `u ≥ 0`; the Bernoulli seed is
//! further restricted to `u ∈ [0, 1]`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{domain, Result, TrawlError};
use crate::scalar::Scalar;

/// Law of the random intensity ζ of a mixed Poisson seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MixingLaw<T = f64> {
    /// ζ ~ Exponential(rate); the seed then has negative binomial marginals.
    Exponential { rate: T },
    /// ζ ≡ value; an ordinary Poisson process with that intensity.
    Constant { value: T },
}

impl<T: Scalar> MixingLaw<T> {
    pub fn exponential(rate: T) -> Result<Self> {
        if !(rate > T::zero() && rate.is_finite()) {
            return domain(format!("mixing rate must be positive and finite, got {rate}"));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn constant(value: T) -> Result<Self> {
        if !(value > T::zero() && value.is_finite()) {
            return domain(format!("mixing value must be positive and finite, got {value}"));
        }
        Ok(Self::Constant { value })
    }

    pub fn mean(&self) -> T {
        match *self {
            Self::Exponential { rate } => rate.recip(),
            Self::Constant { value } => value,
        }
    }

    pub fn variance(&self) -> T {
        match *self {
            Self::Exponential { rate } => (rate * rate).recip(),
            Self::Constant { .. } => T::zero(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Exponential { rate } => Self::exponential(rate).map(|_| ()),
            Self::Constant { value } => Self::constant(value).map(|_| ()),
        }
    }
}

impl MixingLaw<f64> {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            Self::Constant { value } => value,
        }
    }
}

/// Deterministic volatility `b(v)` of the diffusion seed `γ(u) = ∫_0^u b(v) dB(v)`.
#[derive(Clone)]
pub enum Volatility<T = f64> {
    Constant {
        sigma: T,
    },
    /// `b(v) = intercept + slope · v`
    Linear {
        intercept: T,
        slope: T,
    },
    /// `b(v) = scale · exp(rate · v)`
    Exponential {
        scale: T,
        rate: T,
    },
    /// Arbitrary function; the variance has no closed form.
    Custom(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: fmt::Debug> fmt::Debug for Volatility<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { sigma } => f.debug_struct("Constant").field("sigma", sigma).finish(),
            Self::Linear { intercept, slope } => {
                f.debug_struct("Linear").field("intercept", intercept).field("slope", slope).finish()
            }
            Self::Exponential { scale, rate } => {
                f.debug_struct("Exponential").field("scale", scale).field("rate", rate).finish()
            }
            Self::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

impl<T: Scalar> Volatility<T> {
    pub fn eval(&self, v: T) -> T {
        match self {
            Self::Constant { sigma } => *sigma,
            Self::Linear { intercept, slope } => *intercept + *slope * v,
            Self::Exponential { scale, rate } => *scale * (*rate * v).exp(),
            Self::Custom(f) => f(v),
        }
    }

    /// `∫_0^u b²(v) dv` when a closed form exists.
    pub fn integrated_square(&self, u: T) -> Option<T> {
        let three = T::lit(3.0);
        match *self {
            Self::Constant { sigma } => Some(sigma * sigma * u),
            Self::Linear { intercept: c, slope: d } => Some(c * c * u + c * d * u * u + d * d * u * u * u / three),
            Self::Exponential { scale, rate } => {
                let two_r = rate + rate;
                if two_r == T::zero() {
                    Some(scale * scale * u)
                } else {
                    Some(scale * scale * (two_r * u).exp_m1() / two_r)
                }
            }
            Self::Custom(_) => None,
        }
    }

    fn square_expansion(&self, max_arg: T) -> Option<MomentExpansion<T>> {
        match *self {
            Self::Constant { sigma } => Some(MomentExpansion::polynomial(vec![sigma * sigma], T::zero())),
            Self::Linear { intercept: c, slope: d } => {
                Some(MomentExpansion::polynomial(vec![c * c, c * d, d * d / T::lit(3.0)], T::zero()))
            }
            Self::Exponential { scale, rate } => Some(MomentExpansion::exp_series(rate + rate, scale * scale, max_arg)),
            Self::Custom(_) => None,
        }
    }
}

/// Power-series representation of a moment function on `u, v ≥ 0`:
/// `f(u, v) = Σ_m c_m (u∧v)^m + product · u v + err` with
/// `|err| ≤ rel_remainder · (u∧v)` whenever `u, v ≤ max_arg`.
///
/// Every closed-form family in this module has such an expansion. It turns
/// tail sums `Σ_{j≥J} f(a_j, a_{j+k})` into power sums of the trawl.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentExpansion<T> {
    /// `min_powers[m - 1]` multiplies `(u∧v)^m`.
    pub min_powers: Vec<T>,
    pub product: T,
    pub rel_remainder: T,
}

impl<T: Scalar> MomentExpansion<T> {
    pub fn zero() -> Self {
        Self { min_powers: Vec::new(), product: T::zero(), rel_remainder: T::zero() }
    }

    fn polynomial(min_powers: Vec<T>, product: T) -> Self {
        Self { min_powers, product, rel_remainder: T::zero() }
    }

    /// `scale · (e^{λx} − 1)/λ` as a series in `x = u∧v`.
    fn exp_series(lambda: T, scale: T, max_arg: T) -> Self {
        if lambda == T::zero() {
            return Self::polynomial(vec![scale], T::zero());
        }
        let lx = (lambda * max_arg).abs();
        let mut coeffs = Vec::new();
        let mut c = scale;
        let mut rem = T::infinity();
        let mut m = 1u64;
        // term m: scale λ^{m-1} x^m / m!
        while m <= 400 {
            coeffs.push(c);
            // Σ_{i>m} |λ|^{i-1} X^{i-1}/i! ≤ (|λ|X)^m/(m+1)! e^{|λ|X}
            let mut bound = lx.exp();
            for i in 1..=m {
                bound = bound * lx / T::from_index(i + 1);
            }
            rem = bound * scale.abs();
            if rem < T::lit(1e-18) * scale.abs().max(T::min_positive_value()) || lx == T::zero() {
                break;
            }
            m += 1;
            c = c * lambda / T::from_index(m);
        }
        Self { min_powers: coeffs, product: T::zero(), rel_remainder: if lx == T::zero() { T::zero() } else { rem } }
    }

    pub fn is_zero(&self) -> bool {
        self.min_powers.iter().all(|c| *c == T::zero()) && self.product == T::zero()
    }

    /// Evaluates the truncated series at `(u, v)`.
    pub fn eval(&self, u: T, v: T) -> T {
        let lo = u.min(v);
        let mut acc = T::zero();
        let mut p = lo;
        for &c in &self.min_powers {
            acc += c * p;
            p = p * lo;
        }
        acc + self.product * u * v
    }

    /// Upper bound on `|f(u, v)| / (u∧v)` for `0 < u, v ≤ x`.
    pub fn ratio_bound(&self, x: T) -> T {
        let mut acc = T::zero();
        let mut p = T::one();
        for &c in &self.min_powers {
            acc += c.abs() * p;
            p = p * x;
        }
        acc + self.product.abs() * x + self.rel_remainder
    }
}

/// Family of seed processes.
#[derive(Clone, Debug)]
pub enum SeedModel<T = f64> {
    /// `γ(u) = ξ u` with `ξ ~ N(0, variance)`; defined on all of ℝ.
    RandomLine {
        variance: T,
    },
    Brownian,
    Poisson,
    MixedPoisson {
        mixing: MixingLaw<T>,
    },
    /// `γ(u) = 1(U ≤ u)` with `U ~ Uniform[0, 1]`.
    Bernoulli,
    /// `γ(u) = exp(B(u) − u/2) − 1`.
    GeomBrownian,
    /// `γ(u) = ∫_0^u b(v) dB(v)`, sampled by an Euler scheme with step `grid_step`
    /// (default `1e-4 · max(args)`).
    Diffusion {
        volatility: Volatility<T>,
        grid_step: Option<T>,
    },
}

/// Which moment function an expansion describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Moment {
    Mean,
    Covariance,
}

impl<T: Scalar> SeedModel<T> {
    pub fn random_line(variance: T) -> Result<Self> {
        let s = Self::RandomLine { variance };
        s.validate()?;
        Ok(s)
    }

    pub fn mixed_poisson(mixing: MixingLaw<T>) -> Result<Self> {
        mixing.validate()?;
        Ok(Self::MixedPoisson { mixing })
    }

    pub fn diffusion(volatility: Volatility<T>, grid_step: Option<T>) -> Result<Self> {
        let s = Self::Diffusion { volatility, grid_step };
        s.validate()?;
        Ok(s)
    }

    /// Configuration tag of the family.
    pub fn tag(&self) -> &'static str {
        match self {
            Self::RandomLine { .. } => "line",
            Self::Brownian => "bm",
            Self::Poisson => "poisson",
            Self::MixedPoisson { .. } => "mixed-poisson",
            Self::Bernoulli => "bernoulli",
            Self::GeomBrownian => "gbm",
            Self::Diffusion { .. } => "diffusion",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::RandomLine { variance } if !(*variance >= T::zero() && variance.is_finite()) => {
                domain(format!("random line variance must be finite and nonnegative, got {variance}"))
            }
            Self::MixedPoisson { mixing } => mixing.validate(),
            Self::Diffusion { grid_step: Some(h), .. } if !(*h > T::zero() && h.is_finite()) => {
                domain(format!("diffusion grid step must be positive, got {h}"))
            }
            _ => Ok(()),
        }
    }

    /// Piecewise constant nondecreasing integer-valued families.
    pub fn is_jump(&self) -> bool {
        matches!(self, Self::Poisson | Self::MixedPoisson { .. } | Self::Bernoulli)
    }

    /// Centered families with continuous paths (the Gaussian scenario).
    pub fn is_continuous(&self) -> bool {
        matches!(self, Self::Brownian | Self::GeomBrownian | Self::Diffusion { .. } | Self::RandomLine { .. })
    }

    /// Whether `ρ(u, v) = g(u ∧ v)` holds for `u, v ≥ 0`.
    pub fn has_min_covariance(&self) -> bool {
        matches!(self, Self::Brownian | Self::Poisson | Self::GeomBrownian | Self::Diffusion { .. })
    }

    /// Largest admissible argument.
    pub fn max_argument(&self) -> T {
        match self {
            Self::Bernoulli => T::one(),
            _ => T::infinity(),
        }
    }

    pub fn check_arg(&self, u: T) -> Result<()> {
        if !u.is_finite() {
            return domain(format!("seed argument must be finite, got {u}"));
        }
        match self {
            Self::RandomLine { .. } => Ok(()),
            _ if u < T::zero() => domain(format!("{} seed is defined on u >= 0, got {u}", self.tag())),
            Self::Bernoulli if u > T::one() => domain(format!("bernoulli seed is defined on [0, 1], got {u}")),
            _ => Ok(()),
        }
    }

    /// `μ(u) = E γ(u)`.
    pub fn mean(&self, u: T) -> Result<T> {
        self.check_arg(u)?;
        Ok(match self {
            Self::Poisson | Self::Bernoulli => u,
            Self::MixedPoisson { mixing } => u * mixing.mean(),
            _ => T::zero(),
        })
    }

    /// `g(u) = Var γ(u)`.
    pub fn variance(&self, u: T) -> Result<T> {
        self.covariance(u, u)
    }

    /// `ρ(u, v) = Cov(γ(u), γ(v))`.
    pub fn covariance(&self, u: T, v: T) -> Result<T> {
        self.check_arg(u)?;
        self.check_arg(v)?;
        let lo = u.min(v);
        Ok(match self {
            Self::RandomLine { variance } => *variance * u * v,
            Self::Brownian | Self::Poisson => lo,
            Self::MixedPoisson { mixing } => lo * mixing.mean() + u * v * mixing.variance(),
            Self::Bernoulli => lo - u * v,
            Self::GeomBrownian => lo.exp_m1(),
            Self::Diffusion { volatility, .. } => volatility
                .integrated_square(lo)
                .ok_or_else(|| TrawlError::Unavailable("diffusion variance needs a closed-form volatility".into()))?,
        })
    }

    /// Series form of `μ` or `ρ`, valid for arguments up to `max_arg`.
    pub fn expansion(&self, moment: Moment, max_arg: T) -> Result<MomentExpansion<T>> {
        let one = T::one();
        Ok(match moment {
            Moment::Mean => match self {
                Self::Poisson | Self::Bernoulli => MomentExpansion::polynomial(vec![one], T::zero()),
                Self::MixedPoisson { mixing } => MomentExpansion::polynomial(vec![mixing.mean()], T::zero()),
                _ => MomentExpansion::zero(),
            },
            Moment::Covariance => match self {
                Self::RandomLine { variance } => MomentExpansion::polynomial(Vec::new(), *variance),
                Self::Brownian | Self::Poisson => MomentExpansion::polynomial(vec![one], T::zero()),
                Self::MixedPoisson { mixing } => MomentExpansion::polynomial(vec![mixing.mean()], mixing.variance()),
                Self::Bernoulli => MomentExpansion::polynomial(vec![one], -one),
                Self::GeomBrownian => MomentExpansion::exp_series(one, one, max_arg),
                Self::Diffusion { volatility, .. } => volatility.square_expansion(max_arg).ok_or_else(|| {
                    TrawlError::Unavailable("diffusion variance needs a closed-form volatility".into())
                })?,
            },
        })
    }

    /// Density of the first jump time at 0 (the intensity near the origin).
    pub fn first_jump_density_at_zero(&self) -> Result<T> {
        match self {
            Self::Poisson | Self::Bernoulli => Ok(T::one()),
            Self::MixedPoisson { mixing } => Ok(mixing.mean()),
            _ => Err(TrawlError::Unsupported(format!("{} seed has no jumps", self.tag()))),
        }
    }
}

/// `μ(u)` of the seed.
pub fn seed_mean<T: Scalar>(seed: &SeedModel<T>, u: T) -> Result<T> {
    seed.mean(u)
}

/// `g(u)` of the seed.
pub fn seed_variance<T: Scalar>(seed: &SeedModel<T>, u: T) -> Result<T> {
    seed.variance(u)
}

/// `ρ(u, v)` of the seed.
pub fn seed_covariance<T: Scalar>(seed: &SeedModel<T>, u: T, v: T) -> Result<T> {
    seed.covariance(u, v)
}

/// One realization of a seed path at a sorted set of arguments.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedPathSample {
    pub args: Vec<f64>,
    pub values: Vec<f64>,
    /// Set when the values come from a discretization (diffusion seed); the
    /// arguments were read at the nearest point of a grid with this step.
    pub grid_step: Option<f64>,
}

impl SeedPathSample {
    /// Value of the realization at an argument it was evaluated at.
    pub fn value_at(&self, u: f64) -> Option<f64> {
        let i = self.args.partition_point(|&a| a < u);
        (i < self.args.len() && self.args[i] == u).then(|| self.values[i])
    }
}

impl SeedModel<f64> {
    /// Draws one path and evaluates it at `args`, which must be sorted ascending.
    pub fn sample_path<R: Rng + ?Sized>(&self, args: &[f64], rng: &mut R) -> Result<SeedPathSample> {
        self.validate()?;
        if args.windows(2).any(|w| w[1] < w[0]) {
            return Err(TrawlError::Contract("seed path arguments must be sorted ascending".into()));
        }
        for &u in args {
            self.check_arg(u)?;
        }
        let mut values = vec![0.0; args.len()];
        let grid_step = self.sample_into(args, rng, &mut values);
        Ok(SeedPathSample { args: args.to_vec(), values, grid_step })
    }

    /// Core sampler. `args` must be sorted and admissible; `out` has the same length.
    /// Returns the discretization step when the family is approximated.
    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, args: &[f64], rng: &mut R, out: &mut [f64]) -> Option<f64> {
        debug_assert_eq!(args.len(), out.len());
        let &max_arg = args.last()?;
        match self {
            Self::RandomLine { variance } => {
                let xi = variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
                for (o, &u) in out.iter_mut().zip(args) {
                    *o = xi * u;
                }
                None
            }
            Self::Brownian => {
                brownian_into(args, rng, out);
                None
            }
            Self::GeomBrownian => {
                brownian_into(args, rng, out);
                for (o, &u) in out.iter_mut().zip(args) {
                    *o = (*o - 0.5 * u).exp_m1();
                }
                None
            }
            Self::Poisson | Self::MixedPoisson { .. } | Self::Bernoulli => {
                let mut times = Vec::new();
                self.push_jump_times(max_arg, rng, &mut times);
                count_jumps_into(&times, args, out);
                None
            }
            Self::Diffusion { volatility, grid_step } => {
                if max_arg <= 0.0 {
                    out.fill(0.0);
                    return None;
                }
                let h = grid_step.unwrap_or(1e-4 * max_arg);
                let sqrt_h = h.sqrt();
                let mut state = 0.0;
                let mut idx: u64 = 0;
                for (o, &u) in out.iter_mut().zip(args) {
                    let target = (u / h).round() as u64;
                    while idx < target {
                        let t = idx as f64 * h;
                        state += volatility.eval(t) * sqrt_h * rng.sample::<f64, _>(StandardNormal);
                        idx += 1;
                    }
                    *o = state;
                }
                Some(h)
            }
        }
    }

    /// All jump times in `(0, horizon]` of one realization.
    pub fn sample_jump_times<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<Vec<f64>> {
        if !self.is_jump() {
            return Err(TrawlError::Unsupported(format!("{} seed has no jump times", self.tag())));
        }
        self.validate()?;
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return domain(format!("jump horizon must be finite and nonnegative, got {horizon}"));
        }
        let mut out = Vec::new();
        self.push_jump_times(horizon, rng, &mut out);
        Ok(out)
    }

    pub(crate) fn push_jump_times<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            Self::Poisson => push_unit_poisson(0.0, horizon, 1.0, rng, out),
            Self::MixedPoisson { mixing } => {
                let zeta = mixing.sample(rng);
                push_unit_poisson(0.0, horizon, zeta, rng, out);
            }
            Self::Bernoulli => {
                let u = uniform_open_closed(rng);
                if u <= horizon {
                    out.push(u);
                }
            }
            _ => unreachable!("jump times requested for a continuous seed"),
        }
    }

    /// `P(τ_1 ≤ h)`.
    pub fn first_jump_cdf(&self, h: f64) -> f64 {
        match self {
            Self::Poisson => -(-h).exp_m1(),
            Self::MixedPoisson { mixing: MixingLaw::Constant { value } } => -(-value * h).exp_m1(),
            Self::MixedPoisson { mixing: MixingLaw::Exponential { rate } } => h / (rate + h),
            Self::Bernoulli => h.min(1.0),
            _ => 0.0,
        }
    }

    /// Jump times in `(0, h]` of a realization conditioned on `τ_1 ≤ h`.
    pub(crate) fn push_jump_times_given_first<R: Rng + ?Sized>(&self, h: f64, rng: &mut R, out: &mut Vec<f64>) {
        let u = uniform_open_closed(rng);
        match *self {
            Self::Poisson => {
                let tau = (-(-u * self.first_jump_cdf(h)).ln_1p()).min(h).max(f64::MIN_POSITIVE);
                out.push(tau);
                push_unit_poisson(tau, h, 1.0, rng, out);
            }
            Self::MixedPoisson { mixing: MixingLaw::Constant { value } } => {
                let tau = (-(-u * self.first_jump_cdf(h)).ln_1p() / value).min(h).max(f64::MIN_POSITIVE);
                out.push(tau);
                push_unit_poisson(tau, h, value, rng, out);
            }
            Self::MixedPoisson { mixing: MixingLaw::Exponential { rate } } => {
                // τ_1 has the Lomax law t / (rate + t); given τ_1 = t, ζ ~ Gamma(2, rate + t)
                let q = u * self.first_jump_cdf(h);
                let tau = (rate * q / (1.0 - q)).min(h).max(f64::MIN_POSITIVE);
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                let zeta = (e1 + e2) / (rate + tau);
                out.push(tau);
                push_unit_poisson(tau, h, zeta, rng, out);
            }
            Self::Bernoulli => out.push((u * h.min(1.0)).max(f64::MIN_POSITIVE)),
            _ => unreachable!("conditional jump times requested for a continuous seed"),
        }
    }
}

/// Draws one seed path at sorted `args`.
pub fn sample_seed_path<R: Rng + ?Sized>(seed: &SeedModel<f64>, args: &[f64], rng: &mut R) -> Result<SeedPathSample> {
    seed.sample_path(args, rng)
}

/// Jump times in `(0, horizon]` of one jump-seed realization.
pub fn sample_jump_times<R: Rng + ?Sized>(seed: &SeedModel<f64>, horizon: f64, rng: &mut R) -> Result<Vec<f64>> {
    seed.sample_jump_times(horizon, rng)
}

/// `γ(u) = #{τ_i ≤ u}` for sorted jump times and sorted arguments.
pub fn count_jumps_into(times: &[f64], args: &[f64], out: &mut [f64]) {
    let mut i = 0;
    for (o, &u) in out.iter_mut().zip(args) {
        while i < times.len() && times[i] <= u {
            i += 1;
        }
        *o = i as f64;
    }
}

fn brownian_into<R: Rng + ?Sized>(args: &[f64], rng: &mut R, out: &mut [f64]) {
    let mut prev = 0.0;
    let mut b = 0.0;
    for (o, &u) in out.iter_mut().zip(args) {
        if u > prev {
            b += (u - prev).sqrt() * rng.sample::<f64, _>(StandardNormal);
            prev = u;
        }
        *o = b;
    }
}

/// Appends points of a Poisson process of intensity `rate` on `(start, horizon]`.
fn push_unit_poisson<R: Rng + ?Sized>(start: f64, horizon: f64, rate: f64, rng: &mut R, out: &mut Vec<f64>) {
    let mut t = start;
    loop {
        t += rng.sample::<f64, _>(Exp1) / rate;
        if t > horizon {
            break;
        }
        out.push(t);
    }
}

#[inline]
pub(crate) fn uniform_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
