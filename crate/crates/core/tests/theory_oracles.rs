//! Analytic moments against independently derived oracles.

use approx::assert_relative_eq;
use num_complex::Complex;
use proptest::prelude::*;
use trawlkit::seeds::{seed_covariance, Volatility};
use trawlkit::theory::*;
use trawlkit::{MixingLaw, Rational, Regime, SeedModel, TailRule, TrawlSequence};

/// Direct summation of `Σ_j ρ(a_j, a_{j+k})` over `terms` terms, smallest first,
/// plus nothing for the tail: used with trawls whose tail beyond `terms` is tiny
/// or with an explicit integral remainder added by the caller.
fn brute_autocov(seed: &SeedModel, a: impl Fn(u64) -> f64, k: u64, terms: u64) -> f64 {
    (0..terms).rev().map(|j| seed_covariance(seed, a(j), a(j + k)).unwrap()).sum()
}

fn seeds() -> Vec<SeedModel> {
    vec![
        SeedModel::Brownian,
        SeedModel::Poisson,
        SeedModel::Bernoulli,
        SeedModel::GeomBrownian,
        SeedModel::mixed_poisson(MixingLaw::exponential(1.5).unwrap()).unwrap(),
        SeedModel::random_line(0.7).unwrap(),
        SeedModel::diffusion(Volatility::Linear { intercept: 1.0, slope: 0.3 }, None).unwrap(),
    ]
}

#[test]
fn autocovariance_matches_brute_force_on_geometric_and_finite_trawls() {
    // geometric tails vanish below 1e-300 well within 10^6 terms
    let tol = 1e-12;
    let mut combos = 0;
    for seed in seeds() {
        for (trawl, a) in [
            (
                TrawlSequence::geometric(0.5).unwrap(),
                Box::new(|j: u64| 0.5f64.powi(j as i32)) as Box<dyn Fn(u64) -> f64>,
            ),
            (TrawlSequence::geometric(0.9).unwrap(), Box::new(|j: u64| 0.9f64.powi(j as i32))),
            (
                TrawlSequence::custom(vec![0.9, 0.4, 0.3, 0.05], Some(TailRule::Zero)).unwrap(),
                Box::new(|j: u64| [0.9, 0.4, 0.3, 0.05].get(j as usize).copied().unwrap_or(0.0)),
            ),
        ] {
            for k in [0u64, 1, 3, 17] {
                let brute = brute_autocov(&seed, &a, k, 20_000);
                let got = trawl_autocovariance(&seed, &trawl, k, tol).unwrap();
                assert!((got - brute).abs() <= 2.0 * tol + 1e-13 * brute.abs(), "{seed:?} {k}: {got} vs {brute}");
                combos += 1;
            }
        }
    }
    assert!(combos >= 20);
}

#[test]
fn power_law_autocovariance_matches_brute_force_plus_integral_tail() {
    // ρ = u ∧ v: Σ_{j≥0} a_{j+k}; head of 10^6 terms plus the Euler–Maclaurin remainder
    let tol = 1e-9;
    for &(c0, alpha) in &[(1.0, 1.5), (2.0, 1.2), (0.5, 1.8)] {
        let trawl = TrawlSequence::power_law(c0, alpha).unwrap();
        let a = |j: u64| c0 * ((j + 1) as f64).powf(-alpha);
        for k in [0u64, 5, 300] {
            let n = 1_000_000u64;
            let head = brute_autocov(&SeedModel::Poisson, a, k, n);
            let x = (n + k + 1) as f64;
            let tail = c0 * (x.powf(1.0 - alpha) / (alpha - 1.0) + 0.5 * x.powf(-alpha));
            let got = trawl_autocovariance(&SeedModel::Poisson, &trawl, k, tol).unwrap();
            assert_relative_eq!(got, head + tail, max_relative = 1e-8);
        }
    }
}

#[test]
fn ar1_covariances_and_sigma_squared() {
    let g = TrawlSequence::geometric(0.5).unwrap();
    for seed in [SeedModel::Brownian, SeedModel::Poisson] {
        for k in 0..10 {
            let want = 0.5f64.powi(k) / 0.5;
            assert_relative_eq!(trawl_autocovariance(&seed, &g, k as u64, 1e-13).unwrap(), want, max_relative = 1e-12);
        }
        assert_relative_eq!(sigma_squared(&seed, &g, 1e-12).unwrap(), 6.0, max_relative = 1e-12);
    }
    assert_eq!(sigma_squared(&SeedModel::Brownian, &TrawlSequence::zero(), 1e-12).unwrap(), 0.0);
    assert!(sigma_squared(&SeedModel::Poisson, &TrawlSequence::power_law(1.0, 1.5).unwrap(), 1e-9).is_err());
}

#[test]
fn sigma_squared_matches_lag_sum() {
    // σ² = r(0) + 2 Σ_{k≥1} r(k) summed directly for a geometric trawl with a product part
    let seed = SeedModel::GeomBrownian;
    let g = TrawlSequence::geometric(0.7).unwrap();
    let r = autocovariance_sequence(&seed, &g, 400, 1e-14).unwrap();
    let direct = r[0] + 2.0 * r[1..].iter().rev().sum::<f64>();
    assert_relative_eq!(sigma_squared(&seed, &g, 1e-12).unwrap(), direct, max_relative = 1e-10);
}

#[test]
fn constants_in_exact_arithmetic() {
    let k = asymptotic_constants(Rational::from_integer(1), Rational::new(3, 2)).unwrap();
    assert_eq!(k.c1, Rational::from_integer(2));
    assert_eq!(k.c2, Rational::new(16, 3));
    assert_eq!(k.h, Rational::new(3, 4));
    let k = asymptotic_constants(Rational::from_integer(2), Rational::new(3, 2)).unwrap();
    assert_eq!((k.c1, k.c2), (Rational::from_integer(4), Rational::new(32, 3)));
    assert!(asymptotic_constants(Rational::from_integer(1), Rational::from_integer(2)).is_err());
    assert!(asymptotic_constants(1.0, 1.99).unwrap().near_boundary);
}

#[test]
fn fbm_covariance_values() {
    assert_relative_eq!(fbm_covariance(0.75, 1.0, 2.0).unwrap(), 2f64.sqrt(), max_relative = 1e-14);
    assert_relative_eq!(fbm_covariance(0.5, 0.3, 0.8).unwrap(), 0.3, max_relative = 1e-14);
    assert_relative_eq!(fbm_covariance(0.6, 1.7, 1.7).unwrap(), 1.7f64.powf(1.2), max_relative = 1e-14);
}

#[test]
fn stable_charfn_closed_form() {
    // α = 3/2, c0 = 1: a centred law with positive jumps only has
    // log φ(z) = Γ(−α)·(−iz)^α·const = −√(2π)|z|^{3/2}(1 + i sgn z)
    let k = (2.0 * std::f64::consts::PI).sqrt();
    for &z in &[0.25f64, 1.0, 2.0] {
        let m = z.abs().powf(1.5) * k;
        let want = Complex::new(-m, -m * z.signum()).exp();
        let got = stable_charfn(1.5, 1.0, 1.0, z).unwrap();
        assert_relative_eq!(got.re, want.re, epsilon = 1e-13);
        assert_relative_eq!(got.im, want.im, epsilon = 1e-13);
        let neg = stable_charfn(1.5, 1.0, 1.0, -z).unwrap();
        assert_relative_eq!(neg.re, got.re, epsilon = 1e-15);
        assert_relative_eq!(neg.im, -got.im, epsilon = 1e-15);
    }
    assert_eq!(stable_charfn(1.3, 2.0, 1.0, 0.0).unwrap(), Complex::new(1.0, 0.0));
    assert!(stable_charfn(2.5, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn cli_constants_through_the_report() {
    let r = theory_report(&SeedModel::Poisson, &TrawlSequence::power_law(1.0, 1.5).unwrap(), 5, 1e-10).unwrap();
    assert_eq!(r.regime, Regime::LongMemory);
    assert_relative_eq!(r.c1.unwrap(), 2.0, max_relative = 1e-12);
    assert_relative_eq!(r.c2.unwrap(), 16.0 / 3.0, max_relative = 1e-12);
    assert_relative_eq!(r.h.unwrap(), 0.75);
    let r = theory_report(&SeedModel::Brownian, &TrawlSequence::geometric(0.5).unwrap(), 5, 1e-10).unwrap();
    assert_eq!(r.regime, Regime::ShortMemory);
    assert_relative_eq!(r.sigma2.unwrap(), 6.0, max_relative = 1e-10);
}

#[test]
fn mixed_poisson_constants_carry_the_mixing_mean() {
    let seed = SeedModel::mixed_poisson(MixingLaw::constant(2.0).unwrap()).unwrap();
    let r = theory_report(&seed, &TrawlSequence::power_law(1.0, 1.5).unwrap(), 1, 1e-8).unwrap();
    assert_relative_eq!(r.c1.unwrap(), 4.0, max_relative = 1e-12);
    assert!(!r.warnings.is_empty());
}

proptest! {
    #[test]
    fn stable_modulus_at_most_one(alpha in 1.01f64..1.99, c0 in 0.1f64..5.0, t in 0.0f64..3.0, z in -10.0f64..10.0) {
        let v = stable_charfn(alpha, c0, t, z).unwrap();
        prop_assert!(v.norm() <= 1.0 + 1e-15);
        prop_assert!(stable_log_modulus_coefficient(alpha, c0).unwrap() > 0.0);
    }

    #[test]
    fn power_law_regular_variation(c0 in 0.1f64..10.0, alpha in 1.01f64..1.99, j in 0u64..1_000_000) {
        let t = TrawlSequence::power_law(c0, alpha).unwrap();
        prop_assert!((t.value(j).unwrap() * ((j + 1) as f64).powf(alpha) / c0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn autocovariance_is_nonincreasing_for_min_kernels(alpha in 1.05f64..1.95, k in 0u64..500) {
        let t = TrawlSequence::power_law(1.0, alpha).unwrap();
        let a = trawl_autocovariance(&SeedModel::Poisson, &t, k, 1e-9).unwrap();
        let b = trawl_autocovariance(&SeedModel::Poisson, &t, k + 1, 1e-9).unwrap();
        prop_assert!(b <= a + 2e-9);
    }

    #[test]
    fn tail_sums_decrease(j in 0u64..10_000) {
        let t = TrawlSequence::power_law(1.0, 1.5).unwrap();
        let s = &SeedModel::Poisson;
        prop_assert!(t.tail_mean_sum(s, j + 1).unwrap() <= t.tail_mean_sum(s, j).unwrap());
        prop_assert!(t.tail_variance_sum(s, j + 1).unwrap() <= t.tail_variance_sum(s, j).unwrap());
    }
}
