//! Special functions needed by the closed forms.

use crate::scalar::Scalar;

// B_{2j} / (2j)! for j = 1..=9
const BERNOULLI_OVER_FACTORIAL: [f64; 9] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
    43867.0 / 5109094217170944000.0,
];

/// Hurwitz zeta `ζ(s, q) = Σ_{k≥0} (q + k)^{-s}` for `s > 1`, `q > 0`.
///
/// Euler–Maclaurin with the head summed until `q + N ≥ 16`; the remainder after
/// nine correction terms is below double precision for all `s` used here.
pub fn hurwitz_zeta<T: Scalar>(s: T, q: T) -> T {
    debug_assert!(s > T::one() && q > T::zero());
    let one = T::one();
    let shift = T::lit(16.0);
    let mut head = T::zero();
    let mut x = q;
    while x < shift {
        head += x.powf(-s);
        x += one;
    }
    let mut tail = x.powf(one - s) / (s - one) + x.powf(-s) / T::lit(2.0);
    // rising factorial s (s+1) ... (s+2j-2) times x^{-s-2j+1}
    let mut rising = s;
    let mut xpow = x.powf(-s - one);
    let inv_x2 = (x * x).recip();
    for (j, &b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = T::lit(b) * rising * xpow;
        tail += term;
        let m = T::from_index(2 * j as u64 + 1);
        rising = rising * (s + m) * (s + m + one);
        xpow = xpow * inv_x2;
    }
    head + tail
}

/// Riemann zeta for `s > 1`.
pub fn riemann_zeta<T: Scalar>(s: T) -> T {
    hurwitz_zeta(s, T::one())
}

/// Gamma function, evaluated in double precision.
pub fn gamma<T: Scalar>(x: T) -> T {
    T::lit(statrs::function::gamma::gamma(x.as_f64()))
}
