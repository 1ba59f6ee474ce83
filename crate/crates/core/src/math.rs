//! Scalar helpers that stay accurate where the textbook formula does not.

use core::f64::consts::LN_2;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

/// `ln(sinh x)` for `x > 0`, finite far beyond the overflow point of `sinh`.
pub fn ln_sinh(x: f64) -> f64 {
    if x < 0.5 {
        x.ln() + ln_sinhc(x)
    } else {
        x - LN_2 + (-(-2.0 * x).exp_m1()).ln()
    }
}

/// `sinh(x) / x`, equal to 1 at the origin.
pub fn sinhc(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// `ln(sinh(x) / x)` for `x ≥ 0`.
pub fn ln_sinhc(x: f64) -> f64 {
    if x < 1.0 {
        sinhc(x).ln()
    } else {
        ln_sinh(x) - x.ln()
    }
}

/// `coth x` for `x > 0`; a short series below `1e-4`.
pub fn coth(x: f64) -> f64 {
    if x < 1e-4 {
        1.0 / x + x / 3.0
    } else {
        1.0 + 2.0 / (2.0 * x).exp_m1()
    }
}

/// Inverse hyperbolic cosine written around `log1p`.
///
/// Arguments within `1e-12` below one are clamped to one; anything smaller
/// yields NaN.
pub fn arccosh(u: f64) -> f64 {
    let u = if (1.0 - 1e-12..1.0).contains(&u) { 1.0 } else { u };
    if !(u >= 1.0) {
        return f64::NAN;
    }
    if u > 1e150 {
        return u.ln() + LN_2;
    }
    let d = u - 1.0;
    (d + (d * (d + 2.0)).sqrt()).ln_1p()
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / core::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_sinh_matches_direct_form_where_both_work() {
        for &x in &[1e-6, 0.01, 0.3, 0.5, 1.0, 5.0, 30.0] {
            assert_relative_eq!(ln_sinh(x), x.sinh().ln(), max_relative = 1e-13);
        }
        assert_relative_eq!(ln_sinh(1000.0), 1000.0 - LN_2, max_relative = 1e-15);
    }

    #[test]
    fn coth_branches_meet() {
        let a = 1e-4 * (1.0 - 1e-12);
        let b = 1e-4;
        assert_relative_eq!(coth(a), coth(b), max_relative = 1e-10);
        assert_relative_eq!(coth(2.0), 1.0 / 2.0.tanh(), max_relative = 1e-15);
    }

    #[test]
    fn arccosh_clamps_noise_below_one() {
        assert_eq!(arccosh(1.0 - 5e-13), 0.0);
        assert!(arccosh(1.0 - 1e-9).is_nan());
        assert_relative_eq!(arccosh(1.5), 0.962_423_650_119_206_9, max_relative = 1e-14);
        assert_relative_eq!(arccosh(1e200), (1e200).ln() + LN_2, max_relative = 1e-15);
    }

    #[test]
    fn ln_add_exp_handles_extremes() {
        assert_relative_eq!(ln_add_exp(1000.0, 1000.0), 1000.0 + LN_2);
        assert_eq!(ln_add_exp(f64::NEG_INFINITY, -3.0), -3.0);
    }
}
