//! Probabilities that hyperbolic Brownian motion started at distance `η`
//! ever enters the ball of radius `η₁`, and their exponential decay in `η`.
//!
//! The closed forms are ratios `u_n(η)/u_n(η₁)` of radial harmonic
//! functions built from `cosh η / sinh^m η`, `1 − coth η` and
//! `log tanh(η/2)`. For large `η` each of those is of order `e^{−η}` while
//! `u_n` is of order `e^{−(n−1)η}`, so evaluating them directly cancels
//! catastrophically. The stable path expands `u_n` in `q = e^{−η}` with
//! exact rational coefficients: everything below degree `n−1` cancels
//! exactly, and the remaining series is summed in floating point.

use alloc::vec::Vec;
use num_bigint::BigInt;
use num_rational::BigRational;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{invalid, Result};
use crate::geometry::Dimension;

/// Below this distance the direct formula is used (and cross-checked);
/// above it only the `q`-series is trustworthy.
pub const ETA_SWITCH: f64 = 12.0;

/// Below this distance the `q`-series converges too slowly to serve as a
/// cross-check.
const SERIES_MIN_ETA: f64 = 1.0;

/// Relative disagreement between the two paths that raises a warning.
const WARN_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingQuery {
    pub n: Dimension,
    pub eta1: f64,
    pub eta: f64,
}

impl HittingQuery {
    pub fn new(n: u32, eta1: f64, eta: f64) -> Result<Self> {
        let n = Dimension::new(n)?;
        if !(eta1 > 0.0) || !eta.is_finite() || !(eta > eta1) {
            return invalid("hitting query needs η > η₁ > 0");
        }
        Ok(Self { n, eta1, eta })
    }
}

/// Truncation control for the exponential series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesBudget {
    /// Maximum number of terms.
    pub terms: u32,
    /// Stop once a term falls below this, relative to the leading term.
    pub tail_tol: f64,
}

impl Default for SeriesBudget {
    fn default() -> Self {
        Self { terms: 2000, tail_tol: 1e-18 }
    }
}

impl SeriesBudget {
    pub fn new(terms: u32, tail_tol: f64) -> Result<Self> {
        if terms == 0 || !(tail_tol > 0.0) {
            return invalid("series budget needs K ≥ 1 and a positive tail tolerance");
        }
        Ok(Self { terms, tail_tol })
    }
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `c(n, k) = (n−3)(n−5)⋯(n−2k−1) / ((n−4)(n−6)⋯(n−2k−2))`.
pub fn c_coeff(n: Dimension, k: u32) -> Result<BigRational> {
    let n = n.get();
    if n < 4 {
        return invalid("c(n, k) is defined for n ≥ 4");
    }
    let k_max = if n % 2 == 0 { (n - 4) / 2 } else { (n - 5) / 2 };
    if k > k_max {
        return invalid(alloc::format!("c({n}, k) needs k ≤ {k_max}"));
    }
    let n = i64::from(n);
    Ok((1..=i64::from(k)).fold(BigRational::one(), |acc, i| acc * ratio(n - 2 * i - 1, n - 2 * i - 2)))
}

/// `(n−3)!! / (n−4)!!`, with `0!! = (−1)!! = 1`.
pub fn double_factorial_ratio(n: Dimension) -> Result<BigRational> {
    let n = i64::from(n.get());
    if n < 4 {
        return invalid("the double-factorial ratio is used for n ≥ 4");
    }
    let df = |m: i64| (1..=m).rev().step_by(2).fold(BigInt::one(), |acc, x| acc * BigInt::from(x));
    Ok(BigRational::new(df(n - 3), df(n - 4)))
}

/// `log tanh(η/2)` with an error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub error_bound: f64,
    pub terms_used: u32,
}

/// `Σ_{k=1}^{K} q^{2k−1}/(2k−1)` with `q = e^{−η}`.
pub fn series_partial_sum(eta: f64, terms: u32) -> f64 {
    let q = (-eta).exp();
    let q2 = q * q;
    let mut parts = Vec::with_capacity(terms as usize);
    let mut p = q;
    for k in 1..=terms {
        parts.push(p / f64::from(2 * k - 1));
        p *= q2;
    }
    parts.iter().rev().sum()
}

/// `log tanh(η/2) = −2 Σ_{k≥1} e^{−(2k−1)η}/(2k−1)`.
///
/// For `η ≥ 1` the series is summed until a term drops below `tail_tol`
/// (or `K` terms), and the geometric tail bound is reported; below 1 the
/// logarithm is evaluated directly.
pub fn log_tanh_half(eta: f64, budget: &SeriesBudget) -> Result<SeriesValue> {
    if !(eta > 0.0) {
        return invalid("log tanh(η/2) needs η > 0");
    }
    if eta < 1.0 {
        return Ok(SeriesValue { value: (0.5 * eta).tanh().ln(), error_bound: 4.0 * f64::EPSILON, terms_used: 0 });
    }
    let q = (-eta).exp();
    let q2 = q * q;
    let mut parts = Vec::new();
    let mut p = q;
    let mut k = 1u32;
    loop {
        let term = p / f64::from(2 * k - 1);
        parts.push(term);
        p *= q2;
        let next = p / f64::from(2 * k + 1);
        if k >= budget.terms || next < budget.tail_tol {
            let sum: f64 = parts.iter().rev().sum();
            let tail = next / (1.0 - q2);
            return Ok(SeriesValue {
                value: -2.0 * sum,
                error_bound: 2.0 * tail + 2.0 * f64::EPSILON * sum,
                terms_used: k,
            });
        }
        k += 1;
    }
}

/// `e^{−η} ≤ Σ ≤ e^{−η}/(1 − e^{−2η})` for the series in [`log_tanh_half`].
pub fn series_bracket(eta: f64) -> (f64, f64) {
    let q = (-eta).exp();
    (q, q / -(-2.0 * eta).exp_m1())
}

/// The sharper bracket `e^{−η} + e^{−3η}/3 ≤ Σ ≤ e^{−η} + e^{−3η}/3 +
/// e^{−5η}/(1 − e^{−2η})`.
pub fn refined_series_bracket(eta: f64) -> Result<(f64, f64)> {
    if !(eta > 0.0) {
        return invalid("series bracket needs η > 0");
    }
    let q = (-eta).exp();
    let lower = q + q * q * q / 3.0;
    Ok((lower, lower + q.powi(5) / -(-2.0 * eta).exp_m1()))
}

fn binomial(n: u64, k: u64) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

/// Coefficient of `q^j` in `cosh η / sinh^m η = 2^{m−1} q^{m−1} (1+q²) Σ_i C(m−1+i, i) q^{2i}`.
fn cosh_over_sinh_pow(m: u64, j: u64) -> BigInt {
    if j + 1 < m || (j + 1 - m) % 2 == 1 {
        return BigInt::zero();
    }
    let i = (j + 1 - m) / 2;
    let mut c = binomial(m - 1 + i, i);
    if i >= 1 {
        c += binomial(m - 2 + i, i - 1);
    }
    c << (m - 1)
}

/// Coefficient of `q^j` in `log tanh(η/2) = −2 Σ q^{2k−1}/(2k−1)`.
fn log_tanh_coeff(j: u64) -> BigRational {
    if j % 2 == 1 {
        ratio(-2, j as i64)
    } else {
        BigRational::zero()
    }
}

/// Coefficient of `q^j` in `1 − coth η = −2 Σ_{k≥1} q^{2k}`.
fn one_minus_coth_coeff(j: u64) -> BigRational {
    if j >= 2 && j % 2 == 0 {
        ratio(-2, 1)
    } else {
        BigRational::zero()
    }
}

/// The radial harmonic function whose ratio gives the hitting probability,
/// as exact pieces.
#[derive(Debug, Clone)]
pub struct Potential {
    n: u32,
    /// `(coefficient, m)` for each `cosh/sinh^m` term.
    powers: Vec<(BigRational, u64)>,
    /// Coefficient of `log tanh(η/2)` (even `n`) or `1 − coth η` (odd `n`).
    tail: BigRational,
}

impl Potential {
    pub fn new(n: Dimension) -> Result<Self> {
        let nn = n.get();
        let (powers, tail) = match nn {
            2 | 3 => (Vec::new(), BigRational::one()),
            _ => {
                let k_max = if nn % 2 == 0 { (nn - 4) / 2 } else { (nn - 5) / 2 };
                let mut powers = Vec::new();
                for k in 0..=k_max {
                    let sign = if k % 2 == 0 { BigRational::one() } else { -BigRational::one() };
                    powers.push((sign * c_coeff(n, k)?, u64::from(nn - 2 * k - 2)));
                }
                let exponent = if nn % 2 == 0 { nn / 2 } else { (nn - 5) / 2 };
                let sign = if exponent % 2 == 0 { BigRational::one() } else { -BigRational::one() };
                (powers, sign * double_factorial_ratio(n)?)
            }
        };
        Ok(Self { n: nn, powers, tail })
    }

    /// Exact coefficient of `q^j` in the expansion of `u_n` in `q = e^{−η}`.
    pub fn coefficient(&self, j: u64) -> BigRational {
        let mut c = if self.n % 2 == 0 { log_tanh_coeff(j) } else { one_minus_coth_coeff(j) } * &self.tail;
        for (a, m) in &self.powers {
            c += a * BigRational::from_integer(cosh_over_sinh_pow(*m, j));
        }
        c
    }

    /// Direct evaluation of `u_n(η)` together with the sum of the absolute
    /// values of its terms (the cancellation condition number numerator).
    pub fn naive(&self, eta: f64) -> (f64, f64) {
        let tail_fn = if self.n % 2 == 0 { (0.5 * eta).tanh().ln() } else { 1.0 - eta.cosh() / eta.sinh() };
        let tail_coeff = self.tail.to_f64().unwrap_or(f64::NAN);
        let tail = tail_coeff * tail_fn;
        let mut value = tail;
        // The tail function is itself a difference of quantities near 1
        // (`1 − coth η`, or the log of `tanh(η/2)`), so its absolute error
        // is of order one ulp of 1, not of its value.
        let mut magnitude = tail_coeff.abs() * tail_fn.abs().max(1.0);
        for (a, m) in &self.powers {
            let term = a.to_f64().unwrap_or(f64::NAN) * eta.cosh() / eta.sinh().powi(*m as i32);
            value += term;
            magnitude += term.abs();
        }
        (value, magnitude)
    }

    /// `(ln|u_n(η)|, sign)` from the `q`-series.
    pub fn stable(&self, eta: f64, budget: &SeriesBudget) -> Result<(f64, f64)> {
        if !(eta > 0.0) {
            return invalid("the potential needs η > 0");
        }
        let q = (-eta).exp();
        let lead = u64::from(self.n - 1);
        let mut terms: Vec<f64> = Vec::new();
        let mut qi = 1.0;
        let mut scale = 0.0f64;
        let mut small_run = 0;
        for i in 0..u64::from(budget.terms) {
            let a = self.coefficient(lead + i).to_f64().unwrap_or(f64::NAN);
            let term = a * qi;
            terms.push(term);
            scale = scale.max(term.abs());
            if scale > 0.0 && term.abs() < budget.tail_tol * scale {
                small_run += 1;
                // Coefficients of one parity vanish, so require several
                // consecutive small terms before stopping.
                if small_run >= 4 {
                    break;
                }
            } else {
                small_run = 0;
            }
            qi *= q;
            if qi == 0.0 {
                break;
            }
        }
        let sum: f64 = terms.iter().rev().sum();
        if sum == 0.0 || !sum.is_finite() {
            return invalid("series for the potential did not converge");
        }
        Ok((-(lead as f64) * eta + sum.abs().ln(), sum.signum()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPath {
    Naive,
    Stable,
}

/// One evaluation of `u_n` with the path that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValue {
    pub ln_abs: f64,
    pub sign: f64,
    pub path: EvalPath,
    pub warning: bool,
}

/// `u_n(η)`: the `q`-series at and above [`ETA_SWITCH`]; below it the
/// direct formula, cross-checked against the series where that converges.
/// On a disagreement above `1e-6` the series value is returned with a
/// warning.
pub fn potential(u: &Potential, eta: f64, budget: &SeriesBudget) -> Result<PotentialValue> {
    if eta >= ETA_SWITCH {
        let (ln_abs, sign) = u.stable(eta, budget)?;
        return Ok(PotentialValue { ln_abs, sign, path: EvalPath::Stable, warning: false });
    }
    let (naive, _) = u.naive(eta);
    if eta >= SERIES_MIN_ETA {
        let (ln_abs, sign) = u.stable(eta, budget)?;
        let stable = sign * ln_abs.exp();
        if !((naive - stable).abs() <= WARN_REL * stable.abs()) {
            return Ok(PotentialValue { ln_abs, sign, path: EvalPath::Stable, warning: true });
        }
    }
    if naive == 0.0 || !naive.is_finite() {
        return invalid("direct evaluation of the potential failed");
    }
    Ok(PotentialValue { ln_abs: naive.abs().ln(), sign: naive.signum(), path: EvalPath::Naive, warning: false })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingResult {
    pub probability: f64,
    pub ln_probability: f64,
    /// The numerator and denominator paths disagreed somewhere.
    pub warning: bool,
    /// Path used for the numerator `u_n(η)`.
    pub path: EvalPath,
}

/// `P_η(T_{η₁} < ∞) = u_n(η) / u_n(η₁)`.
pub fn hitting_probability(q: &HittingQuery, budget: &SeriesBudget) -> Result<HittingResult> {
    let u = Potential::new(q.n)?;
    let num = potential(&u, q.eta, budget)?;
    let den = potential(&u, q.eta1, budget)?;
    if num.sign != den.sign {
        return invalid("potential changed sign between η₁ and η");
    }
    let ln_p = (num.ln_abs - den.ln_abs).min(0.0);
    Ok(HittingResult {
        probability: ln_p.exp(),
        ln_probability: ln_p,
        warning: num.warning || den.warning,
        path: num.path,
    })
}

/// The direct formula alone, for demonstrating where it breaks down.
/// Returns `None` when it does not even produce a probability; a returned
/// value may still be meaningless after cancellation.
pub fn hitting_probability_naive(q: &HittingQuery) -> Result<Option<f64>> {
    let u = Potential::new(q.n)?;
    let (a, _) = u.naive(q.eta);
    let (b, _) = u.naive(q.eta1);
    let p = a / b;
    Ok(if p > 0.0 && p <= 1.0 && p.is_finite() { Some(p) } else { None })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub eta: f64,
    pub probability: f64,
    pub ln_probability: f64,
    pub slope: f64,
    pub warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub n: Dimension,
    pub rows: Vec<DecayRow>,
    /// `(1/η) log P` at the largest grid point.
    pub final_slope: f64,
    pub target: f64,
    pub warning: bool,
}

/// `(1/η) log P_η(T_{η₁} < ∞)` along an increasing grid reaching at least
/// 20; the limit is conjectured to be `−(n−1)`.
pub fn decay_rate(n: Dimension, eta_grid: &[f64], eta1: f64, budget: &SeriesBudget) -> Result<DecayReport> {
    if eta_grid.is_empty() || eta_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("η grid must be nonempty and increasing");
    }
    if !(eta_grid[eta_grid.len() - 1] >= 20.0) {
        return invalid("η grid must reach at least 20");
    }
    let mut rows = Vec::with_capacity(eta_grid.len());
    for &eta in eta_grid {
        let r = hitting_probability(&HittingQuery::new(n.get(), eta1, eta)?, budget)?;
        rows.push(DecayRow {
            eta,
            probability: r.probability,
            ln_probability: r.ln_probability,
            slope: r.ln_probability / eta,
            warning: r.warning,
        });
    }
    let final_slope = rows[rows.len() - 1].slope;
    let warning = rows.iter().any(|r| r.warning);
    Ok(DecayReport { n, rows, final_slope, target: -(n.as_f64() - 1.0), warning })
}

/// Euclidean counterpart: `1` for `n = 2`, `(r/r₁)^{2−n}` for `n ≥ 3`.
pub fn euclidean_hitting(n: Dimension, r1: f64, r: f64) -> Result<f64> {
    if !(r1 > 0.0) || !(r > r1) || !r.is_finite() {
        return invalid("Euclidean hitting needs r > r₁ > 0");
    }
    let e = 2 - n.get() as i32;
    Ok(if e == 0 { 1.0 } else { r.powi(e) / r1.powi(e) })
}

/// `(1/log r) log P`, which tends to `−(n−2)`.
pub fn euclidean_decay_slope(n: Dimension, r1: f64, r: f64) -> Result<f64> {
    let p = euclidean_hitting(n, r1, r)?;
    Ok(p.ln() / r.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn c_coeff_examples() {
        assert_eq!(c_coeff(dim(8), 0).unwrap(), BigRational::one());
        assert_eq!(c_coeff(dim(6), 1).unwrap(), ratio(3, 2));
        assert_eq!(c_coeff(dim(7), 1).unwrap(), ratio(4, 3));
        assert!(c_coeff(dim(6), 2).is_err());
        assert!(c_coeff(dim(5), 1).is_err());
        assert!(c_coeff(dim(3), 0).is_err());
    }

    #[test]
    fn double_factorials() {
        assert_eq!(double_factorial_ratio(dim(4)).unwrap(), ratio(1, 1));
        assert_eq!(double_factorial_ratio(dim(5)).unwrap(), ratio(2, 1));
        assert_eq!(double_factorial_ratio(dim(6)).unwrap(), ratio(3, 2));
        assert_eq!(double_factorial_ratio(dim(7)).unwrap(), ratio(8, 3));
    }

    #[test]
    fn low_degree_coefficients_cancel_exactly() {
        for n in 2..=9 {
            let u = Potential::new(dim(n)).unwrap();
            for j in 0..u64::from(n - 1) {
                assert!(u.coefficient(j).is_zero(), "n = {n}, j = {j}");
            }
            assert!(!u.coefficient(u64::from(n - 1)).is_zero());
        }
    }

    #[test]
    fn leading_coefficients() {
        let expect = [(2, ratio(-2, 1)), (3, ratio(-2, 1)), (4, ratio(16, 3)), (5, ratio(12, 1)), (7, ratio(160, 3))];
        for (n, c) in expect {
            let u = Potential::new(dim(n)).unwrap();
            assert_eq!(u.coefficient(u64::from(n - 1)), c, "n = {n}");
        }
    }

    #[test]
    fn log_tanh_series_matches_direct() {
        let budget = SeriesBudget::new(3, 1e-30).unwrap();
        let v = log_tanh_half(5.0, &budget).unwrap();
        assert!((v.value - (2.5f64).tanh().ln()).abs() < 1e-7);
        let v = log_tanh_half(1.0, &SeriesBudget::default()).unwrap();
        assert_relative_eq!(v.value, (0.5f64).tanh().ln(), max_relative = 1e-14);
        assert!(v.error_bound < 1e-14);
    }

    #[test]
    fn brackets_contain_the_series() {
        for &eta in &[0.3, 1.0, 2.0, 5.0, 10.0] {
            let s = series_partial_sum(eta, 200);
            let (lo, hi) = series_bracket(eta);
            assert!(lo <= s && s <= hi * (1.0 + 1e-15));
            let (rlo, rhi) = refined_series_bracket(eta).unwrap();
            assert!(rlo <= s * (1.0 + 1e-15) && s <= rhi * (1.0 + 1e-15));
            assert!(rlo > lo);
        }
    }

    #[test]
    fn closed_form_examples() {
        let b = SeriesBudget::default();
        let p2 = hitting_probability(&HittingQuery::new(2, 1.0, 2.0).unwrap(), &b).unwrap();
        let direct2 = (1.0f64).tanh().ln() / (0.5f64).tanh().ln();
        assert_relative_eq!(p2.probability, direct2, max_relative = 1e-12);
        let p3 = hitting_probability(&HittingQuery::new(3, 1.0, 2.0).unwrap(), &b).unwrap();
        let coth = |x: f64| 1.0 / x.tanh();
        assert_relative_eq!(p3.probability, (1.0 - coth(2.0)) / (1.0 - coth(1.0)), max_relative = 1e-12);
        assert!(!p2.warning && !p3.warning);
    }

    #[test]
    fn approaches_one_at_the_boundary() {
        let b = SeriesBudget::default();
        for n in 2..=7 {
            let p = hitting_probability(&HittingQuery::new(n, 1.0, 1.0 + 1e-8).unwrap(), &b).unwrap();
            assert!(p.probability < 1.0 && p.probability > 1.0 - 1e-6, "n = {n}");
        }
    }

    #[test]
    fn stable_path_at_large_eta() {
        let b = SeriesBudget::default();
        let r = hitting_probability(&HittingQuery::new(5, 1.0, 40.0).unwrap(), &b).unwrap();
        assert_eq!(r.path, EvalPath::Stable);
        assert!(r.probability > 0.0);
        assert!((r.ln_probability / 40.0 + 4.0).abs() < 0.1);
        let naive = hitting_probability_naive(&HittingQuery::new(5, 1.0, 40.0).unwrap()).unwrap();
        assert!(naive.map_or(true, |p| (p / r.probability - 1.0).abs() > 1.0));
    }

    #[test]
    fn decay_grid_must_reach_twenty() {
        let b = SeriesBudget::default();
        assert!(decay_rate(dim(3), &[5.0, 10.0], 1.0, &b).is_err());
        let r = decay_rate(dim(3), &[10.0, 20.0, 40.0], 1.0, &b).unwrap();
        assert!((r.final_slope + 2.0).abs() < 0.05);
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean_hitting(dim(2), 1.0, 7.0).unwrap(), 1.0);
        assert_relative_eq!(euclidean_hitting(dim(3), 1.0, 2.0).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(euclidean_hitting(dim(4), 1.0, 10.0).unwrap(), 0.01, max_relative = 1e-15);
        assert!(euclidean_hitting(dim(3), 2.0, 1.0).is_err());
    }
}
