//! Large and moderate deviations of `D_n(t)/t`: rate functions, the
//! exponential-moment bound, numerical Legendre transforms, and tail
//! probabilities from quadrature or Monte Carlo.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::geometry::Dimension;
use crate::kernel::{ln_density_mass, ln_density_moment};
use crate::math::{erf, ln_gamma};
use crate::quad::{integrate, LogIntegral, QuadratureConfig};
use crate::stats::least_squares;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    /// `(x − (n−1))²/4` on `x ≥ 0`.
    I1,
    /// `x²/4` on ℝ.
    I2,
    /// `x²/2` on `x ≥ 0`.
    J1,
    /// `½(x − (2k+m)/2)²` on `x ≥ 0`.
    HiraoStar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFunctionSpec {
    pub kind: RateKind,
    pub n: Dimension,
    pub hirao_k: f64,
    pub hirao_m: f64,
}

impl RateFunctionSpec {
    pub fn i1(n: Dimension) -> Self {
        Self { kind: RateKind::I1, n, hirao_k: 0.0, hirao_m: n.as_f64() - 1.0 }
    }

    pub fn i2(n: Dimension) -> Self {
        Self { kind: RateKind::I2, ..Self::i1(n) }
    }

    pub fn j1(n: Dimension) -> Self {
        Self { kind: RateKind::J1, ..Self::i1(n) }
    }

    pub fn hirao_star(n: Dimension, k: f64, m: f64) -> Result<Self> {
        if !(k >= 0.0) || !(m > 0.0) {
            return invalid("Hirao parameters need k ≥ 0 and m > 0");
        }
        Ok(Self { kind: RateKind::HiraoStar, n, hirao_k: k, hirao_m: m })
    }
}

/// Value of a rate function; `f64::INFINITY` off its effective domain.
pub fn rate(spec: &RateFunctionSpec, x: f64) -> f64 {
    match spec.kind {
        RateKind::I2 => 0.25 * x * x,
        _ if x < 0.0 => f64::INFINITY,
        RateKind::I1 => {
            let c = x - (spec.n.as_f64() - 1.0);
            0.25 * c * c
        }
        RateKind::J1 => 0.5 * x * x,
        RateKind::HiraoStar => hirao_star_closed(x, spec.hirao_k, spec.hirao_m),
    }
}

/// `κ(λ) = λ(λ + n − 1)`.
pub fn kappa(lambda: f64, n: Dimension) -> f64 {
    lambda * (lambda + n.as_f64() - 1.0)
}

/// `Λ(λ)` with the flat branch below the knee `−(2k+m)/2`.
pub fn hirao_lambda_corrected(lambda: f64, k: f64, m: f64) -> f64 {
    let knee = -(2.0 * k + m) / 2.0;
    if lambda >= knee {
        hirao_lambda_uncorrected(lambda, k, m)
    } else {
        -0.5 * knee * knee
    }
}

/// `½λ(λ + 2k + m)` on all of ℝ.
pub fn hirao_lambda_uncorrected(lambda: f64, k: f64, m: f64) -> f64 {
    0.5 * lambda * (lambda + 2.0 * k + m)
}

/// `Λ*(x) = ½(x − (2k+m)/2)²` for `x ≥ 0`, `∞` otherwise.
pub fn hirao_star_closed(x: f64, k: f64, m: f64) -> f64 {
    if x < 0.0 {
        return f64::INFINITY;
    }
    let c = x - (2.0 * k + m) / 2.0;
    0.5 * c * c
}

/// `E[W^j]` for `W ~ N(μ, σ²)` by the recursion `m_j = μ m_{j−1} + (j−1)σ² m_{j−2}`.
pub fn gaussian_signed_moment(mu: f64, var: f64, j: u32) -> f64 {
    let (mut prev, mut cur) = (1.0, mu);
    if j == 0 {
        return 1.0;
    }
    for i in 2..=j {
        let next = mu * cur + f64::from(i - 1) * var * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `E|W|^j` for `W ~ N(μ, σ²)`: closed forms up to `j = 2`, quadrature
/// above (checked against the signed recursion when `j` is even).
pub fn gaussian_abs_moment(mu: f64, var: f64, j: u32) -> Result<f64> {
    if !(var > 0.0) || !mu.is_finite() {
        return invalid("Gaussian moment needs a finite mean and positive variance");
    }
    let sd = var.sqrt();
    match j {
        0 => Ok(1.0),
        1 => Ok(sd * (2.0 / PI).sqrt() * (-mu * mu / (2.0 * var)).exp() + mu * erf(mu / (sd * core::f64::consts::SQRT_2))),
        2 => Ok(mu * mu + var),
        _ => {
            let ln_norm = -0.5 * (2.0 * PI * var).ln();
            let f = |w: f64| {
                if w == 0.0 {
                    return 0.0;
                }
                (f64::from(j) * w.abs().ln() - (w - mu) * (w - mu) / (2.0 * var) + ln_norm).exp()
            };
            let reach = mu.abs() + sd * (12.0 + 2.0 * f64::from(j).sqrt());
            let mut points = alloc::vec![-reach, 0.0, reach];
            if mu != 0.0 && mu.abs() < reach {
                points.push(mu);
            }
            points.sort_by(f64::total_cmp);
            let cfg = QuadratureConfig { rel_tol: 1e-13, abs_tol: 1e-300, ..QuadratureConfig::default() };
            let v = integrate(f, &points, &cfg)?.value;
            if j % 2 == 0 {
                let exact = gaussian_signed_moment(mu, var, j);
                if (v - exact).abs() > 1e-8 * exact.abs() {
                    return Err(crate::Error::Quadrature { estimate: v, abs_error: (v - exact).abs() });
                }
                return Ok(exact);
            }
            Ok(v)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfBoundParams {
    pub lambda: f64,
    pub t: f64,
    pub n: Dimension,
    pub d_hat: f64,
}

impl MgfBoundParams {
    pub fn new(lambda: f64, t: f64, n: Dimension, d_hat: f64) -> Result<Self> {
        if !(t > 0.0) || !lambda.is_finite() || !(d_hat >= 1.0) || !d_hat.is_finite() {
            return invalid("MGF bound needs finite λ, t > 0 and d_hat ≥ 1");
        }
        Ok(Self { lambda, t, n, d_hat })
    }
}

/// The bound, in linear form when representable and as a logarithm when
/// it would overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MgfBound {
    Linear(f64),
    Log(f64),
}

impl MgfBound {
    pub fn ln_value(&self) -> f64 {
        match *self {
            Self::Linear(v) => v.ln(),
            Self::Log(l) => l,
        }
    }
}

/// `2√(2π/(2t)) d̂ t^{1−n/2} e^{κ(λ)t} Σ_{j=0}^{m} C(m,j) (1+nt)^{m−j} (2t)^j E|W_t|^j`
/// with `m = ⌈(n−1)/2⌉` and `W_t ~ N(λ, 1/(2t))`.
pub fn mgf_upper_bound(p: &MgfBoundParams) -> Result<MgfBound> {
    let n = p.n.as_f64();
    let t = p.t;
    let m = mgf_sum_order(p.n);
    let var = 1.0 / (2.0 * t);
    let mut terms = Vec::with_capacity(m as usize + 1);
    for j in 0..=m {
        let ln_binom = ln_gamma(f64::from(m) + 1.0) - ln_gamma(f64::from(j) + 1.0) - ln_gamma(f64::from(m - j) + 1.0);
        let moment = gaussian_abs_moment(p.lambda, var, j)?;
        terms.push(ln_binom + f64::from(m - j) * (1.0 + n * t).ln() + f64::from(j) * (2.0 * t).ln() + moment.ln());
    }
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_sum = peak + terms.iter().map(|l| (l - peak).exp()).sum::<f64>().ln();
    let ln_bound = 2f64.ln() + 0.5 * (PI / t).ln() + p.d_hat.ln() + (1.0 - 0.5 * n) * t.ln() + kappa(p.lambda, p.n) * t + ln_sum;
    Ok(if ln_bound < 700.0 { MgfBound::Linear(ln_bound.exp()) } else { MgfBound::Log(ln_bound) })
}

/// `m_n = ⌈(n−1)/2⌉`.
pub fn mgf_sum_order(n: Dimension) -> u32 {
    (n.get() - 1).div_ceil(2)
}

/// `ln E[e^{λ D_n(t)}]` by quadrature of the exact density (`n ∈ {2, 3}`).
pub fn mgf_quadrature(n: Dimension, lambda: f64, t: f64, cfg: &QuadratureConfig) -> Result<LogIntegral> {
    ln_density_moment(n, t, 0.0, None, lambda, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Legendre {
    Value(f64),
    /// The supremum grows without bound along the grid edge.
    Diverged,
}

impl Legendre {
    /// `∞` for [`Legendre::Diverged`].
    pub fn value(&self) -> f64 {
        match *self {
            Self::Value(v) => v,
            Self::Diverged => f64::INFINITY,
        }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// `sup_λ {λx − f(λ)}` over a sorted grid of at least 64 points, refined
/// by golden-section search in the bracket around the best grid point.
pub fn legendre_transform<F: Fn(f64) -> f64>(f: F, x: f64, grid: &[f64]) -> Result<Legendre> {
    if grid.len() < 64 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("Legendre transform needs a sorted grid of at least 64 points");
    }
    let g = |l: f64| l * x - f(l);
    let vals: Vec<f64> = grid.iter().map(|&l| g(l)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return invalid("objective is not finite on the grid");
    }
    let best = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(b.cmp(&a))).unwrap();
    let last = vals.len() - 1;
    let tol = 1e-12 * (1.0 + vals[best].abs());
    if (best == 0 && vals[0] > vals[1] + tol) || (best == last && vals[last] > vals[last - 1] + tol) {
        return Ok(Legendre::Diverged);
    }
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(last)]);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while (b - a).abs() > 1e-10 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - GOLDEN * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + GOLDEN * (b - a);
            gd = g(d);
        }
    }
    Ok(Legendre::Value(g(0.5 * (a + b)).max(vals[best])))
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// One row of the comparison between the closed-form and numerical `Λ*`
/// and `2I₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiraoRow {
    pub x: f64,
    pub lambda_star_closed: f64,
    pub lambda_star_numeric: f64,
    pub two_i1: f64,
    pub discrepancy: f64,
}

/// Rows at each `x`; the real hyperbolic space corresponds to
/// `(k, m) = (0, n−1)`.
pub fn hirao_discrepancy(n: Dimension, k: f64, m: f64, xs: &[f64], lambda_grid: &[f64]) -> Result<Vec<HiraoRow>> {
    let i1 = RateFunctionSpec::i1(n);
    xs.iter()
        .map(|&x| {
            let closed = hirao_star_closed(x, k, m);
            let numeric = legendre_transform(|l| hirao_lambda_corrected(l, k, m), x, lambda_grid)?.value();
            let two_i1 = 2.0 * rate(&i1, x);
            Ok(HiraoRow { x, lambda_star_closed: closed, lambda_star_numeric: numeric, two_i1, discrepancy: (closed - two_i1).abs() })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    Above,
    Below,
}

/// `ln P(D_n(t)/t ≥ x)` or `ln P(D_n(t)/t ≤ x)` from the exact density.
pub fn ldp_tail_quadrature(n: Dimension, t: f64, x: f64, side: TailSide, cfg: &QuadratureConfig) -> Result<LogIntegral> {
    if !(t > 0.0) || !(x >= 0.0) || !x.is_finite() {
        return invalid("tail probability needs t > 0 and a finite threshold x ≥ 0");
    }
    match side {
        TailSide::Above => ln_density_mass(n, t, x * t, None, cfg),
        TailSide::Below => ln_density_mass(n, t, 0.0, Some(x * t), cfg),
    }
}

/// Models for the limit of a scaled log-probability `y(v)` as the speed
/// `v → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// `a + b·ln(v)/v`.
    LogOverSpeed,
    /// `a + b·ln(v)/v + c/v`: the log prefactor of the density and the
    /// constant normalisation both contribute at this order.
    LogOverSpeedWithConstant,
    /// `a + b/v`.
    InverseSpeed,
}

/// Least-squares estimate of the limit `a`.
pub fn extrapolate(model: Extrapolation, speeds: &[f64], ys: &[f64]) -> Result<f64> {
    let rows: Vec<Vec<f64>> = speeds
        .iter()
        .map(|&v| match model {
            Extrapolation::LogOverSpeed => alloc::vec![1.0, v.ln() / v],
            Extrapolation::LogOverSpeedWithConstant => alloc::vec![1.0, v.ln() / v, 1.0 / v],
            Extrapolation::InverseSpeed => alloc::vec![1.0, 1.0 / v],
        })
        .collect();
    Ok(least_squares(&rows, ys)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub t: f64,
    pub ln_tail_prob: f64,
    pub scaled_log: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub target: f64,
    pub extrapolated: f64,
    /// The two-parameter `a + b·ln(v)/v` fit, for comparison.
    pub extrapolated_two_param: f64,
}

fn rate_report(rows: Vec<RateRow>, speeds: &[f64], target: f64) -> Result<RateReport> {
    let ys: Vec<f64> = rows.iter().map(|r| r.scaled_log).collect();
    let two = extrapolate(Extrapolation::LogOverSpeed, speeds, &ys)?;
    let extrapolated =
        if rows.len() >= 3 { extrapolate(Extrapolation::LogOverSpeedWithConstant, speeds, &ys)? } else { two };
    Ok(RateReport { rows, target, extrapolated, extrapolated_two_param: two })
}

/// `(1/t) ln P(D_n(t)/t ≥ x)` (or `≤ x`) along `t_grid`, with its
/// extrapolated limit; the target is `−I₁(x)`.
pub fn ldp_rate_estimate(n: Dimension, x: f64, side: TailSide, t_grid: &[f64], cfg: &QuadratureConfig) -> Result<RateReport> {
    if t_grid.len() < 2 {
        return invalid("rate estimate needs at least two times");
    }
    let target = -rate(&RateFunctionSpec::i1(n), x);
    let rows = t_grid
        .iter()
        .map(|&t| {
            let l = ldp_tail_quadrature(n, t, x, side, cfg)?.ln_value;
            Ok(RateRow { t, ln_tail_prob: l, scaled_log: l / t, target })
        })
        .collect::<Result<Vec<_>>>()?;
    rate_report(rows, t_grid, target)
}

/// Moderate-deviation exponent `β ∈ (0, ½)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModerateScale(f64);

impl ModerateScale {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 0.5) {
            return invalid("β must lie in (0, 1/2)");
        }
        Ok(Self(beta))
    }

    pub fn beta(&self) -> f64 {
        self.0
    }

    /// Speed `t^{1−2β}`.
    pub fn speed(&self, t: f64) -> f64 {
        t.powf(1.0 - 2.0 * self.0)
    }
}

/// `t^{2β−1} ln P(t^{β−1}(D_n(t) − (n−1)t) ≥ x)` along `t_grid` (the lower
/// tail `≤ x` when `x < 0`), with its extrapolated limit; the target is
/// `−x²/4`.
pub fn mdp_rate_estimate(
    n: Dimension,
    scale: ModerateScale,
    x: f64,
    t_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<RateReport> {
    if t_grid.len() < 3 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("MDP estimate needs an increasing grid of at least 3 times");
    }
    if !x.is_finite() {
        return invalid("MDP threshold must be finite");
    }
    let target = -0.25 * x * x;
    let beta = scale.beta();
    let mut speeds = Vec::with_capacity(t_grid.len());
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let threshold = (n.as_f64() - 1.0) * t + x * t.powf(1.0 - beta);
        if !(threshold > 0.0) {
            return invalid("MDP threshold falls below zero at this t");
        }
        let l = if x >= 0.0 {
            ln_density_mass(n, t, threshold, None, cfg)?
        } else {
            ln_density_mass(n, t, 0.0, Some(threshold), cfg)?
        }
        .ln_value;
        let v = scale.speed(t);
        speeds.push(v);
        rows.push(RateRow { t, ln_tail_prob: l, scaled_log: l / v, target });
    }
    rate_report(rows, &speeds, target)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRateRow {
    pub t: f64,
    pub hits: u64,
    pub trials: u64,
    pub scaled_log: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fewer than 10 hits: the point is kept but unreliable.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRateReport {
    pub rows: Vec<McRateRow>,
    /// Times dropped for having no hits at all.
    pub dropped: Vec<f64>,
    /// `a` from a least-squares fit `a + b/t`; `None` with fewer than two
    /// usable points.
    pub extrapolated: Option<f64>,
}

/// Monte Carlo counterpart of [`ldp_rate_estimate`]: for each `(t, samples)`
/// the scaled log of the fraction of samples in the event, with a normal
/// approximation interval on the binomial count (mapped through the log).
pub fn empirical_rate_from_mc<E: Fn(f64, f64) -> bool>(
    groups: &[(f64, &[f64])],
    event: E,
    speed_exponent: f64,
) -> Result<McRateReport> {
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for &(t, samples) in groups {
        if !(t > 0.0) || samples.is_empty() {
            return invalid("each group needs t > 0 and at least one sample");
        }
        let hits = samples.iter().filter(|&&d| event(t, d)).count() as u64;
        let trials = samples.len() as u64;
        if hits == 0 {
            dropped.push(t);
            continue;
        }
        let v = t.powf(speed_exponent);
        let (p, lo, hi) = crate::stats::binomial_interval(hits, trials, 1.96);
        let scaled = p.ln() / v;
        let ci_low = if lo > 0.0 { lo.ln() / v } else { f64::NEG_INFINITY };
        rows.push(McRateRow { t, hits, trials, scaled_log: scaled, ci_low, ci_high: hi.min(1.0).ln() / v, flagged: hits < 10 });
    }
    let extrapolated = if rows.len() >= 2 {
        let ts: Vec<f64> = rows.iter().map(|r| r.t.powf(speed_exponent)).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.scaled_log).collect();
        Some(extrapolate(Extrapolation::InverseSpeed, &ts, &ys)?)
    } else {
        None
    };
    Ok(McRateReport { rows, dropped, extrapolated })
}

/// `{x : I₁(x) ≤ γ} = [max(0, n−1−2√γ), n−1+2√γ]`.
pub fn i1_level_set(n: Dimension, gamma: f64) -> Result<(f64, f64)> {
    if !(gamma >= 0.0) {
        return invalid("level must be non-negative");
    }
    let c = n.as_f64() - 1.0;
    let r = 2.0 * gamma.sqrt();
    Ok(((c - r).max(0.0), c + r))
}
