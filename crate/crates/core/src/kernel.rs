//! Heat kernels `k₂`, `k₃`, the two-sided bounds `h_n`, `g_n`, and the
//! radial transition density `p_n = ω_n k_n sinh^{n-1} η` where `ω_n` is
//! [`surface_area_coeff`].
//!
//! Everything is computed as a logarithm first and exponentiated once, so
//! `η` and `t` in the hundreds stay representable.

use alloc::vec::Vec;
use core::cell::RefCell;
use core::f64::consts::{LN_2, PI};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::geometry::{surface_area_coeff, Dimension, RadiusTime};
use crate::math::{ln_sinh, ln_sinhc};
use crate::quad::{integrate, integrate_log_space, LogIntegral, QuadratureConfig};

/// A dimension together with the radius and time at which a kernel, bound
/// or density is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelQuery {
    pub n: Dimension,
    pub rt: RadiusTime,
}

impl KernelQuery {
    pub fn new(n: u32, eta: f64, t: f64) -> Result<Self> {
        Ok(Self { n: Dimension::new(n)?, rt: RadiusTime::new(eta, t)? })
    }

    pub fn eta(&self) -> f64 {
        self.rt.eta
    }

    pub fn t(&self) -> f64 {
        self.rt.t
    }

    fn with_eta(&self, eta: f64) -> Result<Self> {
        Ok(Self { n: self.n, rt: RadiusTime::new(eta, self.t())? })
    }
}

/// A kernel value obtained by quadrature, kept as a logarithm with its
/// relative error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub ln_value: f64,
    pub rel_error: f64,
}

impl KernelValue {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }

    pub fn abs_error(&self) -> f64 {
        self.value() * self.rel_error
    }
}

fn require_dim(q: &KernelQuery, n: u32) -> Result<()> {
    if q.n.get() != n {
        return invalid(alloc::format!("kernel requires n = {n}, got n = {}", q.n.get()));
    }
    Ok(())
}

/// `ln k₃(η, t)`.
pub fn ln_k3(q: &KernelQuery) -> Result<f64> {
    require_dim(q, 3)?;
    let (eta, t) = (q.eta(), q.t());
    // η / sinh η = 1 / sinhc η, with the limit 1 at the origin.
    Ok(-t - 3.0 * LN_2 - 1.5 * (PI * t).ln() - eta * eta / (4.0 * t) - ln_sinhc(eta))
}

pub fn k3(q: &KernelQuery) -> Result<f64> {
    ln_k3(q).map(f64::exp)
}

/// `ln` of the `k₂` integrand after `φ = η + s²`, including the Jacobian
/// `2s`.
///
/// `cosh(η + s²) − cosh η = s² sinh(η + s²/2) sinhc(s²/2)` cancels the `s`
/// of the Jacobian against the square-root singularity exactly, so the
/// integrand is smooth at `s = 0`.
fn ln_k2_integrand(eta: f64, t: f64, s: f64) -> f64 {
    let u = s * s;
    let phi = eta + u;
    LN_2 + phi.ln() - phi * phi / (4.0 * t) - 0.5 * (ln_sinh(eta + 0.5 * u) + ln_sinhc(0.5 * u))
}

/// `k₂(η, t)` by adaptive quadrature; requires `η > 0`.
pub fn k2(q: &KernelQuery, cfg: &QuadratureConfig) -> Result<KernelValue> {
    require_dim(q, 2)?;
    cfg.validate()?;
    let (eta, t) = (q.eta(), q.t());
    if !(eta > 0.0) {
        return invalid("k2 requires η > 0");
    }

    // Truncation: the bound max(η, t) + σ√(2t), tightened to the
    // point where the Gaussian factor has dropped by abs_tol from φ = η.
    let phi_max = eta.max(t) + cfg.upper_truncation_sigma * (2.0 * t).sqrt();
    let drop = -cfg.abs_tol.ln() + 10.0;
    let u_gauss = -eta + (eta * eta + 4.0 * t * drop).sqrt();
    let s_max = (phi_max - eta).min(u_gauss).max(0.0).sqrt();

    let f = |s: f64| ln_k2_integrand(eta, t, s);
    let mut shift = f64::NEG_INFINITY;
    let mut s_peak = 0.0;
    const GRID: usize = 64;
    for i in 0..=GRID {
        let s = s_max * i as f64 / GRID as f64;
        let v = f(s);
        if v > shift {
            shift = v;
            s_peak = s;
        }
    }
    let mut points: Vec<f64> = [0.0, 0.125, 0.25, 0.5, 0.75, 1.0].iter().map(|r| r * s_max).collect();
    points.push(s_peak);
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();

    let r = match integrate(|s| (f(s) - shift).exp(), &points, cfg) {
        Ok(r) => r,
        Err(Error::Quadrature { estimate, abs_error }) => {
            let prefactor = (k2_ln_prefactor(t) + shift).exp();
            return Err(Error::Quadrature { estimate: estimate * prefactor, abs_error: abs_error * prefactor });
        }
        Err(e) => return Err(e),
    };
    Ok(KernelValue { ln_value: k2_ln_prefactor(t) + shift + r.value.ln(), rel_error: r.abs_error / r.value })
}

/// `ln(e^{-t/4} / (2^{5/2} (π t)^{3/2}))`.
fn k2_ln_prefactor(t: f64) -> f64 {
    -0.25 * t - 2.5 * LN_2 - 1.5 * (PI * t).ln()
}

/// `ln h_n(η, t)`.
pub fn ln_h_bound(q: &KernelQuery) -> f64 {
    let n = q.n.as_f64();
    let (eta, t) = (q.eta(), q.t());
    -0.5 * n * t.ln() - (n - 1.0) * (n - 1.0) * t / 4.0 - 0.5 * (n - 1.0) * eta - eta * eta / (4.0 * t)
        + 0.5 * (n - 3.0) * (1.0 + eta + t).ln()
        + eta.ln_1p()
}

pub fn h_bound(q: &KernelQuery) -> f64 {
    ln_h_bound(q).exp()
}

/// `ln g_n(η, t)`; `−∞` at `η = 0`.
pub fn ln_g_bound(q: &KernelQuery) -> f64 {
    let n = q.n.as_f64();
    let (eta, t) = (q.eta(), q.t());
    if eta == 0.0 {
        return f64::NEG_INFINITY;
    }
    let c = eta - (n - 1.0) * t;
    -0.5 * n * t.ln() + (n - 1.0) * (eta.ln() - eta.ln_1p()) - c * c / (4.0 * t)
        + 0.5 * (n - 3.0) * (1.0 + eta + t).ln()
        + eta.ln_1p()
}

pub fn g_bound(q: &KernelQuery) -> f64 {
    ln_g_bound(q).exp()
}

/// `ln(sinh^{n-1}η · k_n)` for the dimensions with an exact kernel.
fn ln_sinh_k(q: &KernelQuery, cfg: &QuadratureConfig) -> Result<f64> {
    let eta = q.eta();
    match q.n.get() {
        3 => {
            // sinh²η·k₃ = η sinh η e^{-t-η²/4t} / (8 (πt)^{3/2})
            if eta == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let t = q.t();
            Ok(eta.ln() + ln_sinh(eta) - t - eta * eta / (4.0 * t) - 3.0 * LN_2 - 1.5 * (PI * t).ln())
        }
        2 => {
            if eta == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            Ok(ln_sinh(eta) + k2(q, cfg)?.ln_value)
        }
        n => Err(Error::UnsupportedExactMode(n)),
    }
}

/// `ln p_n(η, t)` for `n ∈ {2, 3}`. Higher dimensions have no closed form;
/// use [`density_envelope`] there.
pub fn ln_radial_density(q: &KernelQuery, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(surface_area_coeff(q.n).ln() + ln_sinh_k(q, cfg)?)
}

pub fn radial_density(q: &KernelQuery, cfg: &QuadratureConfig) -> Result<f64> {
    ln_radial_density(q, cfg).map(f64::exp)
}

/// Certified envelope `(g_n / d̂, g_n · d̂)` for `p_n`.
///
/// `d̂` is a density sandwich constant as returned by
/// [`SandwichReport::density_constant`]: the surface-area factor is already
/// folded into it, which is how the constant enters the moment-generating
/// bound as well.
pub fn density_envelope(q: &KernelQuery, d_hat: f64) -> Result<(f64, f64)> {
    if !(d_hat >= 1.0) || !d_hat.is_finite() {
        return invalid("sandwich constant d_hat must be finite and ≥ 1");
    }
    let g = ln_g_bound(q);
    Ok(((g - d_hat.ln()).exp(), (g + d_hat.ln()).exp()))
}

/// One grid point of a sandwich scan. `ratio = sinh^{n-1}η·k_n / g_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub eta: f64,
    pub t: f64,
    pub k: f64,
    pub h: f64,
    pub g: f64,
    pub ratio: f64,
}

/// Empirical stand-in for the sandwich constants, taken over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub n: Dimension,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub grid: Vec<(f64, f64)>,
    pub rows: Vec<ScanRow>,
}

impl SandwichReport {
    /// Smallest `d ≥ 1` with `g_n/d ≤ p_n ≤ d·g_n` on the scanned grid.
    pub fn density_constant(&self) -> f64 {
        let w = surface_area_coeff(self.n);
        (w * self.ratio_max).max(1.0 / (w * self.ratio_min)).max(1.0)
    }

    /// Smallest `d ≥ 1` with `g_n/d ≤ sinh^{n-1}η·k_n ≤ d·g_n` on the grid.
    pub fn kernel_constant(&self) -> f64 {
        self.ratio_max.max(1.0 / self.ratio_min).max(1.0)
    }
}

/// Evaluates `sinh^{n-1}η·k_n / g_n` over `η_grid × t_grid` (`n ∈ {2, 3}`).
pub fn sandwich_scan(n: Dimension, eta_grid: &[f64], t_grid: &[f64], cfg: &QuadratureConfig) -> Result<SandwichReport> {
    sandwich_scan_with(n, eta_grid, t_grid, |q| scan_point(q, cfg))
}

/// Like [`sandwich_scan`] but with a caller-supplied evaluator, which lets
/// the grid be computed in parallel and merged in order.
pub fn sandwich_scan_with<F>(n: Dimension, eta_grid: &[f64], t_grid: &[f64], eval: F) -> Result<SandwichReport>
where
    F: Fn(&KernelQuery) -> Result<ScanRow>,
{
    if eta_grid.is_empty() || t_grid.is_empty() {
        return invalid("sandwich scan needs nonempty grids");
    }
    if eta_grid.iter().any(|&e| !(e > 0.0)) {
        return invalid("sandwich scan needs η > 0");
    }
    let mut rows = Vec::with_capacity(eta_grid.len() * t_grid.len());
    let mut grid = Vec::with_capacity(rows.capacity());
    for &eta in eta_grid {
        for &t in t_grid {
            let q = KernelQuery { n, rt: RadiusTime::new(eta, t)? };
            rows.push(eval(&q)?);
            grid.push((eta, t));
        }
    }
    Ok(report_from_rows(n, grid, rows))
}

pub fn report_from_rows(n: Dimension, grid: Vec<(f64, f64)>, rows: Vec<ScanRow>) -> SandwichReport {
    let ratio_min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let ratio_max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    SandwichReport { n, ratio_min, ratio_max, grid, rows }
}

/// Kernel, bounds and sandwich ratio at one query.
pub fn scan_point(q: &KernelQuery, cfg: &QuadratureConfig) -> Result<ScanRow> {
    let ln_k = match q.n.get() {
        3 => ln_k3(q)?,
        2 => k2(q, cfg)?.ln_value,
        n => return Err(Error::UnsupportedExactMode(n)),
    };
    let ln_ratio = ln_sinh_k(q, cfg)? - ln_g_bound(q);
    Ok(ScanRow { eta: q.eta(), t: q.t(), k: ln_k.exp(), h: h_bound(q), g: g_bound(q), ratio: ln_ratio.exp() })
}

/// Closed form of the `n = 3` sandwich ratio, `(1+η) sinh η e^{-η} / (8π^{3/2} η)`.
pub fn sandwich_ratio_3d(eta: f64) -> f64 {
    // sinh η e^{-η} / η = (1 − e^{-2η}) / (2η) = e^{-η}·sinhc η
    let core = if eta == 0.0 { 1.0 } else { -(-2.0 * eta).exp_m1() / (2.0 * eta) };
    (1.0 + eta) * core / (8.0 * PI.powf(1.5))
}

/// Quadrature configuration used for the `k₂` values nested inside an
/// outer integral over `η`.
pub fn inner_config(outer: &QuadratureConfig) -> QuadratureConfig {
    QuadratureConfig { rel_tol: (outer.rel_tol * 1e-2).max(1e-13), ..*outer }
}

/// `ln ∫_a^b p_n(η, t) dη` (`b = None` for `+∞`).
pub fn ln_density_mass(n: Dimension, t: f64, a: f64, b: Option<f64>, cfg: &QuadratureConfig) -> Result<LogIntegral> {
    ln_density_moment(n, t, a, b, 0.0, cfg)
}

/// `ln ∫_a^b e^{λη} p_n(η, t) dη`; the exponential tilt makes this the
/// building block of tails, moment-generating functions and means.
pub fn ln_density_moment(
    n: Dimension,
    t: f64,
    a: f64,
    b: Option<f64>,
    lambda: f64,
    cfg: &QuadratureConfig,
) -> Result<LogIntegral> {
    if !(t > 0.0) || !(a >= 0.0) {
        return invalid("density integral needs t > 0 and a ≥ 0");
    }
    if !matches!(n.get(), 2 | 3) {
        return Err(Error::UnsupportedExactMode(n.get()));
    }
    let inner = inner_config(cfg);
    let base = KernelQuery { n, rt: RadiusTime::new(0.0, t)? };
    let ln_f = |eta: f64| match base.with_eta(eta).and_then(|q| ln_radial_density(&q, &inner)) {
        Ok(v) => v + lambda * eta,
        Err(_) => f64::NAN,
    };
    let scale = (2.0 * t).sqrt().min(1.0 + t);
    let r = integrate_log_space(ln_f, a, b, scale, cfg)?;
    if r.ln_value.is_nan() {
        return Err(Error::Quadrature { estimate: f64::NAN, abs_error: f64::INFINITY });
    }
    Ok(r)
}

/// `∫₀^∞ p_n(η, t) dη`, which should equal 1.
pub fn normalization(n: Dimension, t: f64, cfg: &QuadratureConfig) -> Result<LogIntegral> {
    ln_density_mass(n, t, 0.0, None, cfg)
}

/// `P(D_n(t) ≤ x)`.
pub fn radial_cdf(n: Dimension, t: f64, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let below = ln_density_mass(n, t, 0.0, Some(x), cfg)?.value();
    let above = ln_density_mass(n, t, x, None, cfg)?.value();
    // Use the smaller side for accuracy, normalized by the computed total.
    Ok(if below <= above { below / (below + above) } else { 1.0 - above / (below + above) })
}

/// Tabulated CDF of `D_n(t)` for `n ∈ {2, 3}`.
///
/// Cell masses come from adaptive quadrature of `p_n`; between nodes the CDF
/// is the cubic Hermite interpolant with slopes `p_n`, whose error is far
/// below anything a goodness-of-fit test can resolve.
#[derive(Debug, Clone)]
pub struct CdfTable {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl CdfTable {
    pub fn new(n: Dimension, t: f64, cells: usize, cfg: &QuadratureConfig) -> Result<Self> {
        if !matches!(n.get(), 2 | 3) {
            return Err(Error::UnsupportedExactMode(n.get()));
        }
        if !(t > 0.0) || cells < 16 {
            return invalid("CDF table needs t > 0 and at least 16 cells");
        }
        let inner = inner_config(cfg);
        let hi = (n.as_f64() - 1.0) * t + 3.0 + 14.0 * (2.0 * t).sqrt();
        let base = KernelQuery { n, rt: RadiusTime::new(0.0, t)? };
        let p = |eta: f64| base.with_eta(eta).and_then(|q| radial_density(&q, &inner));
        let nodes: Vec<f64> = (0..=cells).map(|i| hi * i as f64 / cells as f64).collect();
        let mut cdf = Vec::with_capacity(nodes.len());
        let mut pdf = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        pdf.push(p(0.0)?);
        for w in nodes.windows(2) {
            let failure = RefCell::new(None);
            let r = integrate(
                |x| {
                    p(x).unwrap_or_else(|e| {
                        *failure.borrow_mut() = Some(e);
                        0.0
                    })
                },
                w,
                cfg,
            );
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            acc += r?.value;
            cdf.push(acc);
            pdf.push(p(w[1])?);
        }
        for (c, d) in cdf.iter_mut().zip(pdf.iter_mut()) {
            *c /= acc;
            *d /= acc;
        }
        Ok(Self { nodes, cdf, pdf })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let hi = *self.nodes.last().unwrap();
        if x <= 0.0 {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let h = self.nodes[1];
        let i = ((x / h) as usize).min(self.nodes.len() - 2);
        let s = (x - self.nodes[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (h00 * self.cdf[i] + h10 * h * self.pdf[i] + h01 * self.cdf[i + 1] + h11 * h * self.pdf[i + 1]).clamp(0.0, 1.0)
    }
}

/// Location of the maximum of `p₃(·, t)`: root of `1/η + coth η = η/(2t)`.
pub fn density_mode_3d(t: f64) -> f64 {
    let f = |e: f64| 1.0 / e + crate::math::coth(e) - e / (2.0 * t);
    let (mut lo, mut hi) = (1e-12, 2.0 * t + 4.0 + 2.0 * (2.0 * t).sqrt());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
