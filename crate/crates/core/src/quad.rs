//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Callers map infinite ranges to finite ones themselves; every integrand in
//! this crate has Gaussian decay, so truncation points are chosen by the
//! caller from its own scale.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for the adaptive integrator and for the tail truncation used
/// by the kernel integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Multiples of `sqrt(2t)` kept beyond the Gaussian peak before cutting.
    pub upper_truncation_sigma: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-15,
            rel_tol: 1e-11,
            max_subdivisions: 4000,
            upper_truncation_sigma: 12.0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol < 1.0) {
            return invalid("abs_tol must lie in (0, 1)");
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return invalid("rel_tol must lie in (0, 1)");
        }
        if self.max_subdivisions < 8 {
            return invalid("max_subdivisions must be at least 8");
        }
        if !(self.upper_truncation_sigma > 0.0) {
            return invalid("upper_truncation_sigma must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut gauss = fc * WG[3];
    let mut kronrod = fc * WGK[7];
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..3 {
        let k = 2 * j + 1;
        let dx = half * XGK[k];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[k] = f1;
        fv2[k] = f2;
        gauss += WG[j] * (f1 + f2);
        kronrod += WGK[k] * (f1 + f2);
        res_abs += WGK[k] * (f1.abs() + f2.abs());
    }
    for j in 0..4 {
        let k = 2 * j;
        let dx = half * XGK[k];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[k] = f1;
        fv2[k] = f2;
        kronrod += WGK[k] * (f1 + f2);
        res_abs += WGK[k] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for k in 0..7 {
        res_asc += WGK[k] * ((fv1[k] - mean).abs() + (fv2[k] - mean).abs());
    }
    let err = (kronrod - gauss) * half;
    Panel {
        a,
        b,
        value: kronrod * half,
        error: rescale_error(err, res_abs * half.abs(), res_asc * half.abs()),
    }
}

/// Integrates `f` over `[points[0], points[last]]`, using the interior points
/// as initial breakpoints.
///
/// Bisects the panel with the largest error estimate until the total error
/// is below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, points: &[f64], cfg: &QuadratureConfig) -> Result<Integral> {
    if points.len() < 2 {
        return invalid("integration needs at least two breakpoints");
    }
    if points.windows(2).any(|w| !(w[0] <= w[1])) {
        return invalid("integration breakpoints must be sorted");
    }
    let mut panels: Vec<Panel> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();
    let mut evaluations = 15 * panels.len();
    if panels.is_empty() {
        return Ok(Integral { value: 0.0, abs_error: 0.0, evaluations });
    }

    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let target = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= target || !error.is_finite() && !value.is_finite() {
            return Ok(Integral { value, abs_error: error, evaluations });
        }
        if panels.len() >= cfg.max_subdivisions {
            return Err(Error::Quadrature { estimate: value, abs_error: error });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = panels[worst];
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // Panel is at machine resolution; nothing left to refine.
            return Ok(Integral { value, abs_error: error, evaluations });
        }
        panels[worst] = gk15(&f, p.a, mid);
        panels.push(gk15(&f, mid, p.b));
        evaluations += 30;
    }
}

/// Integral of `exp(ln_f)` whose logarithm is kept, so densities far in a
/// tail neither underflow nor lose relative accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogIntegral {
    pub ln_value: f64,
    pub rel_error: f64,
}

impl LogIntegral {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

/// Drop (in natural-log units) below the running maximum at which a tail
/// is cut.
const LN_CUTOFF: f64 = 60.0;

/// Integrates `exp(ln_f)` over `[lo, hi]`, or over `[lo, ∞)` when `hi` is
/// `None`.
///
/// `ln_f` must be unimodal or decaying on the range and `scale` should be
/// comparable to its width. The integrand is scanned on a grid of spacing
/// `scale / 4`, shifted by its maximum, and the unbounded side is cut where
/// it falls `e^-60` below that maximum.
pub fn integrate_log_space<F: Fn(f64) -> f64>(
    ln_f: F,
    lo: f64,
    hi: Option<f64>,
    scale: f64,
    cfg: &QuadratureConfig,
) -> Result<LogIntegral> {
    if !(scale > 0.0) || !lo.is_finite() {
        return invalid("log-space integration needs a finite lower limit and a positive scale");
    }
    if let Some(h) = hi {
        if !(h >= lo) {
            return invalid("upper limit below lower limit");
        }
        if h == lo {
            return Ok(LogIntegral { ln_value: f64::NEG_INFINITY, rel_error: 0.0 });
        }
    }

    let mut grid: Vec<(f64, f64)> = Vec::new();
    let mut peak = f64::NEG_INFINITY;
    match hi {
        Some(h) => {
            let steps = (((h - lo) / (0.25 * scale)).ceil() as usize).clamp(16, 20_000);
            for i in 0..=steps {
                let x = if i == steps { h } else { lo + (h - lo) * i as f64 / steps as f64 };
                let v = ln_f(x);
                peak = peak.max(v);
                grid.push((x, v));
            }
        }
        None => {
            let step = 0.25 * scale;
            let mut x = lo;
            let mut i = 0usize;
            loop {
                let v = ln_f(x);
                peak = peak.max(v);
                grid.push((x, v));
                if peak.is_finite() && v < peak - LN_CUTOFF && i > 4 {
                    break;
                }
                i += 1;
                if i > 400_000 {
                    return invalid("integrand does not decay within the scan budget");
                }
                x = lo + step * i as f64;
            }
        }
    }
    if !peak.is_finite() {
        if peak == f64::NEG_INFINITY {
            return Ok(LogIntegral { ln_value: f64::NEG_INFINITY, rel_error: 0.0 });
        }
        return invalid("integrand is not finite on the scan grid");
    }

    // Keep the span where the integrand matters, padded by one grid cell.
    let first = grid.iter().position(|g| g.1 >= peak - LN_CUTOFF).unwrap_or(0).saturating_sub(1);
    let last = (grid.iter().rposition(|g| g.1 >= peak - LN_CUTOFF).unwrap_or(grid.len() - 1) + 1).min(grid.len() - 1);
    let span = &grid[first..=last];
    let stride = (span.len() / 48).max(1);
    let mut points: Vec<f64> = span.iter().step_by(stride).map(|g| g.0).collect();
    if *points.last().unwrap() != span[span.len() - 1].0 {
        points.push(span[span.len() - 1].0);
    }

    let r = integrate(|x| (ln_f(x) - peak).exp(), &points, cfg)?;
    Ok(LogIntegral { ln_value: peak + r.value.ln(), rel_error: r.abs_error / r.value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_rule_is_exact_to_degree_22() {
        let p = gk15(&|x: f64| x.powi(22), 0.0, 1.0);
        assert_relative_eq!(p.value, 1.0 / 23.0, max_relative = 1e-14);
    }

    #[test]
    fn gauss_exact_polynomials_finish_on_one_panel() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x: f64| x.powi(13), &[0.0, 1.0], &cfg).unwrap();
        assert_relative_eq!(r.value, 1.0 / 14.0, max_relative = 1e-14);
        assert_eq!(r.evaluations, 15);
    }

    #[test]
    fn inverse_sqrt_singularity_converges_adaptively() {
        let cfg = QuadratureConfig { rel_tol: 1e-9, ..Default::default() };
        let r = integrate(|x: f64| 1.0 / x.sqrt(), &[0.0, 1.0], &cfg).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn gaussian_with_breakpoints() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x: f64| (-x * x).exp(), &[-12.0, 0.0, 12.0], &cfg).unwrap();
        assert_relative_eq!(r.value, core::f64::consts::PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn exhausted_budget_reports_partial_estimate() {
        let cfg = QuadratureConfig { max_subdivisions: 8, rel_tol: 1e-14, abs_tol: 1e-16, ..Default::default() };
        let err = integrate(|x: f64| (1.0 / x).sin() / x.sqrt(), &[1e-9, 1.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn log_space_tail_far_below_underflow() {
        // ∫_a^∞ exp(-x²/2) with a = 40: ln ≈ -a²/2 - ln(a) + ln(1 - 1/a² + 3/a⁴)
        let cfg = QuadratureConfig::default();
        let a = 40.0_f64;
        let r = integrate_log_space(|x| -0.5 * x * x, a, None, 1.0, &cfg).unwrap();
        let exact = -0.5 * a * a - a.ln() + (1.0 - 1.0 / (a * a) + 3.0 / a.powi(4) - 15.0 / a.powi(6)).ln();
        assert_relative_eq!(r.ln_value, exact, max_relative = 1e-12);
    }

    #[test]
    fn log_space_finite_range() {
        let cfg = QuadratureConfig::default();
        let r = integrate_log_space(|x: f64| x.ln(), 0.0, Some(2.0), 1.0, &cfg).unwrap();
        assert_relative_eq!(r.value(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::default().validate().is_ok());
        let bad = QuadratureConfig { max_subdivisions: 4, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QuadratureConfig { rel_tol: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
