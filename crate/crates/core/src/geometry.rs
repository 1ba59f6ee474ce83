//! Points, distance and radial drift in the Poincaré half-space model.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::math;

/// Ambient dimension `n ≥ 2` of the half-space `H^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return invalid("Dimension requires n ≥ 2");
        }
        Ok(Self(n))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }
}

/// A point `(x, y)` with `x ∈ R^{n-1}` and height `y > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpacePoint {
    x: Vec<f64>,
    y: f64,
}

impl HalfSpacePoint {
    pub fn new(x: Vec<f64>, y: f64) -> Result<Self> {
        if !(y > 0.0) || !y.is_finite() {
            return invalid(format!("height must be positive and finite, got {y}"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("horizontal coordinates must be finite");
        }
        Ok(Self { x, y })
    }

    /// The point `(0, …, 0, 1)`.
    pub fn origin(n: Dimension) -> Self {
        Self { x: alloc::vec![0.0; n.get() as usize - 1], y: 1.0 }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn dimension(&self) -> usize {
        self.x.len() + 1
    }

    fn check(&self, n: Dimension) -> Result<()> {
        if self.dimension() != n.get() as usize {
            return invalid(format!(
                "point has {} horizontal coordinates, dimension {} needs {}",
                self.x.len(),
                n.get(),
                n.get() - 1
            ));
        }
        Ok(())
    }
}

/// Hyperbolic radius and time, `η ≥ 0` and `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusTime {
    pub eta: f64,
    pub t: f64,
}

impl RadiusTime {
    pub fn new(eta: f64, t: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return invalid(format!("radius must be finite and non-negative, got {eta}"));
        }
        if !(t > 0.0) || !t.is_finite() {
            return invalid(format!("time must be finite and positive, got {t}"));
        }
        Ok(Self { eta, t })
    }
}

/// Hyperbolic distance between two points of `H^n`.
///
/// Uses `cosh η = 1 + (|x-x'|² + (y-y')²) / (2yy')`, which keeps the
/// argument of `arccosh` exactly at one for coincident points.
pub fn hyperbolic_distance(a: &HalfSpacePoint, b: &HalfSpacePoint, n: Dimension) -> Result<f64> {
    a.check(n)?;
    b.check(n)?;
    let dx2: f64 = a.x.iter().zip(&b.x).map(|(p, q)| (p - q) * (p - q)).sum();
    let dy = a.y - b.y;
    let excess = (dx2 + dy * dy) / (2.0 * a.y * b.y);
    Ok(excess_distance(excess))
}

// arccosh(1 + d) written directly in d, which avoids rounding 1 + d.
fn excess_distance(d: f64) -> f64 {
    if d > 1e150 {
        return d.ln() + LN_2;
    }
    (d + (d * (d + 2.0)).sqrt()).ln_1p()
}

/// Surface area `2π^{n/2} / Γ(n/2)` of the unit sphere in `R^n`.
pub fn surface_area_coeff(n: Dimension) -> f64 {
    let half = 0.5 * n.as_f64();
    (LN_2 + half * PI.ln() - math::ln_gamma(half)).exp()
}

/// Drift `((n-1)/2) coth η` of the radial process.
pub fn radial_drift(eta: f64, n: Dimension) -> Result<f64> {
    if !(eta > 0.0) {
        return invalid(format!("radial drift needs η > 0, got {eta}"));
    }
    Ok(0.5 * (n.as_f64() - 1.0) * math::coth(eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn n(k: u32) -> Dimension {
        Dimension::new(k).unwrap()
    }

    fn p(x: &[f64], y: f64) -> HalfSpacePoint {
        HalfSpacePoint::new(x.to_vec(), y).unwrap()
    }

    #[test]
    fn dimension_one_is_rejected() {
        let e = Dimension::new(1).unwrap_err();
        assert_eq!(alloc::string::ToString::to_string(&e), "invalid argument: Dimension requires n ≥ 2");
    }

    #[test]
    fn non_positive_height_is_rejected() {
        assert!(HalfSpacePoint::new(vec![0.0], 0.0).is_err());
        assert!(HalfSpacePoint::new(vec![0.0], -1.0).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(hyperbolic_distance(&p(&[0.0], 1.0), &p(&[0.0], 1.0), n(2)).unwrap(), 0.0);
        let e = core::f64::consts::E;
        assert_relative_eq!(hyperbolic_distance(&p(&[0.0], 1.0), &p(&[0.0], e), n(2)).unwrap(), 1.0, max_relative = 1e-15);
        // cosh η = 3/2
        assert_relative_eq!(
            hyperbolic_distance(&p(&[1.0], 1.0), &p(&[0.0], 1.0), n(2)).unwrap(),
            0.962_423_650_119_206_9,
            max_relative = 1e-14
        );
    }

    #[test]
    fn distance_rejects_dimension_mismatch() {
        assert!(hyperbolic_distance(&p(&[0.0], 1.0), &p(&[0.0, 1.0], 1.0), n(2)).is_err());
        assert!(hyperbolic_distance(&p(&[0.0], 1.0), &p(&[0.0], 1.0), n(3)).is_err());
    }

    #[test]
    fn surface_areas() {
        assert_relative_eq!(surface_area_coeff(n(2)), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(surface_area_coeff(n(3)), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(surface_area_coeff(n(4)), 2.0 * PI * PI, max_relative = 1e-14);
    }

    #[test]
    fn drift_examples() {
        assert_relative_eq!(radial_drift(1e6, n(3)).unwrap(), 1.0);
        // 0.5 (e² + 1) / (e² - 1)
        let e2 = core::f64::consts::E * core::f64::consts::E;
        assert_relative_eq!(radial_drift(1.0, n(2)).unwrap(), 0.5 * (e2 + 1.0) / (e2 - 1.0), max_relative = 1e-15);
        // Laurent series of coth to fifth order
        let x: f64 = 0.01;
        let series = 1.0 / x + x / 3.0 - x.powi(3) / 45.0 + 2.0 * x.powi(5) / 945.0;
        assert_relative_eq!(radial_drift(x, n(3)).unwrap(), series, max_relative = 1e-14);
        assert!(radial_drift(0.0, n(3)).is_err());
        assert!(radial_drift(-1.0, n(3)).is_err());
    }
}
