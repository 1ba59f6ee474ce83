//! Path simulation of hyperbolic Brownian motion and its radial part.
//!
//! # Clock
//!
//! The kernels `k_n` and densities `p_n` in [`crate::kernel`] are those of
//! the semigroup `e^{tΔ}`: `p₃` is centred at `2t` with variance `2t`, and
//! the exponent `(η − (n−1)t)²/4t` of `g_n` has the same clock. The samplers
//! therefore simulate the diffusion generated by `Δ` (the `Δ/2` process run
//! at twice the speed), so that sampled laws can be compared with `p_n`
//! directly.
//!
//! # The radial SDE
//!
//! `Δ` acting on functions of the distance `η` from a fixed point is
//! `f'' + (n−1) coth η · f'`, because spheres of radius `η` have area
//! proportional to `sinh^{n-1} η`. So `D_n(t)` solves
//! `dη = (n−1) coth η dt + √2 dW`, twice [`radial_drift`], integrated by
//! Euler–Maruyama with a reflecting floor.
//!
//! Below [`SPLIT_RADIUS`] plain Euler is unusable: after a reflection to
//! `η ≈ ε` the drift term `(n−1)dt/η` throws the path out by hundreds.
//! There the singular part `(n−1)/η` is integrated exactly as the norm of
//! an `n`-dimensional Euclidean step, and only the bounded remainder
//! `(n−1)(coth η − 1/η)` is stepped by Euler; see [`split_step`].
//!
//! # Half-space coordinates
//!
//! With `Δ = y² Σ ∂² − (n−2) y ∂_y`, the diffusion is `dY = √2 Y dB₀ −
//! (n−2) Y dt`, `dX_i = √2 Y dB_i`, so `Y_{t+h} = Y_t exp(√2 B₀(h) −
//! (n−1)h)` exactly. With the coefficient `(n−2)/2` on `y ∂_y` instead, the
//! log-drift becomes `−n/2`; [`OperatorConvention`] selects between the two
//! so the choice can be tested against the exact density.
//!
//! # Randomness
//!
//! Every draw comes from a [`StepRng`] keyed by `(seed, path, step)`, so
//! any subset of paths can be simulated in any order with identical
//! results.

use alloc::vec::Vec;
use core::ops::Range;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::math;
use crate::geometry::{hyperbolic_distance, radial_drift, Dimension, HalfSpacePoint};
use crate::rng::{open_unit, Domain, StepRng, MAX_STEP};

/// Where paths start.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// Radial process started at distance `η₀ > 0`.
    Radius(f64),
    /// Radial process started at its own origin.
    Origin,
    /// Half-space process started at a point.
    Point(HalfSpacePoint),
}

/// Coefficient of `y ∂_y` in the Laplace–Beltrami operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorConvention {
    /// `−(n−2) y ∂_y`: `log Y` drifts at `−(n−1)`.
    #[default]
    Standard,
    /// `−((n−2)/2) y ∂_y`: `log Y` drifts at `−n/2`.
    AsPrinted,
}

impl OperatorConvention {
    fn log_drift(self, n: Dimension) -> f64 {
        match self {
            Self::Standard => n.as_f64() - 1.0,
            Self::AsPrinted => 0.5 * n.as_f64(),
        }
    }
}

pub const DEFAULT_REFLECTION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub n: Dimension,
    pub start: Start,
    pub horizon: f64,
    pub dt: f64,
    pub paths: u64,
    pub master_seed: u64,
    pub reflection_floor: f64,
    pub convention: OperatorConvention,
    /// Replace every Gaussian increment by zero (deterministic debugging).
    pub zero_noise: bool,
}

impl SimulationPlan {
    pub fn new(n: Dimension, start: Start, horizon: f64, dt: f64, paths: u64, master_seed: u64) -> Result<Self> {
        let plan = Self {
            n,
            start,
            horizon,
            dt,
            paths,
            master_seed,
            reflection_floor: DEFAULT_REFLECTION_FLOOR,
            convention: OperatorConvention::Standard,
            zero_noise: false,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return invalid("horizon must be finite and non-negative");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid("dt must be finite and positive");
        }
        if self.horizon > 0.0 && self.dt >= 0.5 * self.horizon {
            return invalid("dt must be below half the horizon");
        }
        if self.paths == 0 {
            return invalid("at least one path is required");
        }
        if !(self.reflection_floor > 0.0) {
            return invalid("reflection floor must be positive");
        }
        if self.steps() > MAX_STEP {
            return invalid("too many time steps");
        }
        match &self.start {
            Start::Radius(eta0) => {
                if !(*eta0 > self.reflection_floor) || !eta0.is_finite() {
                    return invalid("start radius must be finite and above the reflection floor");
                }
            }
            Start::Point(p) => {
                if p.dimension() != self.n.get() as usize {
                    return invalid("start point does not match the dimension");
                }
            }
            Start::Origin => {}
        }
        Ok(())
    }

    /// Number of Euler steps; the step is shortened slightly so that an
    /// integer number of them lands exactly on the horizon.
    pub fn steps(&self) -> u64 {
        if self.horizon == 0.0 {
            0
        } else {
            (self.horizon / self.dt - 1e-9).ceil().max(1.0) as u64
        }
    }

    fn step_size(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    fn check_range(&self, streams: &Range<u64>) -> Result<()> {
        if streams.end > self.paths || streams.start > streams.end {
            return invalid("stream range outside the plan");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub terminal_radius: f64,
    pub hit_time: Option<f64>,
    pub censored: bool,
    pub stream_index: u64,
    pub reflections: u32,
}

fn normal(rng: &mut StepRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Drift `(n−1) coth η` of the radial process, with `coth η = 1` to double
/// precision once `η > 19`.
#[inline]
fn drift(eta: f64, n: Dimension) -> f64 {
    if eta > 19.0 {
        n.as_f64() - 1.0
    } else {
        2.0 * radial_drift(eta, n).unwrap_or(f64::INFINITY)
    }
}

/// One Euler step of the radial SDE with reflection at `floor`, driven by
/// the standard normal `z`; returns the new radius and whether it was
/// reflected.
pub fn euler_step(eta: f64, n: Dimension, dt: f64, z: f64, floor: f64) -> (f64, bool) {
    let next = eta + drift(eta, n) * dt + (2.0 * dt).sqrt() * z;
    if next < floor {
        ((2.0 * floor - next).max(0.5 * floor), true)
    } else {
        (next, false)
    }
}

/// Radius below which [`run_radial_path`] uses [`split_step`].
pub const SPLIT_RADIUS: f64 = 1.0;

/// `coth η − 1/η`, bounded by `min(η/3, 1)`.
fn coth_remainder(eta: f64) -> f64 {
    if eta < 1e-4 {
        eta / 3.0
    } else {
        math::coth(eta) - 1.0 / eta
    }
}

/// One step near the origin. The Bessel part is exact: a Euclidean
/// Brownian motion with generator `Δ` at distance `η` moves to
/// `|η e₁ + √(2dt) z|`. The smooth remainder of the drift is added by
/// Euler. `z` is the normal along the radius and `chi2` the sum of the
/// `n−1` squared normals across it.
pub fn split_step(eta: f64, n: Dimension, dt: f64, z: f64, chi2: f64, floor: f64) -> (f64, bool) {
    let along = eta + (2.0 * dt).sqrt() * z;
    let next = (along * along + 2.0 * dt * chi2).sqrt() + (n.as_f64() - 1.0) * coth_remainder(eta) * dt;
    if next < floor {
        (floor, true)
    } else {
        (next, false)
    }
}

/// First step away from the origin: the radius of an `n`-dimensional
/// Brownian motion with generator `Δ` after time `dt` has the law
/// `√(2dt) · χ_n`, which is also the short-time law of the hyperbolic
/// radius.
fn origin_step(plan: &SimulationPlan, stream: u64, dt: f64) -> f64 {
    if plan.zero_noise {
        return plan.reflection_floor;
    }
    let mut rng = StepRng::new(plan.master_seed, stream, 0, Domain::Start);
    let sq: f64 = (0..plan.n.get()).map(|_| normal(&mut rng).powi(2)).sum();
    (2.0 * dt * sq).sqrt().max(plan.reflection_floor)
}

/// Target for [`run_radial_path`]: either integrate to the horizon or stop
/// at the first entry into the ball of radius `eta1`.
#[derive(Clone, Copy)]
enum Target {
    Terminal,
    Passage { eta1: f64 },
}

/// Paths this far outside the ball are abandoned as escaped: the drift is
/// at least `n−1` against noise variance 2, so a return has probability
/// below `exp(−(n−1)·gap) < 1e-12`.
const ESCAPE_LOG_PROB: f64 = 27.631_021_115_928_547; // −ln(1e-12)

fn run_radial_path(plan: &SimulationPlan, stream: u64, target: Target) -> PathSample {
    let steps = plan.steps();
    let dt = if steps == 0 { 0.0 } else { plan.step_size() };
    let n = plan.n;
    let floor = plan.reflection_floor;
    let mut reflections = 0u32;

    let (mut eta, first) = match plan.start {
        Start::Radius(e) => (e, 0),
        Start::Origin if steps == 0 => (0.0, 0),
        Start::Origin => (origin_step(plan, stream, dt), 1),
        Start::Point(_) => (0.0, 0),
    };
    let escape_gap = match target {
        Target::Passage { .. } if n.get() > 1 => ESCAPE_LOG_PROB / (n.as_f64() - 1.0),
        _ => f64::INFINITY,
    };

    for k in first..steps {
        let (next, reflected) = if plan.zero_noise {
            euler_step(eta, n, dt, 0.0, floor)
        } else {
            let mut rng = StepRng::new(plan.master_seed, stream, k, Domain::Noise);
            if eta < SPLIT_RADIUS {
                let z = normal(&mut rng);
                let chi2: f64 = (1..n.get()).map(|_| normal(&mut rng).powi(2)).sum();
                split_step(eta, n, dt, z, chi2, floor)
            } else {
                euler_step(eta, n, dt, normal(&mut rng), floor)
            }
        };
        reflections += u32::from(reflected);
        if let Target::Passage { eta1 } = target {
            let t0 = k as f64 * dt;
            if next <= eta1 {
                let frac = (eta - eta1) / (eta - next);
                return PathSample {
                    terminal_radius: next,
                    hit_time: Some(t0 + frac * dt),
                    censored: false,
                    stream_index: stream,
                    reflections,
                };
            }
            // A Brownian bridge with variance 2dt between two points above
            // the barrier dips below it with probability exp(−ab/dt).
            let (a, b) = (eta - eta1, next - eta1);
            let cross = (-a * b / dt).exp();
            if !plan.zero_noise && cross > 1e-300 {
                let u = open_unit(&mut StepRng::new(plan.master_seed, stream, k, Domain::Bridge));
                if u < cross {
                    return PathSample {
                        terminal_radius: eta1,
                        hit_time: Some(t0 + 0.5 * dt),
                        censored: false,
                        stream_index: stream,
                        reflections,
                    };
                }
            }
            if next - eta1 > escape_gap {
                return PathSample { terminal_radius: next, hit_time: None, censored: true, stream_index: stream, reflections };
            }
        }
        eta = next;
    }
    let censored = matches!(target, Target::Passage { .. });
    PathSample { terminal_radius: eta, hit_time: None, censored, stream_index: stream, reflections }
}

fn require_radial(plan: &SimulationPlan) -> Result<()> {
    plan.validate()?;
    if matches!(plan.start, Start::Point(_)) {
        return invalid("the radial sampler needs a radius or origin start");
    }
    Ok(())
}

/// Euler–Maruyama paths of `D_n`; the sample for stream `i` depends only on
/// `(plan, i)`.
pub fn simulate_radial(plan: &SimulationPlan) -> Result<Vec<PathSample>> {
    simulate_radial_range(plan, 0..plan.paths)
}

pub fn simulate_radial_range(plan: &SimulationPlan, streams: Range<u64>) -> Result<Vec<PathSample>> {
    require_radial(plan)?;
    plan.check_range(&streams)?;
    Ok(streams.map(|i| run_radial_path(plan, i, Target::Terminal)).collect())
}

/// First entrance into the ball of radius `eta1` before the horizon.
///
/// Crossings are detected both when a step lands inside the ball (hit time
/// interpolated linearly) and when the Brownian bridge between two outside
/// points would have dipped in (hit time at mid-step). Paths that drift
/// beyond the escape gap are stopped early and counted as censored.
pub fn first_passage(plan: &SimulationPlan, eta1: f64) -> Result<Vec<PathSample>> {
    first_passage_range(plan, eta1, 0..plan.paths)
}

pub fn first_passage_range(plan: &SimulationPlan, eta1: f64, streams: Range<u64>) -> Result<Vec<PathSample>> {
    require_radial(plan)?;
    plan.check_range(&streams)?;
    match plan.start {
        Start::Radius(eta0) if eta1 > 0.0 && eta1 < eta0 => {}
        _ => return invalid("first passage needs a start radius above the ball radius η₁ > 0"),
    }
    Ok(streams.map(|i| run_radial_path(plan, i, Target::Passage { eta1 })).collect())
}

/// Paths of the full process in half-space coordinates; the reported
/// radius is the hyperbolic distance from the start point.
pub fn simulate_halfspace(plan: &SimulationPlan) -> Result<Vec<PathSample>> {
    simulate_halfspace_range(plan, 0..plan.paths)
}

pub fn simulate_halfspace_range(plan: &SimulationPlan, streams: Range<u64>) -> Result<Vec<PathSample>> {
    let start = halfspace_start(plan)?;
    let ends = simulate_halfspace_points_range(plan, streams.clone())?;
    streams
        .zip(ends)
        .map(|(i, end)| {
            Ok(PathSample {
                terminal_radius: hyperbolic_distance(&end, &start, plan.n)?,
                hit_time: None,
                censored: false,
                stream_index: i,
                reflections: 0,
            })
        })
        .collect()
}

fn halfspace_start(plan: &SimulationPlan) -> Result<HalfSpacePoint> {
    match &plan.start {
        Start::Point(p) => Ok(p.clone()),
        _ => invalid("the half-space sampler needs a start point"),
    }
}

/// Terminal points of the half-space process.
pub fn simulate_halfspace_points(plan: &SimulationPlan) -> Result<Vec<HalfSpacePoint>> {
    simulate_halfspace_points_range(plan, 0..plan.paths)
}

pub fn simulate_halfspace_points_range(plan: &SimulationPlan, streams: Range<u64>) -> Result<Vec<HalfSpacePoint>> {
    plan.validate()?;
    plan.check_range(&streams)?;
    let start = halfspace_start(plan)?;
    let steps = plan.steps();
    let dt = if steps == 0 { 0.0 } else { plan.step_size() };
    let sdt = (2.0 * dt).sqrt();
    let c = plan.convention.log_drift(plan.n);
    let mut out = Vec::with_capacity((streams.end - streams.start) as usize);
    for i in streams {
        let mut x = start.x().to_vec();
        let mut y = start.y();
        for k in 0..steps {
            let mut rng = StepRng::new(plan.master_seed, i, k, Domain::Noise);
            let mut z = || if plan.zero_noise { 0.0 } else { normal(&mut rng) };
            let zy = z();
            // X moves with the step-initial Y; Y is updated exactly.
            for xi in x.iter_mut() {
                *xi += y * sdt * z();
            }
            y *= (sdt * zy - c * dt).exp();
        }
        out.push(HalfSpacePoint::new(x, y)?);
    }
    Ok(out)
}

/// Exact draws from `p₃(·, t)` by rejection.
///
/// `p₃ ∝ η (1 − e^{−2η}) e^{−(η−2t)²/4t}`. The factor `η^k` times the
/// Gaussian is sampled by rejection from a Gaussian recentred at its mode
/// `η*`, with acceptance `(η/η*)^k e^{k(1−η/η*)}`; the remaining factor
/// is accepted separately. For `t ≥ 1` this uses `k = 1` and acceptance
/// `1 − e^{−2η}`; for small `t` the mass sits near 0 where that would be
/// wasteful, so `k = 2` is used with acceptance `(1 − e^{−2η})/(2η)`.
pub fn sample_radial_exact_3d(t: f64, count: u64, master_seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return invalid("at least one sample is required");
    }
    sample_radial_exact_3d_range(t, master_seed, 0..count)
}

pub fn sample_radial_exact_3d_range(t: f64, master_seed: u64, streams: Range<u64>) -> Result<Vec<f64>> {
    if !(t > 0.0) || !t.is_finite() {
        return invalid("exact sampling needs a finite t > 0");
    }
    let mu = 2.0 * t;
    let var = 2.0 * t;
    let sd = var.sqrt();
    let k = if t >= 1.0 { 1.0 } else { 2.0 };
    let mode = 0.5 * (mu + (mu * mu + 4.0 * k * var).sqrt());
    Ok(streams
        .map(|i| {
            let mut rng = StepRng::new(master_seed, i, 0, Domain::Exact);
            loop {
                let eta = mode + sd * normal(&mut rng);
                if eta <= 0.0 {
                    continue;
                }
                let r = eta / mode;
                let gate = (k * (r.ln() + 1.0 - r)).exp();
                let shape = if k == 1.0 { -(-2.0 * eta).exp_m1() } else { -(-2.0 * eta).exp_m1() / (2.0 * eta) };
                if open_unit(&mut rng) < gate * shape {
                    break eta;
                }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn split_step_stays_bounded_at_the_floor() {
        // Euler from the floor would move by (n−1)dt/ε = 2000.
        let (next, refl) = split_step(1e-6, dim(3), 1e-3, 0.0, 0.0, 1e-6);
        assert!(!refl);
        assert!((next - 1e-6).abs() < 1e-8, "{next}");
        let (next, _) = split_step(1e-6, dim(3), 1e-3, 1.0, 1.0, 1e-6);
        assert_relative_eq!(next, (2e-3f64 * 2.0).sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn split_step_is_the_euclidean_norm_plus_remainder() {
        let (eta, dt) = (0.5, 1e-2);
        let (next, _) = split_step(eta, dim(4), dt, 0.3, 2.0, 1e-6);
        let euclid = ((eta + 0.3 * (2.0 * dt).sqrt()).powi(2) + 2.0 * dt * 2.0).sqrt();
        assert_relative_eq!(next, euclid + 3.0 * (1.0 / eta.tanh() - 1.0 / eta) * dt, max_relative = 1e-14);
    }

    #[test]
    fn deterministic_single_step() {
        let (next, refl) = euler_step(5.0, dim(3), 0.01, 0.0, 1e-6);
        assert!(!refl);
        assert_relative_eq!(next, 5.0 + 2.0 * radial_drift(5.0, dim(3)).unwrap() * 0.01, max_relative = 1e-15);
    }

    #[test]
    fn zero_noise_plan_follows_the_ode() {
        let mut plan = SimulationPlan::new(dim(3), Start::Radius(5.0), 0.1, 0.01, 1, 1).unwrap();
        plan.zero_noise = true;
        let out = simulate_radial(&plan).unwrap();
        let mut eta = 5.0;
        for _ in 0..10 {
            eta = euler_step(eta, dim(3), 0.01, 0.0, 1e-6).0;
        }
        assert_relative_eq!(out[0].terminal_radius, eta, max_relative = 1e-14);
    }

    #[test]
    fn reflection_keeps_paths_above_half_floor() {
        let (next, refl) = euler_step(1e-3, dim(2), 1e-4, -50.0, 1e-3);
        assert!(refl);
        assert!(next >= 0.5e-3);
    }

    #[test]
    fn coarse_step_is_rejected() {
        assert!(SimulationPlan::new(dim(3), Start::Radius(1.0), 1.0, 0.5, 1, 0).is_err());
        assert!(SimulationPlan::new(dim(3), Start::Radius(1.0), 1.0, 0.49, 1, 0).is_ok());
    }

    #[test]
    fn ranges_reproduce_full_runs() {
        let plan = SimulationPlan::new(dim(3), Start::Radius(1.0), 1.0, 0.01, 10, 99).unwrap();
        let full = simulate_radial(&plan).unwrap();
        let mut parts = simulate_radial_range(&plan, 6..10).unwrap();
        let mut head = simulate_radial_range(&plan, 0..6).unwrap();
        head.append(&mut parts);
        assert_eq!(full, head);
    }

    #[test]
    fn halfspace_zero_horizon_stays_put() {
        let start = HalfSpacePoint::new(vec![0.3, -1.0], 2.0).unwrap();
        let plan = SimulationPlan::new(dim(3), Start::Point(start), 0.0, 0.01, 3, 5).unwrap();
        for s in simulate_halfspace(&plan).unwrap() {
            assert_eq!(s.terminal_radius, 0.0);
        }
    }

    #[test]
    fn passage_rejects_start_inside_ball() {
        let plan = SimulationPlan::new(dim(3), Start::Radius(1.0), 1.0, 0.01, 3, 5).unwrap();
        assert!(first_passage(&plan, 1.0).is_err());
        assert!(first_passage(&plan, 2.0).is_err());
    }

    #[test]
    fn near_boundary_start_hits_quickly() {
        let plan = SimulationPlan::new(dim(3), Start::Radius(1.001), 1.0, 1e-4, 200, 5).unwrap();
        let hits = first_passage(&plan, 1.0).unwrap().iter().filter(|s| s.hit_time.is_some()).count();
        assert!(hits > 190);
    }

    #[test]
    fn exact_samples_are_positive() {
        for &t in &[0.05, 0.5, 3.0] {
            assert!(sample_radial_exact_3d(t, 500, 1).unwrap().iter().all(|&x| x > 0.0));
        }
    }
}
