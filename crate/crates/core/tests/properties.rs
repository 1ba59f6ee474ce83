use hbm_core::geometry::{hyperbolic_distance, radial_drift, surface_area_coeff};
use hbm_core::hitting::{hitting_probability, HittingQuery, Potential, SeriesBudget};
use hbm_core::kernel::{density_envelope, radial_density, sandwich_scan, CdfTable, KernelQuery};
use hbm_core::ldp::*;
use hbm_core::sampler::*;
use hbm_core::stats::{ks_critical_value, ks_p_value, ks_statistic, ks_two_sample};
use hbm_core::{Dimension, HalfSpacePoint, QuadratureConfig};
use proptest::prelude::*;

fn dim(n: u32) -> Dimension {
    Dimension::new(n).unwrap()
}

fn point(n: usize) -> impl Strategy<Value = HalfSpacePoint> {
    (prop::collection::vec(-5.0..5.0f64, n - 1), 0.05..5.0f64).prop_map(|(x, y)| HalfSpacePoint::new(x, y).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn triangle_inequality((a, b, c) in (point(3), point(3), point(3))) {
        let d = |p: &HalfSpacePoint, q: &HalfSpacePoint| hyperbolic_distance(p, q, dim(3)).unwrap();
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn dilations_and_translations_are_isometries(a in point(4), b in point(4), s in 0.1..10.0f64, c in -3.0..3.0f64) {
        let n = dim(4);
        let map = |p: &HalfSpacePoint| HalfSpacePoint::new(p.x().iter().map(|x| s * (x + c)).collect(), s * p.y()).unwrap();
        let before = hyperbolic_distance(&a, &b, n).unwrap();
        let after = hyperbolic_distance(&map(&a), &map(&b), n).unwrap();
        prop_assert!((before - after).abs() <= 1e-9 * (1.0 + before));
    }

    #[test]
    fn drift_times_tanh_is_constant(eta in 1e-3..300.0f64, n in 2u32..10) {
        let v = radial_drift(eta, dim(n)).unwrap() * eta.tanh();
        prop_assert!((v - 0.5 * f64::from(n - 1)).abs() < 1e-12 * f64::from(n));
    }

    #[test]
    fn hitting_probability_decreases_with_distance(n in 2u32..8, eta1 in 0.2..3.0f64, d1 in 0.01..30.0f64, d2 in 0.01..30.0f64) {
        let budget = SeriesBudget::default();
        let (near, far) = (eta1 + d1.min(d2), eta1 + d1.max(d2) + 1e-3);
        let p = |eta| hitting_probability(&HittingQuery::new(n, eta1, eta).unwrap(), &budget).unwrap().probability;
        let (pn, pf) = (p(near), p(far));
        prop_assert!(pf < pn && pn <= 1.0 && pf > 0.0);
    }

    #[test]
    fn stable_path_agrees_with_naive_where_both_apply(n in 2u32..8, eta in 1.0..12.0f64) {
        let u = Potential::new(dim(n)).unwrap();
        let (naive, magnitude) = u.naive(eta);
        let (ln_abs, sign) = u.stable(eta, &SeriesBudget::default()).unwrap();
        let stable = sign * ln_abs.exp();
        let cond = magnitude / stable.abs();
        let tol = (64.0 * f64::EPSILON * cond).max(1e-9);
        prop_assert!(((stable - naive) / stable).abs() <= tol, "n={n} η={eta}: {stable} vs {naive}");
    }

    #[test]
    fn i1_is_convex_with_minimum_at_n_minus_one(n in 2u32..9, a in 0.0..20.0f64, b in 0.0..20.0f64) {
        let spec = RateFunctionSpec::i1(dim(n));
        let mid = rate(&spec, 0.5 * (a + b));
        prop_assert!(mid <= 0.5 * (rate(&spec, a) + rate(&spec, b)) + 1e-12);
        prop_assert!(rate(&spec, a) >= 0.0);
        prop_assert_eq!(rate(&spec, f64::from(n - 1)), 0.0);
    }

    #[test]
    fn i2_is_even_and_j1_vanishes_only_at_zero(x in -20.0..20.0f64) {
        let i2 = RateFunctionSpec::i2(dim(3));
        prop_assert_eq!(rate(&i2, x), rate(&i2, -x));
        let j1 = rate(&RateFunctionSpec::j1(dim(3)), x.abs());
        prop_assert!(j1 > 0.0 || x == 0.0);
    }

    #[test]
    fn level_sets_are_exact_intervals(n in 2u32..9, gamma in 0.0..25.0f64, x in 0.0..30.0f64) {
        let (lo, hi) = i1_level_set(dim(n), gamma).unwrap();
        let inside = rate(&RateFunctionSpec::i1(dim(n)), x) <= gamma;
        let in_interval = x >= lo && x <= hi;
        // Points within rounding of an endpoint may land on either side.
        let near_edge = (x - lo).abs() < 1e-9 || (x - hi).abs() < 1e-9;
        prop_assert!(inside == in_interval || near_edge);
    }

    #[test]
    fn legendre_of_kappa_is_i1_above_the_minimum(n in 2u32..8, dx in 0.0..8.0f64) {
        let x = f64::from(n - 1) + dx;
        let grid = linspace(-30.0, 30.0, 601);
        let v = legendre_transform(|l| kappa(l, dim(n)), x, &grid).unwrap().value();
        prop_assert!((v - rate(&RateFunctionSpec::i1(dim(n)), x)).abs() < 1e-8);
    }

    #[test]
    fn hirao_legendre_matches_closed_form(x in 0.0..10.0f64, k in 0.0..3.0f64, m in 0.5..8.0f64) {
        let grid = linspace(-40.0, 40.0, 801);
        let v = legendre_transform(|l| hirao_lambda_corrected(l, k, m), x, &grid).unwrap().value();
        prop_assert!((v - hirao_star_closed(x, k, m)).abs() < 1e-6);
    }

    #[test]
    fn hirao_lambda_is_nondecreasing(a in -20.0..20.0f64, b in -20.0..20.0f64, k in 0.0..3.0f64, m in 0.5..8.0f64) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(hirao_lambda_corrected(lo, k, m) <= hirao_lambda_corrected(hi, k, m));
    }
}

#[test]
fn hirao_transform_diverges_for_negative_x() {
    let grid = linspace(-40.0, 40.0, 801);
    for x in [-0.1, -1.0, -5.0] {
        assert_eq!(legendre_transform(|l| hirao_lambda_corrected(l, 0.0, 2.0), x, &grid).unwrap(), Legendre::Diverged);
    }
}

#[test]
fn p3_solves_the_radial_forward_equation() {
    // With the generator Δ the density obeys ∂_t p = ∂²p − ∂((n−1) coth η · p).
    let cfg = QuadratureConfig::default();
    let p = |eta: f64, t: f64| radial_density(&KernelQuery::new(3, eta, t).unwrap(), &cfg).unwrap();
    let flux = |eta: f64, t: f64| 2.0 / eta.tanh() * p(eta, t);
    let h = 1e-3;
    for &(eta, t) in &[(0.5, 0.3), (1.0, 1.0), (2.5, 1.0), (4.0, 2.0), (10.0, 5.0)] {
        let dt = (p(eta, t + h) - p(eta, t - h)) / (2.0 * h);
        let d2 = (p(eta + h, t) - 2.0 * p(eta, t) + p(eta - h, t)) / (h * h);
        let df = (flux(eta + h, t) - flux(eta - h, t)) / (2.0 * h);
        let rhs = d2 - df;
        assert!((dt - rhs).abs() <= 1e-3 * dt.abs().max(rhs.abs()), "η={eta} t={t}: {dt} vs {rhs}");
    }
}

#[test]
fn p3_tail_decreases_past_the_mode() {
    let cfg = QuadratureConfig::default();
    for t in [0.5, 2.0, 10.0] {
        let mode = hbm_core::kernel::density_mode_3d(t);
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let v = radial_density(&KernelQuery::new(3, mode + 0.05 * i as f64, t).unwrap(), &cfg).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }
}

#[test]
fn envelope_contains_the_density() {
    let cfg = QuadratureConfig::default();
    let etas = [0.01, 0.1, 1.0, 5.0, 20.0, 50.0];
    let ts = [0.01, 0.1, 1.0, 10.0, 100.0];
    for n in [2, 3] {
        let report = sandwich_scan(dim(n), &etas, &ts, &cfg).unwrap();
        let d_hat = report.density_constant();
        for &(eta, t) in &report.grid {
            let q = KernelQuery::new(n, eta, t).unwrap();
            let (lo, hi) = density_envelope(&q, d_hat).unwrap();
            let p = radial_density(&q, &cfg).unwrap();
            assert!(lo <= p * (1.0 + 1e-9) && p <= hi * (1.0 + 1e-9), "n={n} η={eta} t={t}");
        }
        assert!(d_hat >= surface_area_coeff(dim(n)).recip());
    }
}

#[test]
fn mgf_bound_dominates_quadrature() {
    let cfg = QuadratureConfig::default();
    let n3 = dim(3);
    let etas: Vec<f64> = (0..40).map(|i| 0.01 * 1.2f64.powi(i)).collect();
    let ts = [0.01, 0.1, 1.0, 10.0, 100.0];
    let d_hat = sandwich_scan(n3, &etas, &ts, &cfg).unwrap().density_constant();
    for lambda in [0.1, 0.5, 1.0, 2.0, 4.0] {
        for t in [0.5, 1.0, 10.0, 50.0] {
            let exact = mgf_quadrature(n3, lambda, t, &cfg).unwrap().ln_value;
            let bound = mgf_upper_bound(&MgfBoundParams::new(lambda, t, n3, d_hat).unwrap()).unwrap().ln_value();
            assert!(bound > exact, "λ={lambda} t={t}");
        }
    }
}

#[test]
fn exact_sampler_matches_quadrature_cdf() {
    let cfg = QuadratureConfig::default();
    let n3 = dim(3);
    for t in [0.3, 5.0] {
        let table = CdfTable::new(n3, t, 2000, &cfg).unwrap();
        let xs = sample_radial_exact_3d(t, 10_000, 11).unwrap();
        assert!(xs.iter().all(|&x| x > 0.0));
        let d = ks_statistic(&xs, |x| table.cdf(x));
        assert!(d < ks_critical_value(0.01, 1e4).unwrap(), "t={t}: {d}");
    }
}

#[test]
fn exact_sampler_mean_matches_quadrature() {
    let cfg = QuadratureConfig::default();
    let t = 5.0;
    let n3 = dim(3);
    let m1 = ln_density_mass(n3, t, 0.0, None, &cfg).unwrap();
    // E[D] from the derivative of the MGF at zero.
    let h = 1e-4;
    let mean = (mgf_quadrature(n3, h, t, &cfg).unwrap().ln_value - mgf_quadrature(n3, -h, t, &cfg).unwrap().ln_value)
        / (2.0 * h);
    assert!((m1.value() - 1.0).abs() < 1e-8);
    let xs = sample_radial_exact_3d(t, 100_000, 5).unwrap();
    let (m, v) = (hbm_core::stats::mean(&xs), hbm_core::stats::variance(&xs));
    assert!((m - mean).abs() < 3.0 * (v / xs.len() as f64).sqrt(), "{m} vs {mean}");
}

fn ln_density_mass(n: Dimension, t: f64, a: f64, b: Option<f64>, cfg: &QuadratureConfig) -> hbm_core::Result<hbm_core::quad::LogIntegral> {
    hbm_core::kernel::ln_density_mass(n, t, a, b, cfg)
}

fn radii(samples: &[PathSample]) -> Vec<f64> {
    samples.iter().map(|s| s.terminal_radius).collect()
}

#[test]
fn radial_and_halfspace_samplers_agree() {
    for n in [2u32, 3] {
        for t in [1.0, 10.0] {
            let dt = 2e-3;
            let paths = 2000;
            let radial = SimulationPlan::new(dim(n), Start::Origin, t, dt, paths, 21).unwrap();
            let start = HalfSpacePoint::origin(dim(n));
            let half = SimulationPlan::new(dim(n), Start::Point(start), t, dt, paths, 22).unwrap();
            let a = radii(&simulate_radial(&radial).unwrap());
            let b = radii(&simulate_halfspace(&half).unwrap());
            let d = ks_two_sample(&a, &b);
            let p = ks_p_value(d, (paths * paths) as f64 / (2 * paths) as f64);
            assert!(p > 0.05, "n={n} t={t}: D={d} p={p}");
        }
    }
}

#[test]
fn halfspace_convention_decided_by_p3() {
    // The y∂_y coefficient of the operator fixes the drift of log Y. Only
    // one of the two candidate readings reproduces the law of p₃.
    let cfg = QuadratureConfig::default();
    let (t, paths) = (1.0, 4000);
    let table = CdfTable::new(dim(3), t, 2000, &cfg).unwrap();
    let crit = ks_critical_value(0.01, paths as f64).unwrap();
    let ks = |convention| {
        let mut plan =
            SimulationPlan::new(dim(3), Start::Point(HalfSpacePoint::origin(dim(3))), t, 1e-3, paths, 3).unwrap();
        plan.convention = convention;
        ks_statistic(&radii(&simulate_halfspace(&plan).unwrap()), |x| table.cdf(x))
    };
    let standard = ks(OperatorConvention::Standard);
    let printed = ks(OperatorConvention::AsPrinted);
    assert!(standard < crit, "standard reading rejected: {standard}");
    assert!(printed > crit, "printed reading accepted: {printed}");
}

#[test]
fn log_y_drift_matches_exact_law() {
    let (t, paths) = (2.0, 20_000u64);
    for n in [2u32, 3, 5] {
        let start = HalfSpacePoint::origin(dim(n));
        let plan = SimulationPlan::new(dim(n), Start::Point(start.clone()), t, 0.5, paths, 8).unwrap();
        let hy = simulate_halfspace_points(&plan).unwrap();
        let logs: Vec<f64> = hy.iter().map(|p| (p.y() / start.y()).ln()).collect();
        let (m, v) = (hbm_core::stats::mean(&logs), hbm_core::stats::variance(&logs));
        let want = -f64::from(n - 1) * t;
        assert!((m - want).abs() < 3.0 * (v / paths as f64).sqrt(), "n={n}: {m} vs {want}");
    }
}

#[test]
fn ks_distance_shrinks_as_dt_halves() {
    let cfg = QuadratureConfig::default();
    let t = 1.0;
    let table = CdfTable::new(dim(3), t, 2000, &cfg).unwrap();
    let d: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let plan = SimulationPlan::new(dim(3), Start::Origin, t, dt, 40_000, 17).unwrap();
            ks_statistic(&radii(&simulate_radial(&plan).unwrap()), |x| table.cdf(x))
        })
        .collect();
    let noise = ks_critical_value(0.05, 40_000.0).unwrap();
    assert!(d[0] > d[2], "{d:?}");
    assert!(d.windows(2).all(|w| w[1] <= w[0] + noise), "{d:?}");
}

#[test]
fn hit_fraction_is_monotone() {
    let n3 = dim(3);
    let frac = |eta0: f64, horizon: f64| {
        let plan = SimulationPlan::new(n3, Start::Radius(eta0), horizon, 1e-2, 4000, 99).unwrap();
        let s = first_passage(&plan, 1.0).unwrap();
        s.iter().filter(|p| p.hit_time.is_some()).count()
    };
    let by_start: Vec<usize> = [1.2, 1.5, 2.0, 3.0].iter().map(|&e| frac(e, 5.0)).collect();
    assert!(by_start.windows(2).all(|w| w[1] <= w[0]), "{by_start:?}");
    let by_horizon: Vec<usize> = [0.5, 2.0, 5.0, 20.0].iter().map(|&h| frac(1.5, h)).collect();
    assert!(by_horizon.windows(2).all(|w| w[1] >= w[0]), "{by_horizon:?}");
}

#[test]
fn hit_times_respect_the_horizon() {
    let plan = SimulationPlan::new(dim(2), Start::Radius(1.3), 3.0, 1e-2, 2000, 4).unwrap();
    for s in first_passage(&plan, 1.0).unwrap() {
        match s.hit_time {
            Some(h) => assert!(h <= 3.0 && !s.censored),
            None => assert!(s.censored),
        }
    }
}

#[test]
fn paths_near_the_floor_do_not_blow_up() {
    let plan = SimulationPlan::new(dim(3), Start::Radius(2e-6), 0.5, 1e-3, 2000, 31).unwrap();
    let max = radii(&simulate_radial(&plan).unwrap()).into_iter().fold(0.0, f64::max);
    assert!(max < 6.0, "max radius {max}");
}

#[test]
fn worker_split_does_not_change_paths() {
    let plan = SimulationPlan::new(dim(3), Start::Radius(2.0), 1.0, 1e-2, 100, 1234).unwrap();
    let whole = first_passage(&plan, 1.0).unwrap();
    let mut parts = first_passage_range(&plan, 1.0, 0..37).unwrap();
    parts.extend(first_passage_range(&plan, 1.0, 37..100).unwrap());
    assert_eq!(whole, parts);
}
