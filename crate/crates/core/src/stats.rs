//! Sample statistics used to validate samplers: moments, Kolmogorov–Smirnov
//! tests, binomial intervals and small least-squares fits.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{invalid, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup |F_N − F|` for a continuous reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let v = sorted(samples);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Same as [`ks_statistic`] for samples already sorted ascending with their
/// reference CDF values.
pub fn ks_statistic_sorted(cdf_at_sorted: &[f64]) -> f64 {
    let n = cdf_at_sorted.len() as f64;
    cdf_at_sorted
        .iter()
        .enumerate()
        .fold(0.0, |d, (i, &f)| d.max(f - i as f64 / n).max((i + 1) as f64 / n - f))
}

/// `sup |F_a − F_b|` between two empirical distributions.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn effective_scale(n_eff: f64) -> f64 {
    let r = n_eff.sqrt();
    r + 0.12 + 0.11 / r
}

/// Asymptotic p-value of a KS distance `d` with effective sample size
/// `n_eff` (use `n₁n₂/(n₁+n₂)` for two samples).
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    kolmogorov_survival(effective_scale(n_eff) * d)
}

/// Distance above which a KS test at level `alpha` rejects.
pub fn ks_critical_value(alpha: f64, n_eff: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || !(n_eff >= 1.0) {
        return invalid("KS critical value needs alpha in (0, 1) and n ≥ 1");
    }
    let (mut lo, mut hi) = (0.2, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / effective_scale(n_eff))
}

/// Normal-approximation interval for a binomial proportion.
pub fn binomial_interval(hits: u64, trials: u64, z: f64) -> (f64, f64, f64) {
    let p = hits as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    (p, p - z * se, p + z * se)
}

/// Least-squares coefficients for `y ≈ Σ_j c_j·basis_j(x)`, by normal
/// equations and partial pivoting. Meant for a handful of parameters.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let p = rows.first().map_or(0, Vec::len);
    if p == 0 || rows.len() != y.len() || rows.len() < p || rows.iter().any(|r| r.len() != p) {
        return invalid("least squares needs at least as many rows as parameters");
    }
    let mut a = alloc::vec![alloc::vec![0.0; p + 1]; p];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += r[i] * r[j];
            }
            a[i][p] += r[i] * yi;
        }
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[piv][col].abs() < 1e-300 {
            return invalid("least squares system is singular");
        }
        a.swap(col, piv);
        for row in 0..p {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    Ok((0..p).map(|i| a[i][p] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert_relative_eq!(variance(&xs), 5.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn kolmogorov_quantiles() {
        // Standard table values.
        assert_relative_eq!(kolmogorov_survival(1.3581), 0.05, epsilon = 1e-4);
        assert_relative_eq!(kolmogorov_survival(1.6276), 0.01, epsilon = 1e-4);
        assert_relative_eq!(ks_critical_value(0.01, 1e12).unwrap() * 1e6, 1.6276, epsilon = 1e-3);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert_relative_eq!(ks_statistic(&xs, |x| x), 0.005, epsilon = 1e-12);
    }

    #[test]
    fn ks_two_sample_disjoint_and_equal() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn least_squares_recovers_exact_fit() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x, 1.0 / x]).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 2.0 - 0.5 * x + 3.0 / x).collect();
        let c = least_squares(&rows, &y).unwrap();
        assert_relative_eq!(c[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(c[1], -0.5, epsilon = 1e-10);
        assert_relative_eq!(c[2], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn binomial_interval_brackets_estimate() {
        let (p, lo, hi) = binomial_interval(30, 100, 1.96);
        assert!(lo < p && p < hi);
    }
}
