//! Output layouts per experiment: file names, CSV columns with units, and
//! JSON fields. Versioned with [`SCHEMA_VERSION`].

use serde::Serialize;

use crate::config::Experiment;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
    pub description: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileSchema {
    /// File name; `{n}` stands for the dimension.
    pub file: &'static str,
    pub format: &'static str,
    /// CSV columns in order, or JSON top-level fields.
    pub fields: Vec<Column>,
    /// Present only under the stated condition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub when: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSchema {
    pub experiment: &'static str,
    pub schema_version: u32,
    pub files: Vec<FileSchema>,
}

const fn col(name: &'static str, unit: &'static str, description: &'static str) -> Column {
    Column { name, unit, description }
}

fn csv(file: &'static str, fields: Vec<Column>) -> FileSchema {
    FileSchema { file, format: "csv", fields, when: None }
}

fn json(file: &'static str, fields: Vec<Column>) -> FileSchema {
    FileSchema { file, format: "json", fields, when: None }
}

fn when(mut f: FileSchema, cond: &'static str) -> FileSchema {
    f.when = Some(cond);
    f
}

pub fn report_schema(e: Experiment) -> ReportSchema {
    let files = match e {
        Experiment::KernelScan => vec![
            csv("kernel_scan_n{n}.csv", vec![
                col("eta", "hyperbolic distance", "radius"),
                col("t", "time", "time"),
                col("k", "1/volume", "heat kernel k_n(eta, t)"),
                col("h", "1/volume", "small-time shape h_n(eta, t)"),
                col("g", "1/length", "sandwich comparison function g_n(eta, t)"),
                col("ratio", "dimensionless", "sinh^(n-1)(eta) k_n / g_n"),
            ]),
            json("kernel_scan.json", vec![col("scans", "", "per n: n, points, ratio_min, ratio_max, ratio_spread_factor, max_spread_across_t, kernel_constant, density_constant")]),
        ],
        Experiment::Normalization => vec![
            csv("normalization.csv", vec![
                col("n", "", "dimension"),
                col("t", "time", "time"),
                col("integral", "dimensionless", "integral of p_n(eta, t) over eta > 0"),
                col("abs_error", "dimensionless", "quadrature error estimate"),
            ]),
            json("normalization.json", vec![
                col("results", "", "list of {n, t, integral, abs_error}"),
                col("integral", "dimensionless", "the integral, when exactly one case was run"),
            ]),
        ],
        Experiment::LdpRate => vec![
            when(csv("ldp_rate.csv", vec![
                col("t", "time", "time"),
                col("tail_prob", "probability", "P(D_n(t)/t >= x), or <= x for the lower tail"),
                col("scaled_log", "1/time", "log(tail_prob)/t"),
                col("target", "1/time", "-I_1(x)"),
                col("abs_err", "1/time", "|scaled_log - target|"),
            ]), "method = quadrature"),
            when(json("ldp_rate.json", vec![
                col("n", "", "dimension"),
                col("x", "distance/time", "threshold"),
                col("side", "", "above or below"),
                col("target", "1/time", "-I_1(x)"),
                col("ln_tail_prob", "", "log tail probabilities in t order"),
                col("extrapolated", "1/time", "limit of scaled_log from the fit a + b ln(t)/t + c/t"),
                col("extrapolated_abs_err", "1/time", "|extrapolated - target|"),
                col("extrapolation_model", "", "fitted model"),
                col("extrapolated_two_param", "1/time", "limit from the fit a + b ln(t)/t"),
            ]), "method = quadrature"),
            when(csv("ldp_rate_mc.csv", vec![
                col("t", "time", "time"),
                col("hits", "count", "samples in the event"),
                col("trials", "count", "samples drawn"),
                col("scaled_log", "1/time", "log(hits/trials)/t"),
                col("ci_low", "1/time", "lower end of the 95% interval, mapped through log(.)/t"),
                col("ci_high", "1/time", "upper end of the 95% interval, mapped through log(.)/t"),
                col("target", "1/time", "-I_1(x)"),
                col("flagged", "", "fewer than 10 hits"),
            ]), "method = monte-carlo"),
            when(json("ldp_rate_mc.json", vec![
                col("extrapolated", "1/time", "limit from the fit a + b/t, or null"),
                col("dropped_t", "time", "times with no hits"),
            ]), "method = monte-carlo"),
        ],
        Experiment::MdpRate => vec![
            csv("mdp_rate.csv", vec![
                col("t", "time", "time"),
                col("speed", "", "t^(1-2 beta)"),
                col("tail_prob", "probability", "P(D_n(t) >= (n-1)t + x t^(1-beta)), or <= for x < 0"),
                col("scaled_log", "", "log(tail_prob)/speed"),
                col("target", "", "-x^2/4"),
                col("abs_err", "", "|scaled_log - target|"),
            ]),
            json("mdp_rate.json", vec![
                col("extrapolated", "", "limit from the fit a + b ln(v)/v + c/v in v = speed"),
                col("extrapolated_rel_err", "", "|extrapolated - target| / |target|"),
                col("extrapolated_two_param", "", "limit from the fit a + b ln(v)/v"),
            ]),
        ],
        Experiment::MgfBound => vec![
            csv("mgf_bound.csv", vec![
                col("lambda", "1/distance", "tilt"),
                col("t", "time", "time"),
                col("ln_mgf_quadrature", "", "log E[exp(lambda D_n(t))] by quadrature; nan without an exact density"),
                col("ln_bound", "", "log of the upper bound"),
                col("dominates", "", "ln_bound > ln_mgf_quadrature, or na"),
                col("kappa", "1/time", "lambda (lambda + n - 1)"),
                col("excess_rate", "1/time", "ln_bound/t - kappa"),
            ]),
            json("mgf_bound.json", vec![
                col("d_hat", "dimensionless", "density sandwich constant used"),
                col("d_hat_source", "", "config or sandwich-scan"),
                col("m_n", "", "ceil((n-1)/2)"),
            ]),
        ],
        Experiment::HittingDecay => vec![
            csv("hitting_decay.csv", vec![
                col("n", "", "dimension"),
                col("eta", "hyperbolic distance", "start distance"),
                col("P", "probability", "P_eta(T_eta1 < inf)"),
                col("log_P", "", "log P"),
                col("slope", "1/distance", "log(P)/eta"),
                col("target", "1/distance", "-(n-1)"),
                col("path", "", "stable or naive evaluation"),
                col("warning", "", "paths disagreed beyond 1e-6"),
                col("naive_P", "probability", "direct formula alone; nan when it does not give a probability"),
            ]),
            json("hitting_decay.json", vec![col("decay", "", "per n: eta, final_slope, target, abs_err, asserted, warning, naive_P, naive_rel_err, naive_failed")]),
        ],
        Experiment::HittingMc => vec![json("hitting_mc.json", vec![
            col("hits", "count", "paths reaching the ball before the horizon"),
            col("censored", "count", "paths that did not"),
            col("fraction", "probability", "hits/paths"),
            col("standard_error", "probability", "binomial standard error of fraction"),
            col("exact", "probability", "P_eta0(T_eta1 < inf)"),
            col("mean_hit_time", "time", "mean over hitting paths"),
            col("reflections", "count", "reflections at the floor"),
        ])],
        Experiment::HiraoCheck => vec![
            csv("hirao_check.csv", vec![
                col("x", "", "argument"),
                col("lambda_star_closed", "", "closed-form Lambda*(x)"),
                col("lambda_star_numeric", "", "numerical Legendre transform of the corrected Lambda"),
                col("two_I1", "", "2 I_1(x)"),
                col("discrepancy", "", "|lambda_star_closed - two_I1|"),
            ]),
            json("hirao_check.json", vec![
                col("knee", "", "-(2k+m)/2"),
                col("knee_jump", "", "jump of Lambda at the knee"),
                col("lambda_nondecreasing", "", "Lambda nondecreasing on the lambda grid"),
                col("max_transform_error", "", "max |numeric - closed|"),
                col("max_discrepancy", "", "max discrepancy"),
            ]),
        ],
        Experiment::EuclideanCompare => vec![
            csv("euclidean_compare.csv", vec![
                col("n", "", "dimension"),
                col("r", "length", "start radius"),
                col("P", "probability", "Euclidean hitting probability"),
                col("closed_form", "probability", "(r/r1)^(2-n)"),
                col("abs_err", "probability", "|P - closed_form|"),
                col("slope", "", "log(P)/log(r)"),
                col("target", "", "-(n-2)"),
            ]),
            json("euclidean_compare.json", vec![col("compare", "", "per n: max_abs_err, final_slope, target")]),
        ],
        Experiment::RadialMc => vec![
            json("radial_mc.json", vec![
                col("mean_over_t", "distance/time", "mean of D/t"),
                col("mean_over_t_standard_error", "distance/time", "standard error of mean_over_t"),
                col("variance_scaled", "distance^2/time", "sample variance of (D - (n-1)t)/sqrt(t)"),
                col("ks_statistic", "", "KS distance to the exact CDF (origin start, n in {2, 3}); nan otherwise"),
                col("ks_critical_1pct", "", "1% critical value, or null"),
                col("reflections", "count", "reflections at the floor"),
            ]),
            when(FileSchema { file: "radii.bin", format: "binary", fields: vec![
                col("magic", "", "8 bytes HBMRAD01"),
                col("count", "", "u64 little-endian"),
                col("radii", "hyperbolic distance", "count f64 little-endian values"),
            ], when: None }, "dump_radii = true"),
        ],
    };
    let mut files = files;
    files.push(json("manifest.json", vec![
        col("artifact", "", "producer name"),
        col("version", "", "producer version"),
        col("schema_version", "", "version of these layouts"),
        col("config", "", "configuration echo"),
        col("duration_seconds", "seconds", "wall-clock time"),
        col("status", "", "complete or partial"),
        col("failures", "", "module failures"),
        col("outputs", "", "list of {file, bytes, sha256}"),
    ]));
    ReportSchema { experiment: e.name(), schema_version: SCHEMA_VERSION, files }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_columns(e: Experiment) -> Vec<&'static str> {
        report_schema(e).files[0].fields.iter().map(|c| c.name).collect()
    }

    #[test]
    fn fixed_column_sets() {
        assert_eq!(csv_columns(Experiment::LdpRate), ["t", "tail_prob", "scaled_log", "target", "abs_err"]);
        assert_eq!(csv_columns(Experiment::HiraoCheck), ["x", "lambda_star_closed", "lambda_star_numeric", "two_I1", "discrepancy"]);
        assert_eq!(csv_columns(Experiment::KernelScan), ["eta", "t", "k", "h", "g", "ratio"]);
    }

    #[test]
    fn every_experiment_lists_a_manifest() {
        for e in Experiment::ALL {
            assert_eq!(report_schema(e).files.last().unwrap().file, "manifest.json");
        }
    }
}
