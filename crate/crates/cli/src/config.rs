//! Experiment configuration: one JSON document naming the experiment, its
//! parameters, the master seed and the output directory.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use hbm_core::hitting::{HittingQuery, SeriesBudget};
use hbm_core::ldp::ModerateScale;
use hbm_core::sampler::{SimulationPlan, Start};
use hbm_core::{Dimension, HalfSpacePoint};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    KernelScan,
    Normalization,
    LdpRate,
    MdpRate,
    MgfBound,
    HittingDecay,
    HittingMc,
    HiraoCheck,
    EuclideanCompare,
    RadialMc,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Self::KernelScan,
        Self::Normalization,
        Self::LdpRate,
        Self::MdpRate,
        Self::MgfBound,
        Self::HittingDecay,
        Self::HittingMc,
        Self::HiraoCheck,
        Self::EuclideanCompare,
        Self::RadialMc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::KernelScan => "kernel-scan",
            Self::Normalization => "normalization",
            Self::LdpRate => "ldp-rate",
            Self::MdpRate => "mdp-rate",
            Self::MgfBound => "mgf-bound",
            Self::HittingDecay => "hitting-decay",
            Self::HittingMc => "hitting-mc",
            Self::HiraoCheck => "hirao-check",
            Self::EuclideanCompare => "euclidean-compare",
            Self::RadialMc => "radial-mc",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// One broken rule: the offending field and what it must satisfy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// A list of reals: a single number, an explicit array, or an evenly
/// (optionally log-) spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Scalar(f64),
    List(Vec<f64>),
    Range {
        from: f64,
        to: f64,
        points: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Scalar(v) => vec![*v],
            Self::List(v) => v.clone(),
            Self::Range { from, to, points, log } => {
                if *points < 2 {
                    return vec![*from; *points];
                }
                let at = |i: usize| i as f64 / (*points - 1) as f64;
                if *log {
                    (0..*points).map(|i| (from.ln() + (to.ln() - from.ln()) * at(i)).exp()).collect()
                } else {
                    (0..*points).map(|i| from + (to - from) * at(i)).collect()
                }
            }
        }
    }

    fn log_range(from: f64, to: f64, points: usize) -> Self {
        Self::Range { from, to, points, log: true }
    }
}

/// One dimension or several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dims {
    One(u32),
    Many(Vec<u32>),
}

impl Dims {
    pub fn values(&self) -> Vec<u32> {
        match self {
            Self::One(n) => vec![*n],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Radial,
    Halfspace,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Named(StartName),
    Radius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartName {
    Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelScanParams {
    pub n: Dims,
    pub eta_grid: Grid,
    pub t_grid: Grid,
}

impl Default for KernelScanParams {
    fn default() -> Self {
        Self { n: Dims::One(3), eta_grid: Grid::log_range(1e-2, 50.0, 41), t_grid: Grid::log_range(1e-2, 1e2, 21) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizationParams {
    pub n: Dims,
    pub t: Grid,
}

impl Default for NormalizationParams {
    fn default() -> Self {
        Self { n: Dims::One(3), t: Grid::Scalar(1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdpRateParams {
    pub n: u32,
    /// Threshold on `D/t`.
    pub x: f64,
    pub side: Side,
    pub t_grid: Grid,
    pub method: Method,
    /// Monte Carlo only.
    pub paths: u64,
    /// Monte Carlo with the Euler sampler (`n ≠ 3`) only.
    pub dt: f64,
}

impl Default for LdpRateParams {
    fn default() -> Self {
        Self {
            n: 3,
            x: 3.0,
            side: Side::Above,
            t_grid: Grid::List(vec![20.0, 40.0, 80.0]),
            method: Method::Quadrature,
            paths: 100_000,
            dt: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdpRateParams {
    pub n: u32,
    pub beta: f64,
    pub x: f64,
    pub t_grid: Grid,
}

impl Default for MdpRateParams {
    fn default() -> Self {
        Self { n: 3, beta: 0.25, x: 2.0, t_grid: Grid::List(vec![1e2, 1e3, 1e4]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MgfBoundParamsConfig {
    pub n: u32,
    pub lambda: Grid,
    pub t_grid: Grid,
    /// Density sandwich constant; scanned from the exact density when absent.
    pub d_hat: Option<f64>,
    pub scan_eta_grid: Grid,
    pub scan_t_grid: Grid,
}

impl Default for MgfBoundParamsConfig {
    fn default() -> Self {
        Self {
            n: 3,
            lambda: Grid::List(vec![0.5, 1.0, 2.0]),
            t_grid: Grid::List(vec![1.0, 10.0, 50.0, 100.0, 1000.0]),
            d_hat: None,
            scan_eta_grid: Grid::log_range(1e-2, 50.0, 41),
            scan_t_grid: Grid::log_range(1e-2, 1e2, 21),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HittingDecayParams {
    pub n: Dims,
    pub eta1: f64,
    pub eta_grid: Grid,
    pub series_terms: u32,
    pub series_tail_tol: f64,
}

impl Default for HittingDecayParams {
    fn default() -> Self {
        let b = SeriesBudget::default();
        Self {
            n: Dims::One(3),
            eta1: 1.0,
            eta_grid: Grid::List(vec![10.0, 20.0, 40.0]),
            series_terms: b.terms,
            series_tail_tol: b.tail_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HittingMcParams {
    pub n: u32,
    pub eta0: f64,
    pub eta1: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: u64,
    pub reflection_floor: f64,
}

impl Default for HittingMcParams {
    fn default() -> Self {
        Self {
            n: 3,
            eta0: 2.0,
            eta1: 1.0,
            horizon: 50.0,
            dt: 1e-3,
            paths: 100_000,
            reflection_floor: hbm_core::sampler::DEFAULT_REFLECTION_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HiraoCheckParams {
    pub n: u32,
    pub x_grid: Grid,
    pub lambda_grid: Grid,
    /// Defaults to `0`.
    pub k: Option<f64>,
    /// Defaults to `n − 1`.
    pub m: Option<f64>,
}

impl Default for HiraoCheckParams {
    fn default() -> Self {
        Self {
            n: 3,
            x_grid: Grid::Range { from: 0.0, to: 10.0, points: 101, log: false },
            lambda_grid: Grid::Range { from: -40.0, to: 40.0, points: 801, log: false },
            k: None,
            m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EuclideanCompareParams {
    pub n: Dims,
    pub r1: f64,
    pub r_grid: Grid,
}

impl Default for EuclideanCompareParams {
    fn default() -> Self {
        Self { n: Dims::Many(vec![3, 4, 5]), r1: 1.0, r_grid: Grid::List(vec![10.0, 1e3, 1e6]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadialMcParams {
    pub n: u32,
    pub t: f64,
    pub dt: f64,
    pub paths: u64,
    pub start: StartSpec,
    pub sampler: SamplerKind,
    pub reflection_floor: f64,
    /// Write the terminal radii as a binary dump next to the reports.
    pub dump_radii: bool,
    /// Cells of the tabulated reference CDF used for the KS statistic.
    pub cdf_cells: usize,
}

impl Default for RadialMcParams {
    fn default() -> Self {
        Self {
            n: 3,
            t: 30.0,
            dt: 1e-3,
            paths: 100_000,
            start: StartSpec::Named(StartName::Origin),
            sampler: SamplerKind::Radial,
            reflection_floor: hbm_core::sampler::DEFAULT_REFLECTION_FLOOR,
            dump_radii: false,
            cdf_cells: 4000,
        }
    }
}

/// Typed parameters of a validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    KernelScan(KernelScanParams),
    Normalization(NormalizationParams),
    LdpRate(LdpRateParams),
    MdpRate(MdpRateParams),
    MgfBound(MgfBoundParamsConfig),
    HittingDecay(HittingDecayParams),
    HittingMc(HittingMcParams),
    HiraoCheck(HiraoCheckParams),
    EuclideanCompare(EuclideanCompareParams),
    RadialMc(RadialMcParams),
}

fn typed<T: DeserializeOwned>(map: &Map<String, Value>, out: &mut Vec<Violation>) -> Option<T> {
    match serde_json::from_value(Value::Object(map.clone())) {
        Ok(v) => Some(v),
        Err(e) => {
            out.push(Violation::new("parameters", e.to_string()));
            None
        }
    }
}

/// Parse the parameters for the named experiment; `Err` carries every
/// violation found.
pub fn parse(config: &ExperimentConfig) -> Result<(Experiment, Params), Vec<Violation>> {
    let mut v = Vec::new();
    let Some(exp) = Experiment::parse(&config.experiment) else {
        let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        return Err(vec![Violation::new("experiment", format!("unknown experiment; expected one of {}", names.join(", ")))]);
    };
    let p = &config.parameters;
    let params = match exp {
        Experiment::KernelScan => typed(p, &mut v).map(Params::KernelScan),
        Experiment::Normalization => typed(p, &mut v).map(Params::Normalization),
        Experiment::LdpRate => typed(p, &mut v).map(Params::LdpRate),
        Experiment::MdpRate => typed(p, &mut v).map(Params::MdpRate),
        Experiment::MgfBound => typed(p, &mut v).map(Params::MgfBound),
        Experiment::HittingDecay => typed(p, &mut v).map(Params::HittingDecay),
        Experiment::HittingMc => typed(p, &mut v).map(Params::HittingMc),
        Experiment::HiraoCheck => typed(p, &mut v).map(Params::HiraoCheck),
        Experiment::EuclideanCompare => typed(p, &mut v).map(Params::EuclideanCompare),
        Experiment::RadialMc => typed(p, &mut v).map(Params::RadialMc),
    };
    let Some(params) = params else { return Err(v) };
    check(&params, &mut v);
    if v.is_empty() {
        Ok((exp, params))
    } else {
        Err(v)
    }
}

/// Every violation in the configuration; empty iff `run` would start.
pub fn validate(config: &ExperimentConfig) -> Vec<Violation> {
    parse(config).err().unwrap_or_default()
}

fn core_rule(v: &mut Vec<Violation>, field: &str, r: hbm_core::Result<impl Sized>) {
    if let Err(e) = r {
        let rule = match e {
            hbm_core::Error::InvalidArgument(m) => m,
            other => other.to_string(),
        };
        v.push(Violation::new(field, rule));
    }
}

fn dims(v: &mut Vec<Violation>, field: &str, ns: &[u32], allowed: Option<&[u32]>) {
    if ns.is_empty() {
        v.push(Violation::new(field, "at least one dimension is required"));
    }
    for &n in ns {
        core_rule(v, field, Dimension::new(n));
        if let Some(a) = allowed {
            if n >= 2 && !a.contains(&n) {
                v.push(Violation::new(field, format!("n = {n} has no exact density; allowed: {a:?}")));
            }
        }
    }
}

fn grid(v: &mut Vec<Violation>, field: &str, g: &Grid, positive: bool, increasing: bool) -> Vec<f64> {
    if let Grid::Range { from, to, points, log } = g {
        if *points == 0 {
            v.push(Violation::new(field, "range needs at least one point"));
        }
        if *log && !(*from > 0.0 && *to > 0.0) {
            v.push(Violation::new(field, "log-spaced range needs positive endpoints"));
        }
    }
    let xs = g.values();
    if xs.is_empty() {
        v.push(Violation::new(field, "grid must not be empty"));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        v.push(Violation::new(field, "grid values must be finite"));
    } else if positive && xs.iter().any(|&x| !(x > 0.0)) {
        v.push(Violation::new(field, "grid values must be positive"));
    }
    if increasing && xs.windows(2).any(|w| !(w[1] > w[0])) {
        v.push(Violation::new(field, "grid must be strictly increasing"));
    }
    xs
}

fn positive(v: &mut Vec<Violation>, field: &str, x: f64) {
    if !(x > 0.0) || !x.is_finite() {
        v.push(Violation::new(field, "must be finite and positive"));
    }
}

fn check(params: &Params, v: &mut Vec<Violation>) {
    match params {
        Params::KernelScan(p) => {
            dims(v, "n", &p.n.values(), Some(&[2, 3]));
            grid(v, "eta_grid", &p.eta_grid, true, false);
            grid(v, "t_grid", &p.t_grid, true, false);
        }
        Params::Normalization(p) => {
            dims(v, "n", &p.n.values(), Some(&[2, 3]));
            grid(v, "t", &p.t, true, false);
        }
        Params::LdpRate(p) => {
            dims(v, "n", &[p.n], None);
            if !(p.x >= 0.0) || !p.x.is_finite() {
                v.push(Violation::new("x", "threshold must be finite and non-negative"));
            }
            let ts = grid(v, "t_grid", &p.t_grid, true, true);
            if ts.len() < 2 {
                v.push(Violation::new("t_grid", "at least two times are needed to extrapolate"));
            }
            match p.method {
                Method::Quadrature => dims(v, "n", &[p.n], Some(&[2, 3])),
                Method::MonteCarlo => {
                    if p.paths == 0 {
                        v.push(Violation::new("paths", "at least one path is required"));
                    }
                    if p.n != 3 {
                        for &t in &ts {
                            core_rule(v, "dt", Dimension::new(p.n).and_then(|n| SimulationPlan::new(n, Start::Origin, t, p.dt, p.paths.max(1), 0)));
                        }
                    }
                }
            }
        }
        Params::MdpRate(p) => {
            dims(v, "n", &[p.n], Some(&[2, 3]));
            core_rule(v, "beta", ModerateScale::new(p.beta));
            if !p.x.is_finite() {
                v.push(Violation::new("x", "must be finite"));
            }
            let ts = grid(v, "t_grid", &p.t_grid, true, true);
            if ts.len() < 3 {
                v.push(Violation::new("t_grid", "at least three times are needed to extrapolate"));
            }
            if p.x < 0.0 && p.beta > 0.0 && p.beta < 0.5 {
                let low = ts.iter().find(|&&t| f64::from(p.n.max(2) - 1) * t + p.x * t.powf(1.0 - p.beta) <= 0.0);
                if let Some(t) = low {
                    v.push(Violation::new("x", format!("threshold (n−1)t + x·t^(1−β) is not positive at t = {t}")));
                }
            }
        }
        Params::MgfBound(p) => {
            dims(v, "n", &[p.n], None);
            let ls = grid(v, "lambda", &p.lambda, false, false);
            if ls.iter().any(|l| !l.is_finite()) {
                v.push(Violation::new("lambda", "must be finite"));
            }
            grid(v, "t_grid", &p.t_grid, true, false);
            match p.d_hat {
                Some(d) if !(d >= 1.0) || !d.is_finite() => v.push(Violation::new("d_hat", "must be finite and ≥ 1")),
                Some(_) => {}
                None => {
                    if p.n >= 2 && p.n != 2 && p.n != 3 {
                        v.push(Violation::new("d_hat", "required for n ≥ 4, where no exact density is available to scan"));
                    }
                    grid(v, "scan_eta_grid", &p.scan_eta_grid, true, false);
                    grid(v, "scan_t_grid", &p.scan_t_grid, true, false);
                }
            }
        }
        Params::HittingDecay(p) => {
            let ns = p.n.values();
            dims(v, "n", &ns, None);
            core_rule(v, "series_terms", SeriesBudget::new(p.series_terms, p.series_tail_tol));
            let etas = grid(v, "eta_grid", &p.eta_grid, true, true);
            if etas.last().is_some_and(|&e| e < 20.0) {
                v.push(Violation::new("eta_grid", "grid must reach at least 20"));
            }
            for &eta in &etas {
                if let Err(e) = HittingQuery::new(2, p.eta1, eta) {
                    v.push(Violation::new("eta1", e.to_string()));
                    break;
                }
            }
        }
        Params::HittingMc(p) => {
            dims(v, "n", &[p.n], None);
            core_rule(v, "eta1", HittingQuery::new(p.n.max(2), p.eta1, p.eta0));
            if let Ok(n) = Dimension::new(p.n) {
                if p.horizon <= 0.0 {
                    v.push(Violation::new("horizon", "must be positive"));
                }
                let plan = SimulationPlan::new(n, Start::Radius(p.eta0), p.horizon, p.dt, p.paths, 0).map(|mut plan| {
                    plan.reflection_floor = p.reflection_floor;
                    plan
                });
                core_rule(v, "plan", plan.and_then(|plan| plan.validate()));
            }
        }
        Params::HiraoCheck(p) => {
            dims(v, "n", &[p.n], None);
            let xs = grid(v, "x_grid", &p.x_grid, false, false);
            if xs.iter().any(|&x| x < 0.0) {
                v.push(Violation::new("x_grid", "x must be non-negative"));
            }
            let ls = grid(v, "lambda_grid", &p.lambda_grid, false, true);
            if ls.len() < 64 {
                v.push(Violation::new("lambda_grid", "at least 64 points are required"));
            }
            if p.k.is_some_and(|k| !(k >= 0.0)) {
                v.push(Violation::new("k", "must be non-negative"));
            }
            if p.m.is_some_and(|m| !(m > 0.0)) {
                v.push(Violation::new("m", "must be positive"));
            }
        }
        Params::EuclideanCompare(p) => {
            dims(v, "n", &p.n.values(), None);
            positive(v, "r1", p.r1);
            let rs = grid(v, "r_grid", &p.r_grid, true, false);
            if rs.iter().any(|&r| !(r > p.r1)) {
                v.push(Violation::new("r_grid", "every r must exceed r1"));
            }
        }
        Params::RadialMc(p) => {
            dims(v, "n", &[p.n], None);
            if p.cdf_cells < 16 {
                v.push(Violation::new("cdf_cells", "at least 16 cells are required"));
            }
            positive(v, "t", p.t);
            match p.sampler {
                SamplerKind::Exact => {
                    if p.n != 3 {
                        v.push(Violation::new("sampler", "exact sampling is only available for n = 3"));
                    }
                    if p.start != StartSpec::Named(StartName::Origin) {
                        v.push(Violation::new("start", "exact sampling starts at the origin"));
                    }
                    if p.paths == 0 {
                        v.push(Violation::new("paths", "at least one path is required"));
                    }
                }
                kind => {
                    if let Ok(n) = Dimension::new(p.n) {
                        let start = match (kind, p.start) {
                            (SamplerKind::Halfspace, StartSpec::Named(StartName::Origin)) => Start::Point(HalfSpacePoint::origin(n)),
                            (SamplerKind::Halfspace, StartSpec::Radius(_)) => {
                                v.push(Violation::new("start", "the half-space sampler starts at the origin"));
                                return;
                            }
                            (_, StartSpec::Named(StartName::Origin)) => Start::Origin,
                            (_, StartSpec::Radius(r)) => Start::Radius(r),
                        };
                        let plan = SimulationPlan::new(n, start, p.t, p.dt, p.paths, 0).map(|mut plan| {
                            plan.reflection_floor = p.reflection_floor;
                            plan
                        });
                        core_rule(v, "plan", plan.and_then(|plan| plan.validate()));
                    }
                }
            }
        }
    }
}
