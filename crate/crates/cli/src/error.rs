use crate::config::Violation;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read configuration: {0}")]
    Config(String),

    #[error("configuration has {} violation(s)", .0.len())]
    Invalid(Vec<Violation>),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),

    #[error("worker pool: {0}")]
    Pool(String),

    /// A module failed; partial outputs (if any) are listed in the manifest.
    #[error("numerical failure: {}", .failures.join("; "))]
    Numerical { failures: Vec<String>, manifest: Option<Box<crate::manifest::RunManifest>> },
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 2,
            Self::Numerical { .. } => 3,
            _ => 1,
        }
    }

    /// Structured report printed on stderr.
    pub fn report(&self) -> serde_json::Value {
        let kind = match self {
            Self::Config(_) => "config",
            Self::Invalid(_) => "validation",
            Self::Io(_) => "io",
            Self::UnknownExperiment(_) => "unknown-experiment",
            Self::Pool(_) => "pool",
            Self::Numerical { .. } => "numerical",
        };
        let mut report = serde_json::json!({ "error": kind, "message": self.to_string() });
        match self {
            Self::Invalid(v) => report["violations"] = serde_json::to_value(v).unwrap_or_default(),
            Self::Numerical { failures, .. } => report["failures"] = serde_json::json!(failures),
            _ => {}
        }
        report
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
