//! Configuration-driven experiment runner for the `hbm-core` numerics.
//!
//! A run reads one JSON configuration, validates it completely before any
//! computation, executes the experiment on a worker pool whose size never
//! affects the results, and writes CSV/JSON reports plus a manifest with a
//! SHA-256 checksum per output.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod output;
pub mod parallel;
pub mod schema;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{validate, Experiment, ExperimentConfig, Violation};
pub use error::CliError;
pub use manifest::RunManifest;

/// Output directory when neither the flag nor the config names one.
pub const DEFAULT_OUTPUT_DIR: &str = "hbm-output";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    /// Overrides `output_dir` from the configuration.
    pub output_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1, output_dir: None }
    }
}

fn write(dir: &Path, file: &str, data: &[u8]) -> Result<(), CliError> {
    let path = dir.join(file);
    std::fs::write(&path, data).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Validates and runs an experiment, writing its outputs and manifest.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let (_, params) = config::parse(config).map_err(CliError::Invalid)?;
    let dir = opts.output_dir.clone().or_else(|| config.output_dir.clone()).unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let pool = parallel::Pool::new(opts.workers)?;

    let outcome = experiments::execute(&params, config.master_seed, &pool);
    let mut outputs = Vec::with_capacity(outcome.artifacts.len());
    for a in &outcome.artifacts {
        write(&dir, &a.file, &a.data)?;
        outputs.push(manifest::OutputEntry::new(&a.file, &a.data));
    }
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        schema_version: schema::SCHEMA_VERSION,
        config: config.clone(),
        duration_seconds: started.elapsed().as_secs_f64(),
        status: if outcome.failures.is_empty() { "complete" } else { "partial" },
        failures: outcome.failures.clone(),
        outputs,
    };
    write(&dir, manifest::MANIFEST_FILE, &output::json_bytes(&manifest.to_json()))?;
    if outcome.failures.is_empty() {
        Ok(manifest)
    } else {
        Err(CliError::Numerical { failures: outcome.failures, manifest: Some(Box::new(manifest)) })
    }
}

/// Schema for an experiment given by name.
pub fn report_schema(name: &str) -> Result<schema::ReportSchema, CliError> {
    Experiment::parse(name).map(schema::report_schema).ok_or_else(|| CliError::UnknownExperiment(name.into()))
}
