//! Run manifest: config echo, version, duration and a checksum per output.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

impl OutputEntry {
    pub fn new(file: &str, data: &[u8]) -> Self {
        Self { file: file.into(), bytes: data.len() as u64, sha256: hex::encode(Sha256::digest(data)) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub artifact: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub config: ExperimentConfig,
    /// Wall-clock time; the only field that differs between identical runs.
    pub duration_seconds: f64,
    /// `complete`, or `partial` when a module failed part-way.
    pub status: &'static str,
    pub failures: Vec<String>,
    pub outputs: Vec<OutputEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("manifest serializes")
    }

    /// The manifest with timing removed, for comparing runs.
    pub fn without_timing(&self) -> serde_json::Value {
        let mut v = self.to_json();
        if let Some(o) = v.as_object_mut() {
            o.remove("duration_seconds");
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_of_empty_input() {
        let e = OutputEntry::new("x.csv", b"");
        assert_eq!(e.sha256, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(e.bytes, 0);
    }
}
