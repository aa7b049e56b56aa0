use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use levyt_core::montecarlo::{ExperimentConfig, Gate};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Bumped whenever the report layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub package: String,
    pub version: String,
    pub git_commit: String,
}

impl BuildInfo {
    pub fn current() -> Self {
        BuildInfo {
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            git_commit: env!("LEVYT_GIT_COMMIT").to_string(),
        }
    }
}

/// Everything a run produces except timing, which lives in a sidecar file so
/// reports stay byte-identical across reruns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub results: Value,
    pub gates: Vec<Gate>,
    pub passed: bool,
    pub build: BuildInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureManifest {
    pub experiment: String,
    pub failed_gates: Vec<Gate>,
    pub report: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericalFailure {
    pub experiment: String,
    pub error: String,
    pub path_index: Option<u64>,
    pub path_seed: Option<String>,
    pub replay: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub experiment: String,
    pub wall_clock_seconds: f64,
    pub workers: usize,
}

/// One CSV sweep: rows of `(n, rms, stderr)`.
pub struct SweepCsv {
    pub name: String,
    pub rows: Vec<(usize, f64, f64)>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn write_csv(path: &Path, rows: &[(usize, f64, f64)]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "rms", "stderr"])?;
    for (n, rms, se) in rows {
        w.write_record([n.to_string(), rms.to_string(), se.to_string()])?;
    }
    w.flush()
}

pub fn file_stem(experiment: &str) -> String {
    experiment.replace('-', "_")
}

pub fn output_path(out: &Path, experiment: &str, suffix: &str) -> PathBuf {
    out.join(format!("{}{suffix}", file_stem(experiment)))
}
