//! CSV and manifest writers. CSVs carry a `#`-prefixed metadata block above
//! a stable header row; the manifest is a single JSON document written
//! atomically (temp file + rename) at the end of every run, including
//! partially failed ones.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use egoe::spectral::MemberFailure;

use crate::config::RunConfig;
use crate::CliError;

/// Closed-form values for one k, quoted in the analytic table and in every
/// run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyticRow {
    pub k: u32,
    pub sigma2_v: f64,
    pub fourth_moment_v: f64,
    /// None at lambda = 0, where the moment ratio is undefined.
    pub gamma2_finite: Option<f64>,
    pub gamma2_asymptotic: f64,
    pub sigma2_h0: f64,
    pub sigma0_sq: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub k: u32,
    pub member: u32,
    pub reason: String,
}

impl FailureRecord {
    pub fn from_members(k: u32, failures: &[MemberFailure]) -> Vec<FailureRecord> {
        failures
            .iter()
            .map(|f| FailureRecord {
                k,
                member: f.member,
                reason: f.reason.clone(),
            })
            .collect()
    }
}

/// Per-k summary numbers recorded by the sampling commands.
#[derive(Debug, Clone, Serialize, Default)]
pub struct KSummary {
    pub k: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_members: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma0_sq_measured: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma0_sq_measured_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2_pooled: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_of_range_fraction: Option<f64>,
}

/// Everything needed to reproduce and audit a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub analytic: Vec<AnalyticRow>,
    pub summaries: Vec<KSummary>,
    pub failures: Vec<FailureRecord>,
    /// Fatal errors that stopped part of the run.
    pub errors: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: RunConfig) -> Self {
        Self {
            tool: "egoe",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            analytic: Vec::new(),
            summaries: Vec::new(),
            failures: Vec::new(),
            errors: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    /// Atomic write: serialize to `manifest.json.tmp`, then rename over
    /// `manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("create {}: {e}", dir.display())))?;
        let tmp = dir.join("manifest.json.tmp");
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("serialize manifest: {e}")))?;
        fs::write(&tmp, json.as_bytes())
            .map_err(|e| CliError::Io(format!("write {}: {e}", tmp.display())))?;
        fs::rename(&tmp, &path)
            .map_err(|e| CliError::Io(format!("rename {}: {e}", path.display())))?;
        Ok(path)
    }
}

/// A CSV file with `# key: value` metadata lines followed by a header row.
pub struct CsvFile {
    writer: BufWriter<fs::File>,
    path: PathBuf,
}

impl CsvFile {
    pub fn create(dir: &Path, name: &str, config: &RunConfig, k: Option<u32>) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("create {}: {e}", dir.display())))?;
        let path = dir.join(name);
        let file = fs::File::create(&path)
            .map_err(|e| CliError::Io(format!("create {}: {e}", path.display())))?;
        let mut s = Self {
            writer: BufWriter::new(file),
            path,
        };
        s.comment(&format!("egoe {}", env!("CARGO_PKG_VERSION")))?;
        s.comment(&format!(
            "N: {}  m: {}  lambda: {}",
            config.levels, config.fermions, config.lambda
        ))?;
        if let Some(k) = k {
            s.comment(&format!("k: {k}"))?;
        }
        s.comment(&format!(
            "members: {}  seed: {}  pure_interaction: {}",
            config.members, config.base_seed, config.pure_interaction
        ))?;
        Ok(s)
    }

    pub fn comment(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.writer, "# {text}").map_err(|e| self.io_err(e))
    }

    pub fn header(&mut self, columns: &[&str]) -> Result<(), CliError> {
        writeln!(self.writer, "{}", columns.join(",")).map_err(|e| self.io_err(e))
    }

    pub fn row(&mut self, values: &[f64]) -> Result<(), CliError> {
        let line: Vec<String> = values.iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(self.writer, "{}", line.join(",")).map_err(|e| self.io_err(e))
    }

    /// First column an integer (k indices in moments.csv), rest floats.
    pub fn row_with_index(&mut self, index: u64, values: &[f64]) -> Result<(), CliError> {
        let mut cols = vec![index.to_string()];
        cols.extend(values.iter().map(|v| format!("{v:.12e}")));
        writeln!(self.writer, "{}", cols.join(",")).map_err(|e| self.io_err(e))
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer.flush().map_err(|e| {
            CliError::Io(format!("flush {}: {e}", self.path.display()))
        })?;
        Ok(self.path)
    }

    fn io_err(&self, e: std::io::Error) -> CliError {
        CliError::Io(format!("write {}: {e}", self.path.display()))
    }
}
