//! Run configuration: flag parsing, config-file merge, validation.
//!
//! Precedence is flags over config file over defaults; the defaults
//! reproduce the survival-dynamics reference run (N=10, m=5, lambda=0.5,
//! 1000 members, delta=0.01).

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use egoe::analytics::SystemParams;
use egoe::spectral::{HistogramSpec, NormalizationMode};

use crate::CliError;

/// Inclusive set of interaction ranks, parsed from "3", "2..5", "2-5" or
/// "1,3,5".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String")]
pub struct KRange(pub Vec<u32>);

impl FromStr for KRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse_one = |t: &str| -> Result<u32, String> {
            t.trim()
                .parse::<u32>()
                .map_err(|_| format!("invalid k value '{t}'"))
        };
        let mut out = Vec::new();
        for part in s.split(',') {
            if let Some((lo, hi)) = part.split_once("..").or_else(|| part.split_once('-')) {
                let (lo, hi) = (parse_one(lo)?, parse_one(hi)?);
                if lo > hi {
                    return Err(format!("empty k range '{part}'"));
                }
                out.extend(lo..=hi);
            } else {
                out.push(parse_one(part)?);
            }
        }
        if out.is_empty() {
            return Err("empty k specification".into());
        }
        out.sort_unstable();
        out.dedup();
        Ok(KRange(out))
    }
}

impl TryFrom<String> for KRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Optional values as they appear on the command line.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CliOpts {
    /// Number of single-particle levels N
    #[arg(long = "N")]
    pub n: Option<u32>,
    /// Number of fermions m
    #[arg(long = "m")]
    pub m: Option<u32>,
    /// Interaction rank(s): "3", "2..5" or "1,3,5"
    #[arg(long = "k")]
    pub k: Option<KRange>,
    /// Quench strength lambda
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ensemble members
    #[arg(long)]
    pub members: Option<u32>,
    /// Base seed for the per-member substreams
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial-state window width (normalized energy)
    #[arg(long)]
    pub delta: Option<f64>,
    /// Largest time on the survival grid
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Number of time-grid points (includes t = 0)
    #[arg(long)]
    pub nt: Option<usize>,
    /// Histogram bin count
    #[arg(long)]
    pub bins: Option<usize>,
    /// Histogram half-range R: bins span [-R, R]
    #[arg(long)]
    pub range: Option<f64>,
    /// Density normalization: unit (area 1) or dim (scaled by d(N,m))
    #[arg(long, value_parser = ["unit", "dim"])]
    pub normalize: Option<String>,
    /// Drop H0 and use H = lambda V(k) (pure EGOE(k))
    #[arg(long)]
    pub pure_interaction: bool,
    /// Debug aid: dump member 0's V(k) as vmatrix_k{K}.bin per k
    #[arg(long)]
    pub dump_matrices: bool,
    /// Worker threads (0 = automatic)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// The same knobs as optional TOML keys.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "N")]
    pub n: Option<u32>,
    pub m: Option<u32>,
    pub k: Option<KRange>,
    pub lambda: Option<f64>,
    pub members: Option<u32>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub tmax: Option<f64>,
    pub nt: Option<usize>,
    pub bins: Option<usize>,
    pub range: Option<f64>,
    pub normalize: Option<String>,
    pub pure_interaction: Option<bool>,
    pub dump_matrices: Option<bool>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Fully resolved and validated run configuration; echoed verbatim into the
/// manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub levels: u32,
    pub fermions: u32,
    pub k_values: Vec<u32>,
    pub lambda: f64,
    pub members: u32,
    pub base_seed: u64,
    pub delta: f64,
    pub t_max: f64,
    pub time_points: usize,
    pub bins: usize,
    pub range: f64,
    pub normalize: String,
    pub pure_interaction: bool,
    pub dump_matrices: bool,
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Merges flags, optional config file, and defaults, then validates.
    /// `default_k` is the subcommand's k range when neither source sets one.
    pub fn resolve(cli: &CliOpts, default_k: &[u32]) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                toml::from_str::<FileConfig>(&text).map_err(|e| {
                    CliError::Usage(format!("bad config {}: {e}", path.display()))
                })?
            }
            None => FileConfig::default(),
        };

        let cfg = RunConfig {
            levels: cli.n.or(file.n).unwrap_or(10),
            fermions: cli.m.or(file.m).unwrap_or(5),
            k_values: cli
                .k
                .clone()
                .or(file.k)
                .map(|k| k.0)
                .unwrap_or_else(|| default_k.to_vec()),
            lambda: cli.lambda.or(file.lambda).unwrap_or(0.5),
            members: cli.members.or(file.members).unwrap_or(1000),
            base_seed: cli.seed.or(file.seed).unwrap_or(20140905),
            delta: cli.delta.or(file.delta).unwrap_or(0.01),
            t_max: cli.tmax.or(file.tmax).unwrap_or(4.0),
            time_points: cli.nt.or(file.nt).unwrap_or(400),
            bins: cli.bins.or(file.bins).unwrap_or(50),
            range: cli.range.or(file.range).unwrap_or(3.5),
            normalize: cli
                .normalize
                .clone()
                .or(file.normalize)
                .unwrap_or_else(|| "unit".into()),
            pure_interaction: cli.pure_interaction || file.pure_interaction.unwrap_or(false),
            dump_matrices: cli.dump_matrices || file.dump_matrices.unwrap_or(false),
            threads: cli.threads.or(file.threads).unwrap_or(0),
            out_dir: cli
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from(".")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        for &k in &self.k_values {
            SystemParams::new(self.levels, self.fermions, k, self.lambda)
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if self.levels > 63 {
            return Err(CliError::Usage("N must be at most 63".into()));
        }
        if self.members < 1 {
            return Err(CliError::Usage("members must be at least 1".into()));
        }
        if self.delta.is_nan() || self.delta <= 0.0 {
            return Err(CliError::Usage("delta must be positive".into()));
        }
        if self.time_points < 2 || self.t_max.is_nan() || self.t_max <= 0.0 {
            return Err(CliError::Usage("need tmax > 0 and nt >= 2".into()));
        }
        if self.bins < 1 || self.range.is_nan() || self.range <= 0.0 {
            return Err(CliError::Usage("need bins >= 1 and range > 0".into()));
        }
        if self.pure_interaction && self.lambda == 0.0 {
            return Err(CliError::Usage(
                "pure interaction with lambda = 0 leaves no Hamiltonian".into(),
            ));
        }
        match self.normalize.as_str() {
            "unit" | "dim" => Ok(()),
            other => Err(CliError::Usage(format!(
                "normalize must be 'unit' or 'dim', got '{other}'"
            ))),
        }
    }

    pub fn params_for(&self, k: u32) -> SystemParams {
        SystemParams::new(self.levels, self.fermions, k, self.lambda)
            .expect("validated at resolve time")
    }

    pub fn histogram_spec(&self) -> HistogramSpec {
        HistogramSpec {
            bins: self.bins,
            lo: -self.range,
            hi: self.range,
            mode: match self.normalize.as_str() {
                "dim" => NormalizationMode::Dimension,
                _ => NormalizationMode::UnitArea,
            },
        }
    }
}
