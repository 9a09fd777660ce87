//! Declarative pipeline configuration.
//!
//! Every command-line flag has an equivalent key here, grouped into one
//! section per subcommand. Precedence is flag > config file > built-in
//! default. Unknown keys anywhere in the file are rejected so a typo can
//! never silently fall back to a default.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use serde::Deserialize;

use crate::UsageError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed applied to every stochastic step unless overridden by --seed.
    pub seed: Option<u64>,
    /// Artifact directory unless overridden by --out-dir.
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub relay: RelaySection,
    #[serde(default)]
    pub record: RecordSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub fuse: FuseSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub ml: MlSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub target: Option<String>,
    pub count: Option<u64>,
    pub interval_ms: Option<u64>,
    pub payload: Option<usize>,
    pub timeout_ms: Option<u64>,
    pub bind: Option<String>,
    pub session_id: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaySection {
    pub bind: Option<String>,
    pub forward_to: Option<String>,
    pub injected_delay_ms: Option<f64>,
    pub injected_loss_rate: Option<f64>,
    pub duration_s: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordSection {
    pub duration_s: Option<u64>,
    pub blocks: Option<u64>,
    pub payload: Option<usize>,
    pub serializers: Option<usize>,
    pub swap_wait_ms: Option<u64>,
    pub file: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub modem: Option<PathBuf>,
    pub oai: Option<PathBuf>,
    pub gnss: Option<PathBuf>,
    pub channels: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuseSection {
    pub delays: Option<PathBuf>,
    pub modem: Option<PathBuf>,
    pub oai: Option<PathBuf>,
    pub gnss: Option<PathBuf>,
    pub channels: Option<PathBuf>,
    pub no_mapping: Option<bool>,
    pub modem_staleness_ms: Option<u64>,
    pub oai_staleness_ms: Option<u64>,
    pub gnss_staleness_ms: Option<u64>,
    pub modem_offset_ms: Option<i64>,
    pub oai_offset_ms: Option<i64>,
    pub gnss_offset_ms: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub input: Option<PathBuf>,
    pub thresholds_ms: Option<Vec<f64>>,
    pub rsrp_threshold_dbm: Option<f64>,
    pub window_ms: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlSection {
    pub input: Option<PathBuf>,
    pub scheme: Option<String>,
    pub features: Option<Vec<String>>,
    pub warmup: Option<u64>,
    pub bins: Option<usize>,
    pub max_features: Option<usize>,
    pub balance: Option<bool>,
    pub hidden: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub folds: Option<usize>,
    pub model: Option<PathBuf>,
}

impl PipelineConfig {
    /// Load a config file, or the all-defaults config when no path is given.
    /// Parse problems (including unknown keys) are usage errors that name
    /// the offending key.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(PipelineConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|err| anyhow!(UsageError(format!("cannot read config {}: {err}", path.display()))))?;
        toml::from_str(&text)
            .map_err(|err| anyhow!(UsageError(format!("invalid config {}: {err}", path.display()))))
    }
}

/// flag > config > default.
pub fn pick<T>(flag: Option<T>, cfg: Option<T>, default: T) -> T {
    flag.or(cfg).unwrap_or(default)
}

/// flag > config, for settings with no usable default.
pub fn require<T>(flag: Option<T>, cfg: Option<T>, what: &str) -> Result<T> {
    flag.or(cfg)
        .ok_or_else(|| anyhow!(UsageError(format!("missing required setting: {what}"))))
}
