//! JSON summaries written by the subcommands.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use twinbeam::randtests::SuiteReport;
use twinbeam::EntropyReport;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

pub fn digest(path: &Path) -> CliResult<FileDigest> {
    let mut file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let k = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
        bytes += k as u64;
    }
    Ok(FileDigest { path: path.to_path_buf(), bytes, sha256: hex::encode(hasher.finalize()) })
}

pub fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
        }
        _ => Ok(()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::core("serializing report", twinbeam::Error::Internal(e.to_string())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub samples: usize,
    pub channels: usize,
    pub through_demodulator: bool,
    pub variance_a_mv2: Option<f64>,
    pub variance_b_mv2: Option<f64>,
    pub correlation: Option<f64>,
    pub file: FileDigest,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelExtraction {
    pub channel: usize,
    pub samples: usize,
    pub raw_bits: u64,
    pub output_bits: u64,
    /// Most frequent code's share of the samples; absent for empty input.
    pub empirical_pmax: Option<f64>,
    pub empirical_min_entropy_bits: Option<f64>,
    pub file: FileDigest,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtractSummary {
    pub m: usize,
    pub n: usize,
    pub extraction_ratio: f64,
    /// False when the raw bits were written without hashing.
    pub hashed: bool,
    pub distinct_seeds: bool,
    /// Model min-entropy from the configured quantum noise and the file's ADC.
    pub model_entropy: EntropyReport,
    pub ratio_within_entropy_bound: bool,
    pub channels: Vec<ChannelExtraction>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdenticalSummary {
    pub m: usize,
    pub n: usize,
    pub input_bits: u64,
    pub keep_fraction: f64,
    pub kept_bits: u64,
    pub output_bits: u64,
    pub raw_rate_bps: f64,
    /// `raw_rate × keep_fraction × m / n`.
    pub expected_rate_bps: f64,
    /// Output bits per second of acquired signal.
    pub measured_rate_bps: f64,
    pub identical: bool,
    pub file_a: FileDigest,
    pub file_b: FileDigest,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rates {
    pub raw_bps: f64,
    pub extracted_expected_bps: f64,
    pub extracted_measured_bps: f64,
    pub identical_expected_bps: f64,
    pub identical_measured_bps: f64,
    pub keep_fraction: f64,
    /// Every measured rate within 0.1% of its expected value.
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationSummary {
    pub analog_pearson: f64,
    pub code_pearson: f64,
    pub extracted_k_max: usize,
    pub extracted_mean_tail: f64,
    pub extracted_mean_abs_tail: f64,
    pub extracted_cross_correlation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SqueezingSummary {
    /// Ideal squeezing of the reference cavity parameters.
    pub model_db: f64,
    /// Simulated difference noise relative to the uncorrelated reference.
    pub simulated_db: f64,
    /// `10·log10(1 − ρ·σ_q²/σ²)` for the configured pair.
    pub configured_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Software {
    pub name: &'static str,
    pub version: &'static str,
}

impl Software {
    pub fn current() -> Self {
        Self { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") }
    }
}

/// Wall-clock data kept apart so the rest of a report is reproducible.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMeta {
    pub started_at: String,
    pub finished_at: String,
    pub stage_seconds: BTreeMap<String, f64>,
    pub extractor_throughput_bps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub software: Software,
    pub config: RunConfig,
    pub simulation: SimulateSummary,
    pub entropy: EntropyReport,
    pub extraction: ExtractSummary,
    pub identical: IdenticalSummary,
    pub rates: Rates,
    pub correlation: CorrelationSummary,
    pub squeezing: SqueezingSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tests: Option<SuiteReport>,
    pub meta: RunMeta,
}
