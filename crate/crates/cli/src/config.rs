//! Run configuration: one TOML document, one table per pipeline stage.
//!
//! ```toml
//! seed = 1                     # drives Toeplitz seeds when no seed file is given
//!
//! [twinbeam]                   # simulated detector pair
//! sigma_quant_sq = 4765.26     # mV²
//! sigma_classical_sq = 3.18    # mV²
//! rho = 0.75
//! bandwidth_hz = 300000.0
//! sample_rate_hz = 10000000.0
//! rng_seed = 8085229
//!
//! [demod]                      # optional up/down-conversion round trip
//! lo_frequency_hz = 4000000.0
//! lpf_cutoff_hz = 300000.0
//! lpf_order = 1
//!
//! [adc]
//! bits = 8
//! full_scale_mv = 440.01056574252
//! sample_rate_hz = 10000000.0
//!
//! [extractor.standard]         # independent streams
//! m = 1024
//! n = 1360
//!
//! [extractor.identical]        # post-selected streams
//! m = 1024
//! n = 1920
//!
//! [suite]
//! alpha = 0.01
//! num_sequences = 1000
//! sequence_bits = 1000000
//! tests = ["monobit", "block_frequency", "runs", "longest_run",
//!          "cumulative_sums", "spectral", "approximate_entropy", "serial"]
//!
//! [paths]
//! output_dir = "."
//! seed_file = "seed.tbbs"      # optional
//! ```
//!
//! Every key is optional; missing keys take the values above. Command-line
//! overrides (`--set section.key=value`) are applied to the parsed document
//! before it is turned into a [`RunConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twinbeam::acquisition::Demodulator;
use twinbeam::{AdcConfig, DemodConfig, ExtractorConfig, SuiteConfig, TwinBeamConfig};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub twinbeam: TwinBeamConfig,
    pub demod: DemodConfig,
    pub adc: AdcConfig,
    pub extractor: ExtractorSection,
    pub suite: SuiteConfig,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            twinbeam: TwinBeamConfig::default(),
            demod: DemodConfig::default(),
            adc: AdcConfig::default(),
            extractor: ExtractorSection::default(),
            suite: SuiteConfig::default(),
            paths: PathsSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorSection {
    pub standard: ExtractorConfig,
    pub identical: ExtractorConfig,
}

impl Default for ExtractorSection {
    fn default() -> Self {
        Self { standard: ExtractorConfig::standard(), identical: ExtractorConfig::identical() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_file: Option<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self { output_dir: PathBuf::from("."), seed_file: None }
    }
}

fn invalid(section: &str, e: twinbeam::Error) -> CliError {
    CliError::Config(format!("[{section}] {e}"))
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.seed > i64::MAX as u64 {
            return Err(CliError::Config("seed must fit in a signed 64-bit integer".into()));
        }
        self.twinbeam.validate().map_err(|e| invalid("twinbeam", e))?;
        self.demod.validate().map_err(|e| invalid("demod", e))?;
        Demodulator::new(&self.demod, self.twinbeam.sample_rate_hz).map_err(|e| invalid("demod", e))?;
        self.adc.validate().map_err(|e| invalid("adc", e))?;
        if self.adc.sample_rate_hz != self.twinbeam.sample_rate_hz {
            return Err(CliError::Config(format!(
                "[adc] sample_rate_hz {} differs from [twinbeam] sample_rate_hz {}",
                self.adc.sample_rate_hz, self.twinbeam.sample_rate_hz
            )));
        }
        self.extractor.standard.validate().map_err(|e| invalid("extractor.standard", e))?;
        self.extractor.identical.validate().map_err(|e| invalid("extractor.identical", e))?;
        self.suite.validate().map_err(|e| invalid("suite", e))?;
        Ok(())
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        Self::from_table(parse_table(text)?)
    }

    fn from_table(table: toml::Table) -> CliResult<Self> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(one_line(&e.to_string())))
    }

    /// Reads `path` (or starts from defaults), applies `overrides` and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                parse_table(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg = Self::from_table(table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_table(text: &str) -> CliResult<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| CliError::Config(one_line(&e.to_string())))
}

/// Applies `a.b.c=value`; the value is read as a TOML literal when it
/// parses as one and as a plain string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {assignment:?} is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad override key {key:?}")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let (last, parents) = path.split_last().expect("non-empty key");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("override {key:?}: {p:?} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
