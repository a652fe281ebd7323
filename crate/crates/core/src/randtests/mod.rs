//! An eight-test subset of the NIST SP 800-22 battery, with the standard
//! second-level aggregation: a chi-square uniformity P-value over the
//! per-sequence p-values and the pass proportion against its 3σ band.
//!
//! Tests that produce several p-values per sequence (cumulative sums, serial)
//! are aggregated per sub-statistic; the report carries every sub-statistic
//! and the worst of them decides pass/fail.

mod special;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{BitStream, Error, Real, Result};

pub const UNIFORMITY_THRESHOLD: f64 = 0.0001;
pub const MIN_UNIFORMITY_SAMPLES: usize = 55;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestId {
    Monobit,
    BlockFrequency,
    Runs,
    LongestRun,
    CumulativeSums,
    Spectral,
    ApproximateEntropy,
    Serial,
}

impl TestId {
    pub const ALL: [TestId; 8] = [
        TestId::Monobit,
        TestId::BlockFrequency,
        TestId::Runs,
        TestId::LongestRun,
        TestId::CumulativeSums,
        TestId::Spectral,
        TestId::ApproximateEntropy,
        TestId::Serial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestId::Monobit => "Frequency",
            TestId::BlockFrequency => "BlockFrequency",
            TestId::Runs => "Runs",
            TestId::LongestRun => "LongestRun",
            TestId::CumulativeSums => "CumulativeSums",
            TestId::Spectral => "FFT",
            TestId::ApproximateEntropy => "ApproximateEntropy",
            TestId::Serial => "Serial",
        }
    }

    /// Names of the individual p-values this test yields per sequence.
    pub fn sub_names(self) -> &'static [&'static str] {
        match self {
            TestId::CumulativeSums => &["forward", "backward"],
            TestId::Serial => &["delta1", "delta2"],
            _ => &[""],
        }
    }

    /// Shortest sequence the test accepts with the given parameters.
    pub fn min_len(self, params: &TestParams) -> usize {
        match self {
            TestId::Monobit => 1,
            TestId::BlockFrequency => params.block_frequency_m,
            TestId::Runs => 2,
            TestId::LongestRun => 128,
            TestId::CumulativeSums => 1,
            TestId::Spectral => 2,
            TestId::ApproximateEntropy => params.apen_m + 2,
            TestId::Serial => params.serial_m,
        }
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TestId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        TestId::ALL
            .into_iter()
            .find(|t| {
                t.name().to_ascii_lowercase() == key
                    || format!("{t:?}").to_ascii_lowercase() == key
            })
            .ok_or_else(|| Error::domain(format!("unknown test {s:?}")))
    }
}

/// Tunable test parameters; defaults are the usual choices for 1 Mb sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestParams {
    pub block_frequency_m: usize,
    pub apen_m: usize,
    pub serial_m: usize,
}

impl Default for TestParams {
    fn default() -> Self {
        Self { block_frequency_m: 128, apen_m: 10, serial_m: 16 }
    }
}

impl TestParams {
    /// Defaults, with the pattern lengths capped for short sequences:
    /// `apen_m <= ⌊log2 n⌋ − 6` and `serial_m <= ⌊log2 n⌋ − 3`.
    pub fn for_length(n: usize) -> Self {
        let log2 = (usize::BITS - 1 - n.max(2).leading_zeros()) as usize;
        let d = Self::default();
        Self {
            block_frequency_m: d.block_frequency_m.min(n.max(1)),
            apen_m: d.apen_m.min(log2.saturating_sub(6)).max(1),
            serial_m: d.serial_m.min(log2.saturating_sub(3)).max(3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_frequency_m == 0 {
            return Err(Error::domain("block frequency M must be > 0"));
        }
        if !(1..=24).contains(&self.apen_m) {
            return Err(Error::domain("approximate entropy m must lie in 1..=24"));
        }
        if !(3..=24).contains(&self.serial_m) {
            return Err(Error::domain("serial m must lie in 3..=24"));
        }
        Ok(())
    }
}

fn unpack(bits: &BitStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(bits.len());
    for &byte in bits.as_bytes() {
        for k in (0..8).rev() {
            out.push((byte >> k) & 1);
        }
    }
    out.truncate(bits.len());
    out
}

fn run_unpacked(test: TestId, e: &[u8], params: &TestParams) -> Result<Vec<f64>> {
    let need = test.min_len(params);
    if e.len() < need {
        return Err(Error::InsufficientData {
            needed: need as u64,
            available: e.len() as u64,
            unit: "bits",
        });
    }
    Ok(match test {
        TestId::Monobit => vec![tests::monobit(e)],
        TestId::BlockFrequency => vec![tests::block_frequency(e, params.block_frequency_m)],
        TestId::Runs => vec![tests::runs(e)],
        TestId::LongestRun => vec![tests::longest_run(e)],
        TestId::CumulativeSums => tests::cumulative_sums(e).to_vec(),
        TestId::Spectral => vec![tests::spectral(e)],
        TestId::ApproximateEntropy => vec![tests::approximate_entropy(e, params.apen_m)],
        TestId::Serial => tests::serial(e, params.serial_m).to_vec(),
    })
}

/// Every p-value the test produces for one sequence, in [`TestId::sub_names`] order.
pub fn run_test_detailed(test: TestId, bits: &BitStream, params: &TestParams) -> Result<Vec<f64>> {
    params.validate()?;
    run_unpacked(test, &unpack(bits), params)
}

/// Worst (smallest) p-value of one test on one sequence, with parameters
/// from [`TestParams::for_length`].
pub fn run_test(test: TestId, bits: &BitStream) -> Result<f64> {
    let p = run_test_detailed(test, bits, &TestParams::for_length(bits.len()))?;
    Ok(p.into_iter().fold(1.0, f64::min))
}

/// Chi-square P-value for uniformity of p-values over ten equal bins.
pub fn uniformity_p(p_values: &[f64]) -> Result<f64> {
    if p_values.len() < MIN_UNIFORMITY_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_UNIFORMITY_SAMPLES as u64,
            available: p_values.len() as u64,
            unit: "p-values",
        });
    }
    let mut bins = [0u64; 10];
    for &p in p_values {
        let k = ((p * 10.0).floor() as usize).min(9);
        bins[k] += 1;
    }
    let expected = p_values.len() as f64 / 10.0;
    let chi2: f64 = bins
        .iter()
        .map(|&f| (f as f64 - expected).powi(2) / expected)
        .sum();
    Ok(special::igamc(4.5, chi2 / 2.0))
}

/// Acceptable pass-proportion interval `(1−α) ± 3·√((1−α)·α/s)`.
pub fn proportion_band<T: Real>(alpha: T, sequences: usize) -> Result<(T, T)> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    if sequences == 0 {
        return Err(Error::domain("sequence count must be > 0"));
    }
    let p = T::one() - alpha;
    let half = T::lit(3.0) * (p * alpha / T::from_usize(sequences).unwrap()).sqrt();
    Ok((p - half, p + half))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub alpha: f64,
    pub num_sequences: usize,
    pub sequence_bits: usize,
    pub tests: Vec<TestId>,
    /// Test parameters; derived from `sequence_bits` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<TestParams>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            num_sequences: 1000,
            sequence_bits: 1_000_000,
            tests: TestId::ALL.to_vec(),
            params: None,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("alpha must lie in (0, 1)"));
        }
        if self.num_sequences < 10 {
            return Err(Error::domain("num_sequences must be >= 10"));
        }
        if self.sequence_bits < 100 {
            return Err(Error::domain("sequence_bits must be >= 100"));
        }
        if self.tests.is_empty() {
            return Err(Error::domain("no tests selected"));
        }
        self.effective_params().validate()
    }

    pub fn effective_params(&self) -> TestParams {
        self.params
            .clone()
            .unwrap_or_else(|| TestParams::for_length(self.sequence_bits))
    }

    pub fn required_bits(&self) -> u64 {
        self.num_sequences as u64 * self.sequence_bits as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubTestSummary {
    pub name: String,
    pub uniformity_p: Option<f64>,
    pub proportion: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestId,
    /// Worst-case p-value of each sequence.
    pub p_values: Vec<f64>,
    pub sub_tests: Vec<SubTestSummary>,
    /// Smallest uniformity P-value over the sub-statistics; `None` when fewer
    /// than 55 sequences were tested.
    pub uniformity_p: Option<f64>,
    /// Smallest pass proportion over the sub-statistics.
    pub proportion: f64,
    pub proportion_band: (f64, f64),
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub alpha: f64,
    pub num_sequences: usize,
    pub sequence_bits: usize,
    pub params: TestParams,
    pub tests: Vec<TestReport>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.tests.iter().all(|t| t.passed)
    }

    pub fn get(&self, test: TestId) -> Option<&TestReport> {
        self.tests.iter().find(|t| t.test == test)
    }

    /// Plain-text table: test, P-value, proportion, verdict.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<20} {:>10} {:>11}  {}\n",
            "Statistical test", "P-value", "Proportion", "Result"
        );
        for t in &self.tests {
            let p = t.uniformity_p.map_or("n/a".to_string(), |p| format!("{p:.6}"));
            s.push_str(&format!(
                "{:<20} {:>10} {:>11.4}  {}\n",
                t.test.name(),
                p,
                t.proportion,
                if t.passed { "Pass" } else { "FAIL" }
            ));
        }
        let (lo, hi) = self.tests.first().map_or((0.0, 0.0), |t| t.proportion_band);
        s.push_str(&format!(
            "alpha = {}, {} sequences of {} bits, proportion band [{lo:.6}, {hi:.6}]\n",
            self.alpha, self.num_sequences, self.sequence_bits
        ));
        s
    }
}

fn summarize(
    test: TestId,
    per_seq: &[Vec<f64>],
    alpha: f64,
    band: (f64, f64),
) -> TestReport {
    let subs = test.sub_names();
    let s = per_seq.len();
    let sub_tests: Vec<SubTestSummary> = subs
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let ps: Vec<f64> = per_seq.iter().map(|v| v[k]).collect();
            let uniformity = uniformity_p(&ps).ok();
            let proportion = ps.iter().filter(|&&p| p >= alpha).count() as f64 / s as f64;
            let in_band = proportion >= band.0 && proportion <= band.1;
            let passed = in_band && uniformity.map_or(true, |u| u >= UNIFORMITY_THRESHOLD);
            SubTestSummary { name: name.to_string(), uniformity_p: uniformity, proportion, passed }
        })
        .collect();
    let uniformity_p = sub_tests
        .iter()
        .filter_map(|t| t.uniformity_p)
        .reduce(f64::min);
    let proportion = sub_tests.iter().map(|t| t.proportion).fold(1.0, f64::min);
    TestReport {
        test,
        p_values: per_seq.iter().map(|v| v.iter().copied().fold(1.0, f64::min)).collect(),
        passed: sub_tests.iter().all(|t| t.passed),
        sub_tests,
        uniformity_p,
        proportion,
        proportion_band: band,
    }
}

/// Chops `bits` into `num_sequences` sequences of `sequence_bits` and runs
/// every selected test on each. Extra bits beyond the first
/// `num_sequences × sequence_bits` are ignored.
pub fn run_suite(bits: &BitStream, config: &SuiteConfig) -> Result<SuiteReport> {
    config.validate()?;
    let need = config.required_bits();
    if (bits.len() as u64) < need {
        return Err(Error::InsufficientData { needed: need, available: bits.len() as u64, unit: "bits" });
    }
    let params = config.effective_params();
    for &t in &config.tests {
        let min = t.min_len(&params);
        if config.sequence_bits < min {
            return Err(Error::InsufficientData {
                needed: min as u64,
                available: config.sequence_bits as u64,
                unit: "bits per sequence",
            });
        }
    }
    // results[seq][test] = p-values
    let results: Vec<Vec<Vec<f64>>> = (0..config.num_sequences)
        .into_par_iter()
        .map(|k| {
            let seq = bits.slice(k * config.sequence_bits, config.sequence_bits);
            let e = unpack(&seq);
            config
                .tests
                .iter()
                .map(|&t| run_unpacked(t, &e, &params))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let band = proportion_band(config.alpha, config.num_sequences)?;
    let tests = config
        .tests
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let per_seq: Vec<Vec<f64>> = results.iter().map(|r| r[ti].clone()).collect();
            summarize(t, &per_seq, config.alpha, band)
        })
        .collect();
    Ok(SuiteReport {
        alpha: config.alpha,
        num_sequences: config.num_sequences,
        sequence_bits: config.sequence_bits,
        params,
        tests,
    })
}
