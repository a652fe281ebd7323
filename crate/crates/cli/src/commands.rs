//! One function per subcommand. Stages exchange data only through files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use twinbeam::acquisition::{demodulate, quantize, serialize_bits, upconvert, RawSampleFile, RAW_MAGIC};
use twinbeam::analysis::{
    autocorrelation, autocorrelation_bits, bit_cross_correlation, difference_noise_db, histogram_fit,
    pearson_correlation, CorrelationProfile, HistogramFit,
};
use twinbeam::bitstream::BITSTREAM_MAGIC;
use twinbeam::entropy::{empirical_pmax, entropy_report, min_entropy};
use twinbeam::extraction::{extract_stream, throughput_bench, BenchReport};
use twinbeam::model::{simulate_snl_reference, simulate_twin_streams, squeezing_db};
use twinbeam::postselect::{expected_rate, identical_pipeline};
use twinbeam::randtests::{run_suite, SuiteReport};
use twinbeam::{AnalogPair, BitStream, CavityParams, ExtractorConfig, SuiteConfig, ToeplitzSeed};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};
use crate::report::{
    digest, ensure_parent, write_json, write_text, ChannelExtraction, CorrelationSummary, ExtractSummary,
    IdenticalSummary, Rates, RunMeta, RunReport, SimulateSummary, Software, SqueezingSummary,
};

/// Lag range for the correlation summaries.
pub const DEFAULT_K_MAX: usize = 100;

fn channel_letter(k: usize) -> char {
    (b'a' + (k % 26) as u8) as char
}

/// `<prefix>_<letter>.tbbs`
pub fn channel_path(prefix: &Path, channel: usize) -> PathBuf {
    let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!("_{}.tbbs", channel_letter(channel)));
    prefix.with_file_name(name)
}

fn variance(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    Some(x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

fn load_raw(path: &Path) -> CliResult<RawSampleFile> {
    RawSampleFile::load(path).context(|| format!("reading {}", path.display()))
}

fn load_bits(path: &Path) -> CliResult<BitStream> {
    BitStream::load(path).context(|| format!("reading {}", path.display()))
}

fn save_bits(bits: &BitStream, path: &Path) -> CliResult<()> {
    ensure_parent(path)?;
    bits.save(path).context(|| format!("writing {}", path.display()))
}

/// Toeplitz seed number `index`: consecutive `n + m − 1` bit slices of the
/// seed file when one is given, otherwise ChaCha8 from the global seed.
fn toeplitz_seed(cfg: &RunConfig, seed_file: Option<&Path>, ext: ExtractorConfig, index: usize) -> CliResult<ToeplitzSeed> {
    let file = seed_file.or(cfg.paths.seed_file.as_deref());
    match file {
        Some(path) => {
            let bits = load_bits(path)?;
            let len = ext.seed_len();
            let start = index * len;
            if bits.len() < start + len {
                return Err(CliError::core(
                    format!("seed file {} holds too few bits for seed {index}", path.display()),
                    twinbeam::Error::InsufficientSeed { needed: start + len, available: bits.len() },
                ));
            }
            ToeplitzSeed::from_bits(&bits.slice(start, len), ext).context(|| "building seed".into())
        }
        None => {
            let derived = cfg.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            ToeplitzSeed::from_rng(derived, ext).context(|| "building seed".into())
        }
    }
}

fn simulate_pair(cfg: &RunConfig, samples: usize, through_demodulator: bool) -> CliResult<AnalogPair> {
    let mut pair = simulate_twin_streams(&cfg.twinbeam, samples).context(|| "simulating twin beams".into())?;
    if through_demodulator {
        let fs = cfg.twinbeam.sample_rate_hz;
        for beam in [&mut pair.beam_a, &mut pair.beam_b] {
            let carrier = upconvert(beam, fs, cfg.demod.lo_frequency_hz);
            *beam = demodulate(&carrier, fs, &cfg.demod).context(|| "demodulating".into())?;
        }
    }
    Ok(pair)
}

pub fn simulate(cfg: &RunConfig, samples: usize, output: &Path, through_demodulator: bool) -> CliResult<SimulateSummary> {
    if samples == 0 {
        return Err(CliError::Usage("sample count must be > 0".into()));
    }
    let pair = simulate_pair(cfg, samples, through_demodulator)?;
    let correlation = if samples >= 2 { pearson_correlation(&pair.beam_a, &pair.beam_b).ok() } else { None };
    let blocks = [
        quantize(&pair.beam_a, &cfg.adc).context(|| "quantizing channel a".into())?,
        quantize(&pair.beam_b, &cfg.adc).context(|| "quantizing channel b".into())?,
    ];
    let file = RawSampleFile::from_blocks(&blocks).context(|| "assembling sample file".into())?;
    ensure_parent(output)?;
    file.save(output).context(|| format!("writing {}", output.display()))?;
    Ok(SimulateSummary {
        samples,
        channels: 2,
        through_demodulator,
        variance_a_mv2: variance(&pair.beam_a),
        variance_b_mv2: variance(&pair.beam_b),
        correlation,
        file: digest(output)?,
    })
}

/// How `extract` turns each channel's serialized bits into output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractMode {
    /// One Toeplitz seed for every channel.
    SharedSeed,
    /// Seed `k` for channel `k`.
    DistinctSeeds,
    /// No hashing: write the serialized raw bits.
    SerializeOnly,
}

pub fn extract(cfg: &RunConfig, raw: &Path, seed_file: Option<&Path>, mode: ExtractMode, out_prefix: &Path) -> CliResult<ExtractSummary> {
    let file = load_raw(raw)?;
    let ext = cfg.extractor.standard;
    let model_entropy = entropy_report(cfg.twinbeam.sigma_quant_sq.sqrt(), &file.adc)
        .context(|| "model min-entropy".into())?;
    if file.samples_per_channel() == 0 {
        eprintln!("warning: {} holds no samples; writing empty outputs", raw.display());
    }
    let mut channels = Vec::with_capacity(file.channels.len());
    for k in 0..file.channels.len() {
        let block = file.block(k).context(|| format!("channel {k}"))?;
        let raw_bits = serialize_bits(&block);
        let out = match mode {
            ExtractMode::SerializeOnly => raw_bits.clone(),
            _ => {
                let index = if mode == ExtractMode::DistinctSeeds { k } else { 0 };
                let seed = toeplitz_seed(cfg, seed_file, ext, index)?;
                extract_stream(&raw_bits, &ext, &seed).context(|| format!("extracting channel {k}"))?
            }
        };
        let path = channel_path(out_prefix, k);
        save_bits(&out, &path)?;
        let pmax = if block.is_empty() { None } else { empirical_pmax(&block).ok() };
        channels.push(ChannelExtraction {
            channel: k,
            samples: block.len(),
            raw_bits: raw_bits.len() as u64,
            output_bits: out.len() as u64,
            empirical_pmax: pmax,
            empirical_min_entropy_bits: pmax.and_then(|p| min_entropy(p).ok()),
            file: digest(&path)?,
        });
    }
    let ratio_ok = ext.ratio() <= model_entropy.extraction_ratio_bound;
    if !ratio_ok && mode != ExtractMode::SerializeOnly {
        eprintln!(
            "warning: extraction ratio {:.4} exceeds the min-entropy bound {:.4}",
            ext.ratio(),
            model_entropy.extraction_ratio_bound
        );
    }
    Ok(ExtractSummary {
        m: ext.m,
        n: ext.n,
        extraction_ratio: if mode == ExtractMode::SerializeOnly { 1.0 } else { ext.ratio() },
        hashed: mode != ExtractMode::SerializeOnly,
        distinct_seeds: mode == ExtractMode::DistinctSeeds,
        model_entropy,
        ratio_within_entropy_bound: ratio_ok,
        channels,
    })
}

pub fn identical(cfg: &RunConfig, raw: &Path, seed_file: Option<&Path>, out_prefix: &Path) -> CliResult<IdenticalSummary> {
    let file = load_raw(raw)?;
    if file.channels.len() != 2 {
        return Err(CliError::core(
            format!("{} must hold two channels", raw.display()),
            twinbeam::Error::Format(format!("found {} channel(s)", file.channels.len())),
        ));
    }
    let ext = cfg.extractor.identical;
    let seed = toeplitz_seed(cfg, seed_file, ext, 0)?;
    let a = serialize_bits(&file.block(0).context(|| "channel 0".into())?);
    let b = serialize_bits(&file.block(1).context(|| "channel 1".into())?);
    let (out_a, out_b, summary) = identical_pipeline(&a, &b, &ext, &seed).context(|| "post-selection".into())?;
    let (path_a, path_b) = (channel_path(out_prefix, 0), channel_path(out_prefix, 1));
    save_bits(&out_a, &path_a)?;
    save_bits(&out_b, &path_b)?;
    let (file_a, file_b) = (digest(&path_a)?, digest(&path_b)?);
    let raw_rate = file.adc.raw_bit_rate();
    let seconds = file.samples_per_channel() as f64 / file.adc.sample_rate_hz;
    Ok(IdenticalSummary {
        m: ext.m,
        n: ext.n,
        input_bits: a.len() as u64,
        keep_fraction: summary.keep_fraction,
        kept_bits: summary.kept_bits,
        output_bits: summary.output_bits,
        raw_rate_bps: raw_rate,
        expected_rate_bps: expected_rate(raw_rate, summary.keep_fraction, &ext).context(|| "rate".into())?,
        measured_rate_bps: if seconds > 0.0 { summary.output_bits as f64 / seconds } else { 0.0 },
        identical: file_a.sha256 == file_b.sha256,
        file_a,
        file_b,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelAnalysis {
    pub channel: usize,
    pub samples: usize,
    pub empirical_pmax: f64,
    pub empirical_min_entropy_bits: f64,
    pub histogram: HistogramFit,
    pub autocorrelation: CorrelationProfile<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Analysis {
    Bitstream {
        bits: usize,
        ones_fraction: f64,
        autocorrelation: CorrelationProfile<f64>,
    },
    Samples {
        channels: Vec<ChannelAnalysis>,
        /// Pearson correlation between the first two channels.
        cross_correlation: Option<f64>,
    },
}

fn sniff(path: &Path) -> CliResult<[u8; 4]> {
    let mut f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic).map_err(|_| {
        CliError::core(
            format!("reading {}", path.display()),
            twinbeam::Error::Format("file is shorter than its magic number".into()),
        )
    })?;
    Ok(magic)
}

pub fn analyze(input: &Path, k_max: usize, csv_prefix: Option<&Path>) -> CliResult<Analysis> {
    let magic = sniff(input)?;
    if &magic == BITSTREAM_MAGIC {
        let bits = load_bits(input)?;
        let profile = autocorrelation_bits(&bits, k_max).context(|| "bit autocorrelation".into())?;
        if let Some(prefix) = csv_prefix {
            let mut csv = String::from("k,r\n");
            for (k, r) in profile.r.iter().enumerate() {
                writeln!(csv, "{k},{r:e}").ok();
            }
            write_text(&csv_path(prefix, "autocorrelation"), &csv)?;
        }
        let ones_fraction = bits.count_ones() as f64 / bits.len() as f64;
        return Ok(Analysis::Bitstream { bits: bits.len(), ones_fraction, autocorrelation: profile });
    }
    if &magic != RAW_MAGIC {
        return Err(CliError::core(
            format!("reading {}", input.display()),
            twinbeam::Error::Format("neither a bitstream nor a sample file".into()),
        ));
    }
    let file = load_raw(input)?;
    let mut channels = Vec::with_capacity(file.channels.len());
    let mut volts = Vec::with_capacity(file.channels.len());
    for k in 0..file.channels.len() {
        let block = file.block(k).context(|| format!("channel {k}"))?;
        let histogram = histogram_fit(&block).context(|| format!("channel {k} histogram"))?;
        let v = block.dequantized();
        let profile = autocorrelation(&v, k_max).context(|| format!("channel {k} autocorrelation"))?;
        let pmax = empirical_pmax(&block).context(|| format!("channel {k}"))?;
        channels.push(ChannelAnalysis {
            channel: k,
            samples: block.len(),
            empirical_pmax: pmax,
            empirical_min_entropy_bits: min_entropy(pmax).context(|| format!("channel {k}"))?,
            histogram,
            autocorrelation: profile,
        });
        volts.push(v);
    }
    let cross_correlation = if volts.len() >= 2 {
        Some(pearson_correlation(&volts[0], &volts[1]).context(|| "cross-correlation".into())?)
    } else {
        None
    };
    if let Some(prefix) = csv_prefix {
        write_sample_csv(prefix, &file, &channels)?;
    }
    Ok(Analysis::Samples { channels, cross_correlation })
}

fn csv_path(prefix: &Path, what: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!("_{what}.csv"));
    prefix.with_file_name(name)
}

fn write_sample_csv(prefix: &Path, file: &RawSampleFile, channels: &[ChannelAnalysis]) -> CliResult<()> {
    let letters: Vec<char> = (0..channels.len()).map(channel_letter).collect();

    let mut csv = String::from("k");
    for l in &letters {
        write!(csv, ",r_{l}").ok();
    }
    csv.push('\n');
    let k_max = channels.first().map_or(0, |c| c.autocorrelation.k_max);
    for k in 0..=k_max {
        write!(csv, "{k}").ok();
        for c in channels {
            write!(csv, ",{:e}", c.autocorrelation.r[k]).ok();
        }
        csv.push('\n');
    }
    write_text(&csv_path(prefix, "autocorrelation"), &csv)?;

    let fitted: Vec<Vec<f64>> = channels.iter().map(|c| c.histogram.fitted_counts()).collect();
    let mut csv = String::from("code,voltage_mv");
    for l in &letters {
        write!(csv, ",count_{l},fitted_{l}").ok();
    }
    csv.push('\n');
    for code in 0..file.adc.levels() as usize {
        write!(csv, "{code},{}", file.adc.dequantize(code as u16)).ok();
        for (c, f) in channels.iter().zip(&fitted) {
            write!(csv, ",{},{:.6}", c.histogram.counts[code], f[code]).ok();
        }
        csv.push('\n');
    }
    write_text(&csv_path(prefix, "histogram"), &csv)
}

pub fn test(suite: &SuiteConfig, input: &Path) -> CliResult<SuiteReport> {
    suite.validate().map_err(|e| CliError::Config(format!("[suite] {e}")))?;
    let bits = load_bits(input)?;
    let need = suite.required_bits();
    if (bits.len() as u64) < need {
        return Err(CliError::core(
            format!(
                "{} holds {} bits but {} sequences of {} bits need {need}; supply more data or lower \
                 --sequences / --sequence-bits",
                input.display(),
                bits.len(),
                suite.num_sequences,
                suite.sequence_bits
            ),
            twinbeam::Error::InsufficientData { needed: need, available: bits.len() as u64, unit: "bits" },
        ));
    }
    run_suite(&bits, suite).context(|| format!("testing {}", input.display()))
}

pub fn bench(ext: &ExtractorConfig, payload_bits: usize, rng_seed: u64) -> CliResult<BenchReport> {
    throughput_bench(ext, payload_bits, rng_seed).context(|| "extractor benchmark".into())
}

fn within(measured: f64, expected: f64, rel: f64) -> bool {
    if expected == 0.0 {
        measured == 0.0
    } else {
        ((measured - expected) / expected).abs() <= rel
    }
}

/// Records the time since `clock` under `name` and restarts it.
fn lap(clock: &mut Instant, stages: &mut BTreeMap<String, f64>, name: &str) -> f64 {
    let s = clock.elapsed().as_secs_f64();
    stages.insert(name.to_string(), s);
    *clock = Instant::now();
    s
}

/// Runs simulate → extract → identical → analyze (→ test) through files in
/// the output directory and gathers everything into one report.
pub fn report(cfg: &RunConfig, samples: usize, with_tests: bool, through_demodulator: bool) -> CliResult<RunReport> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let mut stage_seconds = BTreeMap::new();
    let mut clock = Instant::now();

    let raw_path = cfg.output_path("raw.tbqr");
    let simulation = simulate(cfg, samples, &raw_path, through_demodulator)?;
    lap(&mut clock, &mut stage_seconds, "simulate");

    let extracted_prefix = cfg.output_path("extracted");
    let extraction = extract(cfg, &raw_path, None, ExtractMode::SharedSeed, &extracted_prefix)?;
    let extract_seconds = lap(&mut clock, &mut stage_seconds, "extract");

    let identical_summary = identical(cfg, &raw_path, None, &cfg.output_path("identical"))?;
    lap(&mut clock, &mut stage_seconds, "identical");

    let out_a = load_bits(&channel_path(&extracted_prefix, 0))?;
    let out_b = load_bits(&channel_path(&extracted_prefix, 1))?;
    let k_max = DEFAULT_K_MAX.min(out_a.len().saturating_sub(1));
    let profile = autocorrelation_bits(&out_a, k_max).context(|| "extracted autocorrelation".into())?;
    let cross = bit_cross_correlation(&out_a, &out_b).context(|| "extracted cross-correlation".into())?;
    let raw = load_raw(&raw_path)?;
    let volts: Vec<Vec<f64>> = (0..2)
        .map(|k| raw.block(k).map(|b| b.dequantized()))
        .collect::<twinbeam::Result<_>>()
        .context(|| "reading channels".into())?;
    let code_pearson = pearson_correlation(&volts[0], &volts[1]).context(|| "code correlation".into())?;
    let twin = simulate_pair(cfg, samples, through_demodulator)?;
    let analog_pearson = pearson_correlation(&twin.beam_a, &twin.beam_b).context(|| "analog correlation".into())?;
    let snl = simulate_snl_reference(&cfg.twinbeam, samples).context(|| "shot-noise reference".into())?;
    let squeezing = SqueezingSummary {
        model_db: squeezing_db(&CavityParams::reference()).context(|| "cavity model".into())?,
        simulated_db: difference_noise_db(&twin, &snl).context(|| "difference noise".into())?,
        configured_db: 10.0 * cfg.twinbeam.difference_noise_ratio().log10(),
    };
    drop((twin, snl));
    lap(&mut clock, &mut stage_seconds, "analyze");

    let tests = if with_tests {
        let r = test(&cfg.suite, &channel_path(&extracted_prefix, 0))?;
        lap(&mut clock, &mut stage_seconds, "test");
        Some(r)
    } else {
        None
    };

    let raw_bps = raw.adc.raw_bit_rate();
    let seconds = samples as f64 / raw.adc.sample_rate_hz;
    let extracted_bits = extraction.channels[0].output_bits as f64;
    let extracted_expected = expected_rate(raw_bps, 1.0, &cfg.extractor.standard).context(|| "rate".into())?;
    let extracted_measured = extracted_bits / seconds;
    let rates = Rates {
        raw_bps,
        extracted_expected_bps: extracted_expected,
        extracted_measured_bps: extracted_measured,
        identical_expected_bps: identical_summary.expected_rate_bps,
        identical_measured_bps: identical_summary.measured_rate_bps,
        keep_fraction: identical_summary.keep_fraction,
        consistent: within(extracted_measured, extracted_expected, 1e-3)
            && within(identical_summary.measured_rate_bps, identical_summary.expected_rate_bps, 1e-3),
    };
    let raw_bits_total = (extraction.channels.len() as u64 * extraction.channels[0].raw_bits) as f64;
    let meta = RunMeta {
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        stage_seconds,
        extractor_throughput_bps: if extract_seconds > 0.0 {
            raw_bits_total * cfg.extractor.standard.ratio() / extract_seconds
        } else {
            0.0
        },
    };
    Ok(RunReport {
        software: Software::current(),
        config: cfg.clone(),
        entropy: extraction.model_entropy.clone(),
        simulation,
        extraction,
        identical: identical_summary,
        rates,
        correlation: CorrelationSummary {
            analog_pearson,
            code_pearson,
            extracted_k_max: k_max,
            extracted_mean_tail: profile.mean_tail,
            extracted_mean_abs_tail: profile.mean_abs_tail,
            extracted_cross_correlation: cross,
        },
        squeezing,
        tests,
        meta,
    })
}

pub fn write_report(report: &RunReport, path: &Path) -> CliResult<()> {
    write_json(path, report)
}
