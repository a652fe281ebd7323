//! Argument parsing and dispatch for the `twinbeam` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;
use twinbeam::TestId;

use crate::commands;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::report::{write_json, write_text};

#[derive(Debug, Parser)]
#[command(name = "twinbeam", version, about = "Twin-beam QRNG pipeline: simulate, extract, post-select, analyze, test")]
pub struct Cli {
    /// TOML configuration file; built-in defaults when absent.
    #[arg(long, short = 'c', global = true, env = "TWINBEAM_CONFIG")]
    pub config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set twinbeam.rho=0.9`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Directory for default output names (overrides `paths.output_dir`).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the detector pair and write a two-channel sample file.
    Simulate {
        #[arg(short = 'n', long, default_value_t = 1_000_000)]
        samples: usize,
        /// Sample file to write [default: <output_dir>/raw.tbqr].
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Pass each beam through the carrier up-conversion and demodulator.
        #[arg(long)]
        demod: bool,
        #[arg(long)]
        rho: Option<f64>,
        /// Simulation RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serialize and Toeplitz-hash every channel of a sample file.
    Extract {
        raw: PathBuf,
        /// Bitstream holding the Toeplitz seed bits.
        #[arg(long)]
        seed_file: Option<PathBuf>,
        /// Hash each channel with its own seed instead of a shared one.
        #[arg(long, conflicts_with = "serialize_only")]
        distinct_seeds: bool,
        /// Write the serialized raw bits without hashing.
        #[arg(long)]
        serialize_only: bool,
        /// Output prefix; channels go to <prefix>_a.tbbs, <prefix>_b.tbbs, ...
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// JSON report [default: <prefix>.json].
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Post-select agreeing bits of both channels and hash them into two identical strings.
    Identical {
        raw: PathBuf,
        #[arg(long)]
        seed_file: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Correlation and histogram analysis of a bitstream or sample file.
    Analyze {
        input: PathBuf,
        #[arg(long, default_value_t = commands::DEFAULT_K_MAX)]
        k_max: usize,
        /// Also write <prefix>_autocorrelation.csv (and _histogram.csv for samples).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// JSON output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the statistical test suite on a bitstream.
    Test {
        input: PathBuf,
        #[arg(long)]
        sequences: Option<usize>,
        #[arg(long)]
        sequence_bits: Option<usize>,
        /// Comma-separated test names, e.g. `monobit,runs`.
        #[arg(long, value_delimiter = ',')]
        tests: Option<Vec<TestId>>,
        #[arg(long)]
        alpha: Option<f64>,
        /// JSON report [default: <output_dir>/test_report.json].
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the table to this file.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Time the extractor on pseudo-random input.
    Bench {
        #[arg(long, default_value_t = 100_000_000)]
        payload_bits: usize,
        /// Use the identical-stream extractor instead of the standard one.
        #[arg(long)]
        identical: bool,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
    },
    /// Full pipeline through files in the output directory, with one JSON report.
    Report {
        #[arg(short = 'n', long, default_value_t = 1_000_000)]
        samples: usize,
        /// Run the test suite on the extracted stream of channel a.
        #[arg(long)]
        with_tests: bool,
        #[arg(long)]
        demod: bool,
        /// Report file [default: <output_dir>/report.json].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::core("serializing output", twinbeam::Error::Internal(e.to_string())))?;
    emit(&format!("{text}\n"))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> CliResult<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(std::path::Path::new("<stdout>"), e)),
        _ => Ok(()),
    }
}

fn with_extension(prefix: &std::path::Path, ext: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".{ext}"));
    prefix.with_file_name(name)
}

fn load_config(cli: &Cli, extra: Vec<String>) -> CliResult<RunConfig> {
    let mut overrides = cli.overrides.clone();
    overrides.extend(extra);
    let mut cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(dir) = &cli.output_dir {
        cfg.paths.output_dir = dir.clone();
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate { samples, output, demod, rho, seed } => {
            let mut extra = Vec::new();
            if let Some(r) = rho {
                extra.push(format!("twinbeam.rho={r:?}"));
            }
            if let Some(s) = seed {
                extra.push(format!("twinbeam.rng_seed={s}"));
            }
            let cfg = load_config(cli, extra)?;
            let out = output.clone().unwrap_or_else(|| cfg.output_path("raw.tbqr"));
            print_json(&commands::simulate(&cfg, *samples, &out, *demod)?)
        }
        Command::Extract { raw, seed_file, distinct_seeds, serialize_only, output, report } => {
            let cfg = load_config(cli, Vec::new())?;
            let prefix = output.clone().unwrap_or_else(|| cfg.output_path("extracted"));
            let mode = match (*serialize_only, *distinct_seeds) {
                (true, _) => commands::ExtractMode::SerializeOnly,
                (false, true) => commands::ExtractMode::DistinctSeeds,
                (false, false) => commands::ExtractMode::SharedSeed,
            };
            let summary = commands::extract(&cfg, raw, seed_file.as_deref(), mode, &prefix)?;
            write_json(&report.clone().unwrap_or_else(|| with_extension(&prefix, "json")), &summary)?;
            print_json(&summary)
        }
        Command::Identical { raw, seed_file, output, report } => {
            let cfg = load_config(cli, Vec::new())?;
            let prefix = output.clone().unwrap_or_else(|| cfg.output_path("identical"));
            let summary = commands::identical(&cfg, raw, seed_file.as_deref(), &prefix)?;
            write_json(&report.clone().unwrap_or_else(|| with_extension(&prefix, "json")), &summary)?;
            print_json(&summary)
        }
        Command::Analyze { input, k_max, csv, output } => {
            let analysis = commands::analyze(input, *k_max, csv.as_deref())?;
            match output {
                Some(path) => write_json(path, &analysis),
                None => print_json(&analysis),
            }
        }
        Command::Test { input, sequences, sequence_bits, tests, alpha, output, table } => {
            let cfg = load_config(cli, Vec::new())?;
            let mut suite = cfg.suite.clone();
            if let Some(s) = sequences {
                suite.num_sequences = *s;
            }
            if let Some(b) = sequence_bits {
                if *b != suite.sequence_bits {
                    suite.params = None;
                }
                suite.sequence_bits = *b;
            }
            if let Some(t) = tests {
                suite.tests = t.clone();
            }
            if let Some(a) = alpha {
                suite.alpha = *a;
            }
            let report = commands::test(&suite, input)?;
            write_json(&output.clone().unwrap_or_else(|| cfg.output_path("test_report.json")), &report)?;
            let text = report.to_table();
            if let Some(path) = table {
                write_text(path, &text)?;
            }
            emit(&text)
        }
        Command::Bench { payload_bits, identical, rng_seed } => {
            let cfg = load_config(cli, Vec::new())?;
            let ext = if *identical { cfg.extractor.identical } else { cfg.extractor.standard };
            print_json(&commands::bench(&ext, *payload_bits, *rng_seed)?)
        }
        Command::Report { samples, with_tests, demod, output } => {
            let cfg = load_config(cli, Vec::new())?;
            let report = commands::report(&cfg, *samples, *with_tests, *demod)?;
            let path = output.clone().unwrap_or_else(|| cfg.output_path("report.json"));
            commands::write_report(&report, &path)?;
            emit(&format!(
                "report {}: keep {:.4}, extracted {:.3} Mb/s, identical {:.3} Mb/s, rates consistent {}\n",
                path.display(),
                report.rates.keep_fraction,
                report.rates.extracted_expected_bps / 1e6,
                report.rates.identical_expected_bps / 1e6,
                report.rates.consistent
            ))
        }
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = emit(&e.to_string());
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let err = CliError::Usage(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", err.line());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
