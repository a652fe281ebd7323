//! Acceptance criteria. Each test writes one `criterion N ... PASS|FAIL` line
//! to stderr (uncaptured) and then asserts the same condition.

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twinbeam::acquisition::{quantize, serialize_bits};
use twinbeam::analysis::{autocorrelation_bits, bit_cross_correlation, difference_noise_db, pearson_correlation};
use twinbeam::entropy::{decompose_variance, gaussian_bin_pmax, min_entropy, required_raw_block};
use twinbeam::extraction::{extract_block, extract_stream, throughput_bench};
use twinbeam::model::{simulate_snl_reference, simulate_twin_streams, squeezing_db};
use twinbeam::postselect::{expected_rate, identical_pipeline, select_identical};
use twinbeam::randtests::{run_suite, run_test_detailed, TestParams};
use twinbeam::{
    AdcConfig, BitStream, CavityParams, ExtractorConfig, SuiteConfig, TestId, ToeplitzSeed, TwinBeamConfig,
};

/// Heavy criteria run one at a time so timings are not shared between them.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "criterion {id:<3} {verdict}  {detail}").ok();
}

fn check(id: &str, pass: bool, detail: String) {
    report(id, pass, detail.clone());
    assert!(pass, "criterion {id}: {detail}");
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

const EXTRACTOR_SEED: u64 = 0x5EED_0001;
/// Samples per channel: enough raw bits for 10⁸ extracted (1024, 1360) bits.
const SHARED_SAMPLES: usize = 16_640_000;

/// Default simulation, both channels serialized and extracted once.
struct Shared {
    pearson: f64,
    raw_a: BitStream,
    raw_b: BitStream,
    out_a: BitStream,
    out_b: BitStream,
    build_seconds: f64,
}

fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let cfg = TwinBeamConfig::default();
        let adc = AdcConfig::default();
        let pair = simulate_twin_streams(&cfg, SHARED_SAMPLES).unwrap();
        let pearson = pearson_correlation(&pair.beam_a, &pair.beam_b).unwrap();
        let raw_a = serialize_bits(&quantize(&pair.beam_a, &adc).unwrap());
        let raw_b = serialize_bits(&quantize(&pair.beam_b, &adc).unwrap());
        drop(pair);
        let ext = ExtractorConfig::standard();
        let seed = ToeplitzSeed::from_rng(EXTRACTOR_SEED, ext).unwrap();
        let out_a = extract_stream(&raw_a, &ext, &seed).unwrap();
        let out_b = extract_stream(&raw_b, &ext, &seed).unwrap();
        Shared { pearson, raw_a, raw_b, out_a, out_b, build_seconds: secs(start.elapsed()) }
    })
}

#[test]
fn criterion_01_squeezing_spectrum() {
    let params = CavityParams::new(0.893, 0.953, 0.0196, 4.0).unwrap();
    let db = squeezing_db(&params).unwrap();
    check("1", (db - 8.1).abs() <= 0.05, format!("squeezing {db:.4} dB (8.1 +/- 0.05)"));
}

#[test]
fn criterion_02_min_entropy() {
    let dec = decompose_variance(4768.44f64, 3.18).unwrap();
    let adc = AdcConfig::default();
    let p = gaussian_bin_pmax(69.03, &adc).unwrap();
    let h = min_entropy(p).unwrap();
    let block = required_raw_block(1024, 6.65, 8).unwrap();
    let pass = (dec.sigma_quant_sq - 4765.26).abs() < 1e-9
        && (p - 0.00993296).abs() <= 1e-6
        && (h - 6.65).abs() <= 0.01
        && block == 1232;
    check(
        "2",
        pass,
        format!(
            "sigma_q^2 {:.2} mV^2, p_max {p:.8}, H_min {h:.4} bits, raw block {block}",
            dec.sigma_quant_sq
        ),
    );
}

#[test]
fn criterion_03_rate_arithmetic() {
    let single = expected_rate(80e6, 1.0, &ExtractorConfig::standard()).unwrap() / 1e6;
    let identical = expected_rate(80e6, 0.70, &ExtractorConfig::identical()).unwrap() / 1e6;
    let pass = (single - 60.2).abs() < 0.05
        && (identical - 29.87).abs() < 0.005
        && (identical * 10.0).floor() / 10.0 == 29.8;
    check("3", pass, format!("{single:.3} Mb/s independent, {identical:.3} Mb/s identical"));
}

#[test]
fn criterion_04_simulation_fidelity() {
    let _g = serial();
    let start = Instant::now();
    let n = 1_000_000;
    let cfg = TwinBeamConfig::default();
    let pair = simulate_twin_streams(&cfg, n).unwrap();
    let r = pearson_correlation(&pair.beam_a, &pair.beam_b).unwrap();
    let mean = pair.beam_a.iter().sum::<f64>() / n as f64;
    let var = pair.beam_a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;

    let squeezed = TwinBeamConfig::default().with_squeezing_db(6.3).unwrap();
    let twin = simulate_twin_streams(&squeezed, n).unwrap();
    let snl = simulate_snl_reference(&squeezed, n).unwrap();
    let db = difference_noise_db(&twin, &snl).unwrap();
    let elapsed = secs(start.elapsed());

    let pass = (r - 0.75).abs() <= 0.02
        && (db + 6.3).abs() <= 0.3
        && (var / 4768.44 - 1.0).abs() <= 0.02
        && elapsed < 10.0;
    check(
        "4",
        pass,
        format!("pearson {r:.4}, difference noise {db:.3} dB, variance {var:.1} mV^2, {elapsed:.2} s"),
    );
}

/// Row-by-row product with `T[i][j] = s[i − j + n − 1]`.
fn naive_toeplitz(x: &[bool], s: &[bool], m: usize) -> Vec<bool> {
    let n = x.len();
    (0..m)
        .map(|i| (0..n).filter(|&j| x[j]).fold(false, |acc, j| acc ^ s[i + n - 1 - j]))
        .collect()
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> BitStream {
    let mut bytes = vec![0u8; n.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    BitStream::from_byte_vec(bytes).slice(0, n)
}

#[test]
fn criterion_05_extractor_correctness() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0usize;
    for _ in 0..10_000 {
        let m = rng.gen_range(1..=160);
        let n = m + rng.gen_range(0..=240);
        let cfg = ExtractorConfig::new(m, n).unwrap();
        let seed_bits = random_bits(&mut rng, cfg.seed_len());
        let seed = ToeplitzSeed::from_bits(&seed_bits, cfg).unwrap();
        let x = random_bits(&mut rng, n);
        let fast = extract_block(&x, &seed).unwrap().to_bools();
        if fast != naive_toeplitz(&x.to_bools(), &seed_bits.to_bools(), m) {
            mismatches += 1;
        }
    }

    let cfg = ExtractorConfig::standard();
    let mut nonlinear = 0usize;
    for _ in 0..1000 {
        let seed = ToeplitzSeed::from_rng(rng.next_u64(), cfg).unwrap();
        let x = random_bits(&mut rng, cfg.n);
        let y = random_bits(&mut rng, cfg.n);
        let lhs = extract_block(&x.xor(&y).unwrap(), &seed).unwrap();
        let rhs = extract_block(&x, &seed).unwrap().xor(&extract_block(&y, &seed).unwrap()).unwrap();
        if lhs != rhs {
            nonlinear += 1;
        }
    }
    let elapsed = secs(start.elapsed());
    check(
        "5",
        mismatches == 0 && nonlinear == 0 && elapsed < 30.0,
        format!("{mismatches}/10000 oracle mismatches, {nonlinear}/1000 linearity failures, {elapsed:.2} s"),
    );
}

#[test]
fn criterion_06_extractor_throughput() {
    let _g = serial();
    let start = Instant::now();
    let bench = throughput_bench(&ExtractorConfig::standard(), 1_000_000_000, 6).unwrap();
    let elapsed = secs(start.elapsed());
    let mbps = bench.throughput_bps / 1e6;
    check(
        "6",
        mbps >= 60.0 && elapsed < 180.0,
        format!(
            "{mbps:.1} Mb/s output over {} input bits on {} thread(s), p50 block {:.0} ns, {elapsed:.1} s",
            bench.payload_bits,
            rayon::current_num_threads(),
            bench.latency_p50_ns
        ),
    );
}

#[test]
fn criterion_07a_identical_outputs() {
    let _g = serial();
    let data = shared();
    let start = Instant::now();
    let n = 100_000_000;
    let a = data.raw_a.slice(0, n);
    let b = data.raw_b.slice(0, n);
    let cfg = ExtractorConfig::identical();
    let seed = ToeplitzSeed::from_rng(EXTRACTOR_SEED + 7, cfg).unwrap();
    let (out_a, out_b, summary) = identical_pipeline(&a, &b, &cfg, &seed).unwrap();
    let elapsed = secs(start.elapsed());
    let equal = out_a.as_bytes() == out_b.as_bytes() && !out_a.is_empty();
    check(
        "7a",
        equal && elapsed < 120.0,
        format!(
            "{} identical output bits from {n}-bit inputs (keep {:.4}), {elapsed:.1} s",
            summary.output_bits, summary.keep_fraction
        ),
    );
}

#[test]
fn criterion_07b_keep_fraction_band() {
    let _g = serial();
    let data = shared();
    let n = 100_000_000;
    let keep = select_identical(&data.raw_a.slice(0, n), &data.raw_b.slice(0, n))
        .unwrap()
        .keep_fraction;
    check(
        "7b",
        (0.60..=0.80).contains(&keep),
        format!("keep_fraction {keep:.4} for the default simulation (band 0.60..0.80)"),
    );
}

#[test]
fn criterion_07c_keep_fraction_monotone() {
    let _g = serial();
    let adc = AdcConfig::default();
    let keeps: Vec<f64> = [0.5, 0.75, 0.9]
        .iter()
        .map(|&rho| {
            let cfg = TwinBeamConfig { rho, ..TwinBeamConfig::default() };
            let pair = simulate_twin_streams(&cfg, 1_000_000).unwrap();
            let a = serialize_bits(&quantize(&pair.beam_a, &adc).unwrap());
            let b = serialize_bits(&quantize(&pair.beam_b, &adc).unwrap());
            select_identical(&a, &b).unwrap().keep_fraction
        })
        .collect();
    check(
        "7c",
        keeps[0] < keeps[1] && keeps[1] < keeps[2],
        format!("keep_fraction {:.4} / {:.4} / {:.4} at rho 0.5 / 0.75 / 0.9", keeps[0], keeps[1], keeps[2]),
    );
}

#[test]
fn criterion_08_statistical_quality() {
    let _g = serial();
    let data = shared();
    let start = Instant::now();
    let suite = SuiteConfig {
        alpha: 0.01,
        num_sequences: 100,
        sequence_bits: 1_000_000,
        tests: TestId::ALL.to_vec(),
        params: None,
    };
    let extracted = run_suite(&data.out_a, &suite).unwrap();
    let raw_suite = SuiteConfig { tests: vec![TestId::Monobit], ..suite };
    let raw = run_suite(&data.raw_a, &raw_suite).unwrap();
    let raw_monobit_fails = !raw.tests[0].passed;
    let elapsed = secs(start.elapsed()) + data.build_seconds;
    let mut err = std::io::stderr().lock();
    writeln!(err, "{}", extracted.to_table()).ok();
    drop(err);
    let worst_uniformity = extracted
        .tests
        .iter()
        .flat_map(|t| t.sub_tests.iter().filter_map(|s| s.uniformity_p))
        .fold(1.0, f64::min);
    let worst_proportion = extracted
        .tests
        .iter()
        .flat_map(|t| t.sub_tests.iter().map(|s| s.proportion))
        .fold(1.0, f64::min);
    check(
        "8",
        extracted.all_passed() && raw_monobit_fails && elapsed < 600.0,
        format!(
            "extracted all pass: {}, min uniformity P {worst_uniformity:.4}, min proportion {worst_proportion:.2}; \
             raw monobit proportion {:.2}, uniformity P {:.2e} (fails: {raw_monobit_fails}); {elapsed:.1} s incl. data",
            extracted.all_passed(),
            raw.tests[0].proportion,
            raw.tests[0].uniformity_p.unwrap_or(f64::NAN)
        ),
    );
}

#[test]
fn criterion_09_autocorrelation() {
    let _g = serial();
    let data = shared();
    let start = Instant::now();
    let n = 80_000_000;
    let a = data.out_a.slice(0, n);
    let b = data.out_b.slice(0, n);
    let profile = autocorrelation_bits(&a, 100).unwrap();
    let cross = bit_cross_correlation(&a, &b).unwrap();
    let bound = 3.0 / (n as f64).sqrt();
    let elapsed = secs(start.elapsed());
    let pass = profile.mean_tail.abs() < 1e-4
        && (data.pearson - 0.75).abs() <= 0.02
        && cross.abs() < bound
        && elapsed < 120.0;
    check(
        "9",
        pass,
        format!(
            "mean R(1..100) {:.2e} (mean |R| {:.2e}), analog pearson {:.4}, extracted cross {cross:.2e} (< {bound:.2e}), {elapsed:.1} s",
            profile.mean_tail, profile.mean_abs_tail, data.pearson
        ),
    );
}

#[test]
fn criterion_10_nist_calibration() {
    let _g = serial();
    let start = Instant::now();
    let sequences = 10_000;
    let len = 10_000;
    let alpha = 0.01;
    let params = TestParams::for_length(len);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut rejections: Vec<Vec<usize>> =
        TestId::ALL.iter().map(|t| vec![0; t.sub_names().len()]).collect();
    for _ in 0..sequences {
        let seq = random_bits(&mut rng, len);
        for (ti, &t) in TestId::ALL.iter().enumerate() {
            for (si, p) in run_test_detailed(t, &seq, &params).unwrap().into_iter().enumerate() {
                if p < alpha {
                    rejections[ti][si] += 1;
                }
            }
        }
    }
    let elapsed = secs(start.elapsed());
    let mut pass = elapsed < 300.0;
    let mut parts = Vec::new();
    for (ti, &t) in TestId::ALL.iter().enumerate() {
        for (si, name) in t.sub_names().iter().enumerate() {
            let rate = rejections[ti][si] as f64 / sequences as f64;
            pass &= (rate - alpha).abs() <= 0.004;
            let label = if name.is_empty() { t.name().to_string() } else { format!("{}/{name}", t.name()) };
            parts.push(format!("{label} {rate:.4}"));
        }
    }
    check(
        "10",
        pass,
        format!("rejection rates at alpha 0.01 (0.006..0.014): {}; {elapsed:.1} s", parts.join(", ")),
    );
}
