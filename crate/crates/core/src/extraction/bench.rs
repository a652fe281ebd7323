use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{extract_block, extract_stream, ExtractorConfig, ToeplitzSeed};
use crate::{BitStream, Error, Result};

/// Blocks timed one at a time for the latency percentiles.
const LATENCY_SAMPLES: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ExtractorConfig,
    pub payload_bits: u64,
    pub output_bits: u64,
    pub blocks: u64,
    pub seconds: f64,
    /// Output bits per second over the whole payload.
    pub throughput_bps: f64,
    pub input_throughput_bps: f64,
    pub latency_p50_ns: f64,
    pub latency_p90_ns: f64,
    pub latency_p99_ns: f64,
}

/// Times [`extract_stream`] over `payload_bits` of ChaCha8 input.
pub fn throughput_bench(config: &ExtractorConfig, payload_bits: usize, rng_seed: u64) -> Result<BenchReport> {
    config.validate()?;
    if payload_bits < config.n {
        return Err(Error::InsufficientData {
            needed: config.n as u64,
            available: payload_bits as u64,
            unit: "bits",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let seed = ToeplitzSeed::from_rng(rng.next_u64(), *config)?;
    let mut bytes = vec![0u8; payload_bits.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    let mut raw = BitStream::from_byte_vec(bytes);
    if raw.len() != payload_bits {
        raw = raw.slice(0, payload_bits);
    }

    let start = Instant::now();
    let out = extract_stream(&raw, config, &seed)?;
    let seconds = start.elapsed().as_secs_f64().max(1e-9);

    let blocks = raw.len() / config.n;
    let mut latencies: Vec<f64> = (0..blocks.min(LATENCY_SAMPLES))
        .map(|b| {
            let block = raw.slice(b * config.n, config.n);
            let t = Instant::now();
            let y = extract_block(&block, &seed);
            let ns = t.elapsed().as_nanos() as f64;
            std::hint::black_box(y).ok();
            ns
        })
        .collect();
    latencies.sort_by(f64::total_cmp);
    let pct = |q: f64| latencies[((latencies.len() - 1) as f64 * q).round() as usize];

    Ok(BenchReport {
        config: *config,
        payload_bits: payload_bits as u64,
        output_bits: out.len() as u64,
        blocks: blocks as u64,
        seconds,
        throughput_bps: out.len() as f64 / seconds,
        input_throughput_bps: payload_bits as f64 / seconds,
        latency_p50_ns: pct(0.5),
        latency_p90_ns: pct(0.9),
        latency_p99_ns: pct(0.99),
    })
}
