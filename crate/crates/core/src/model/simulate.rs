//! Time-domain twin-beam noise synthesis.
//!
//! Each beam is built from four unit-variance first-order low-pass Gaussian
//! processes: a common-mode part `c`, a differential part `d` and one
//! independent classical (electronic) part per detector:
//!
//! ```text
//! a = σq·(α·c + β·d) + σc·e_a
//! b = σq·(α·c − β·d) + σc·e_b        α² = (1+ρ)/2, β² = (1−ρ)/2
//! ```
//!
//! The driving white noise is counter-addressed (ChaCha8 stream per process,
//! word position per sample), and the sample axis is cut into fixed segments
//! that each restart the filter recursion from a warm-up window. Any range of
//! samples can therefore be produced independently and always matches the
//! sequential output bit for bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Samples per independently generated segment.
pub const SEGMENT_LEN: usize = 1 << 16;

/// Warm-up window before each segment, in units of the filter time constant
/// (see [`TwinBeamConfig::warmup_len`]).
pub const WARMUP_TIME_CONSTANTS: f64 = 46.0;

const STREAM_COMMON: u64 = 0;
const STREAM_DIFF: u64 = 1;
const STREAM_CLASSICAL_A: u64 = 2;
const STREAM_CLASSICAL_B: u64 = 3;
const SNL_STREAM_OFFSET: u64 = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwinBeamConfig {
    /// Quantum noise variance per beam, mV².
    pub sigma_quant_sq: f64,
    /// Classical (electronic) noise variance per beam, mV².
    pub sigma_classical_sq: f64,
    /// Pearson correlation of the quantum components.
    pub rho: f64,
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    pub rng_seed: u64,
}

impl Default for TwinBeamConfig {
    fn default() -> Self {
        Self {
            sigma_quant_sq: 4765.26,
            sigma_classical_sq: 3.18,
            rho: 0.75,
            bandwidth_hz: 3.0e5,
            sample_rate_hz: 1.0e7,
            rng_seed: 0x7B_5EED,
        }
    }
}

impl TwinBeamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_quant_sq > 0.0) || !self.sigma_quant_sq.is_finite() {
            return Err(Error::domain("sigma_quant_sq must be > 0"));
        }
        if !(self.sigma_classical_sq >= 0.0) || !self.sigma_classical_sq.is_finite() {
            return Err(Error::domain("sigma_classical_sq must be >= 0"));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::domain("rho must lie in [-1, 1]"));
        }
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(Error::domain("sample_rate_hz must be > 0"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz <= self.sample_rate_hz / 2.0) {
            return Err(Error::domain(
                "bandwidth_hz must satisfy 0 < bandwidth_hz <= sample_rate_hz / 2",
            ));
        }
        Ok(())
    }

    pub fn total_variance(&self) -> f64 {
        self.sigma_quant_sq + self.sigma_classical_sq
    }

    /// Var(a−b) of the twin pair over Var(a−b) of the uncorrelated reference.
    pub fn difference_noise_ratio(&self) -> f64 {
        1.0 - self.rho * self.sigma_quant_sq / self.total_variance()
    }

    /// Sets `rho` so the difference noise sits `db` below the shot-noise reference.
    pub fn with_squeezing_db(mut self, db: f64) -> Result<Self> {
        let ratio = 10f64.powf(-db / 10.0);
        let rho = (1.0 - ratio) * self.total_variance() / self.sigma_quant_sq;
        if !(rho.abs() <= 1.0) {
            return Err(Error::domain(format!(
                "{db} dB of squeezing needs |rho| = {rho:.4} > 1 with this classical noise"
            )));
        }
        self.rho = rho;
        Ok(self)
    }

    /// Pole of the single-pole low-pass, `exp(−2π·f_c/f_s)`.
    pub fn pole(&self) -> f64 {
        (-2.0 * std::f64::consts::PI * self.bandwidth_hz / self.sample_rate_hz).exp()
    }

    /// Samples of history replayed before each segment; enough for the
    /// initial state to decay below 1e-20 of its value.
    pub fn warmup_len(&self) -> usize {
        let decay = -self.pole().ln();
        ((WARMUP_TIME_CONSTANTS / decay).ceil() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogPair {
    pub beam_a: Vec<f64>,
    pub beam_b: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl AnalogPair {
    pub fn new(beam_a: Vec<f64>, beam_b: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if beam_a.len() != beam_b.len() {
            return Err(Error::LengthMismatch {
                expected: beam_a.len(),
                actual: beam_b.len(),
            });
        }
        Ok(Self {
            beam_a,
            beam_b,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.beam_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beam_a.is_empty()
    }

    pub fn difference(&self) -> Vec<f64> {
        self.beam_a.iter().zip(&self.beam_b).map(|(a, b)| a - b).collect()
    }
}

/// Counter-addressed standard normal source for one process.
struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    fn at(seed: u64, stream: u64, index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        // Two u64 (four 32-bit words) per sample.
        rng.set_word_pos(4 * index as u128);
        Self { rng }
    }

    #[inline]
    fn next(&mut self) -> f64 {
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Unit-variance AR(1) samples `[start, start + out.len())` of one process,
/// where `start` is the first index of a segment.
fn fill_process(
    seed: u64,
    stream: u64,
    pole: f64,
    warmup: usize,
    segment_start: usize,
    out: &mut [f64],
) {
    let gain = (1.0 - pole * pole).sqrt();
    let t0 = segment_start.saturating_sub(warmup);
    let mut noise = NoiseStream::at(seed, stream, t0);
    let mut x = noise.next();
    for _ in t0 + 1..=segment_start {
        x = pole * x + gain * noise.next();
    }
    // x now holds sample `segment_start`.
    if let Some((first, rest)) = out.split_first_mut() {
        *first = x;
        for slot in rest {
            x = pole * x + gain * noise.next();
            *slot = x;
        }
    }
}

fn generate(
    config: &TwinBeamConfig,
    rho: f64,
    stream_offset: u64,
    n_samples: usize,
) -> Result<AnalogPair> {
    config.validate()?;
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be > 0"));
    }
    let mut beam_a = vec![0.0; n_samples];
    let mut beam_b = vec![0.0; n_samples];
    let pole = config.pole();
    let warmup = config.warmup_len();
    let sq = config.sigma_quant_sq.sqrt();
    let sc = config.sigma_classical_sq.sqrt();
    let alpha = ((1.0 + rho) / 2.0).sqrt();
    let beta = ((1.0 - rho) / 2.0).sqrt();
    let seed = config.rng_seed;

    beam_a
        .par_chunks_mut(SEGMENT_LEN)
        .zip(beam_b.par_chunks_mut(SEGMENT_LEN))
        .enumerate()
        .for_each(|(k, (seg_a, seg_b))| {
            let start = k * SEGMENT_LEN;
            let len = seg_a.len();
            let mut common = vec![0.0; len];
            let mut diff = vec![0.0; len];
            fill_process(seed, stream_offset + STREAM_COMMON, pole, warmup, start, &mut common);
            fill_process(seed, stream_offset + STREAM_DIFF, pole, warmup, start, &mut diff);
            for i in 0..len {
                seg_a[i] = sq * (alpha * common[i] + beta * diff[i]);
                seg_b[i] = sq * (alpha * common[i] - beta * diff[i]);
            }
            if sc > 0.0 {
                let e = &mut common;
                fill_process(seed, stream_offset + STREAM_CLASSICAL_A, pole, warmup, start, e);
                seg_a.iter_mut().zip(e.iter()).for_each(|(v, e)| *v += sc * e);
                fill_process(seed, stream_offset + STREAM_CLASSICAL_B, pole, warmup, start, e);
                seg_b.iter_mut().zip(e.iter()).for_each(|(v, e)| *v += sc * e);
            }
        });

    AnalogPair::new(beam_a, beam_b, config.sample_rate_hz)
}

/// Correlated twin-beam baseband pair, deterministic in `config.rng_seed`.
pub fn simulate_twin_streams(config: &TwinBeamConfig, n_samples: usize) -> Result<AnalogPair> {
    generate(config, config.rho, 0, n_samples)
}

/// Shot-noise reference: same marginals, uncorrelated quantum parts, drawn
/// from noise streams disjoint from [`simulate_twin_streams`].
pub fn simulate_snl_reference(config: &TwinBeamConfig, n_samples: usize) -> Result<AnalogPair> {
    generate(config, 0.0, SNL_STREAM_OFFSET, n_samples)
}
