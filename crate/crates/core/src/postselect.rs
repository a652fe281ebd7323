//! Identical random strings from two correlated raw streams.
//!
//! Both parties keep the positions where their raw bits agree (the agreement
//! pattern is `a XOR b`) and hash the survivors with the same Toeplitz seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::extraction::{extract_stream, ExtractorConfig, ToeplitzSeed};
use crate::{BitStream, Error, Result};

/// Input bytes per parallel work unit; chunk boundaries are byte aligned.
const CHUNK_BYTES: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    pub kept: BitStream,
    pub keep_fraction: f64,
    pub input_bits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdenticalOutput {
    pub keep_fraction: f64,
    pub kept_bits: u64,
    pub output_bits: u64,
}

fn select_bytes(a: &[u8], b: &[u8], valid_bits: usize, out: &mut BitStream) {
    for (k, (&x, &y)) in a.iter().zip(b).enumerate() {
        let avail = (valid_bits - 8 * k).min(8);
        let agree = !(x ^ y);
        for bit in 0..avail {
            let mask = 0x80u8 >> bit;
            if agree & mask != 0 {
                out.push(x & mask != 0);
            }
        }
    }
}

/// Keeps `a[i]` for every `i` with `a[i] == b[i]`, in order.
pub fn select_identical(a: &BitStream, b: &BitStream) -> Result<SelectionResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), actual: b.len() });
    }
    let n = a.len();
    let pieces: Vec<BitStream> = a
        .as_bytes()
        .par_chunks(CHUNK_BYTES)
        .zip(b.as_bytes().par_chunks(CHUNK_BYTES))
        .enumerate()
        .map(|(k, (ca, cb))| {
            let valid = (n - k * CHUNK_BYTES * 8).min(ca.len() * 8);
            let mut out = BitStream::with_capacity(valid);
            select_bytes(ca, cb, valid, &mut out);
            out
        })
        .collect();
    let mut kept = BitStream::with_capacity(pieces.iter().map(BitStream::len).sum());
    for p in &pieces {
        kept.extend_from(p);
    }
    let keep_fraction = if n == 0 { 0.0 } else { kept.len() as f64 / n as f64 };
    Ok(SelectionResult { kept, keep_fraction, input_bits: n })
}

/// Post-selects and hashes, returning the two parties' outputs. Party B runs
/// its own selection on `(b, a)`; the outputs must match bit for bit.
pub fn identical_pipeline(
    a: &BitStream,
    b: &BitStream,
    config: &ExtractorConfig,
    seed: &ToeplitzSeed,
) -> Result<(BitStream, BitStream, IdenticalOutput)> {
    let sel_a = select_identical(a, b)?;
    let sel_b = select_identical(b, a)?;
    let out_a = extract_stream(&sel_a.kept, config, seed)?;
    let out_b = extract_stream(&sel_b.kept, config, seed)?;
    if out_a != out_b {
        return Err(Error::Internal("post-selected outputs differ".into()));
    }
    let summary = IdenticalOutput {
        keep_fraction: sel_a.keep_fraction,
        kept_bits: sel_a.kept.len() as u64,
        output_bits: out_a.len() as u64,
    };
    Ok((out_a, out_b, summary))
}

/// `raw_rate × keep_fraction × m / n`.
pub fn expected_rate(raw_rate: f64, keep_fraction: f64, config: &ExtractorConfig) -> Result<f64> {
    config.validate()?;
    if !(raw_rate >= 0.0) || !raw_rate.is_finite() {
        return Err(Error::domain("raw rate must be a finite non-negative number"));
    }
    if !(0.0..=1.0).contains(&keep_fraction) {
        return Err(Error::domain("keep_fraction must lie in [0, 1]"));
    }
    Ok(raw_rate * keep_fraction * config.ratio())
}
