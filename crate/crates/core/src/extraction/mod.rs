//! Seeded Toeplitz hashing over GF(2).
//!
//! An `m × n` Toeplitz matrix is fixed by `n + m − 1` seed bits through
//! `T[i][j] = seed[i − j + n − 1]`. Row 0 therefore reads
//! `seed[n−1], seed[n−2], …, seed[0]` and every later row is the previous one
//! shifted right by one with the next seed bit entering on the left.
//! Multiplying a raw `n`-bit block by `T` yields `m` output bits.

mod bench;
mod toeplitz;

pub use bench::{throughput_bench, BenchReport};
pub use toeplitz::{build_seed, extract_block, extract_stream, ExtractorConfig, SeedSource, ToeplitzSeed};
