use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{BitStream, Error, Result};

/// Blocks handed to the thread pool per batch in [`extract_stream`].
const BATCH_BLOCKS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorConfig {
    /// Output bits per block.
    pub m: usize,
    /// Raw input bits per block.
    pub n: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self::standard()
    }
}

impl ExtractorConfig {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        let c = Self { m, n };
        c.validate()?;
        Ok(c)
    }

    /// 1024 out of 1360 bits: the independent-stream setting.
    pub const fn standard() -> Self {
        Self { m: 1024, n: 1360 }
    }

    /// 1024 out of 1920 bits: the setting for post-selected streams.
    pub const fn identical() -> Self {
        Self { m: 1024, n: 1920 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::domain(format!(
                "extractor needs 0 < m <= n, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        Ok(())
    }

    pub fn seed_len(&self) -> usize {
        self.n + self.m - 1
    }

    pub fn ratio(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn output_len(&self, raw_bits: usize) -> usize {
        raw_bits / self.n * self.m
    }
}

/// Where the `n + m − 1` seed bits come from.
#[derive(Clone, Copy, Debug)]
pub enum SeedSource<'a> {
    /// Pre-stored random bits; the first `n + m − 1` are used.
    Bits(&'a BitStream),
    /// Deterministic ChaCha8 expansion of a 64-bit value, for reproducible runs.
    Rng(u64),
}

/// Toeplitz seed plus the word tables the fast kernel needs.
#[derive(Clone, Debug)]
pub struct ToeplitzSeed {
    config: ExtractorConfig,
    bits: BitStream,
    /// `windows[r][q]` = 64 bits of the reversed seed starting at `64q + r`.
    windows: Vec<Vec<u64>>,
    input_words: usize,
}

impl PartialEq for ToeplitzSeed {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.bits == other.bits
    }
}

impl ToeplitzSeed {
    pub fn from_bits(source: &BitStream, config: ExtractorConfig) -> Result<Self> {
        config.validate()?;
        let len = config.seed_len();
        if source.len() < len {
            return Err(Error::InsufficientSeed { needed: len, available: source.len() });
        }
        let bits = source.slice(0, len);

        // reversed[u] = seed[len − 1 − u]; y_i = ⊕_j x[j]·reversed[m − 1 − i + j].
        let mut reversed = BitStream::with_capacity(len);
        for u in (0..len).rev() {
            reversed.push(bits.get(u));
        }
        let words = len.div_ceil(64) + 1;
        let windows = (0..64)
            .map(|r| (0..words).map(|q| reversed.word_at(64 * q + r)).collect())
            .collect();
        Ok(Self {
            config,
            bits,
            windows,
            input_words: config.n.div_ceil(64),
        })
    }

    pub fn from_rng(seed: u64, config: ExtractorConfig) -> Result<Self> {
        config.validate()?;
        let mut bytes = vec![0u8; config.seed_len().div_ceil(8)];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut bytes);
        let stream = BitStream::from_byte_vec(bytes);
        Self::from_bits(&stream, config)
    }

    pub fn config(&self) -> ExtractorConfig {
        self.config
    }

    pub fn bits(&self) -> &BitStream {
        &self.bits
    }

    /// Matrix entry `T[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.bits.get(i + self.config.n - 1 - j)
    }

    /// Multiplies one raw block, given as MSB-first words with zeroed padding,
    /// and writes the `m` output bits into `out` as MSB-first words.
    fn multiply(&self, input: &[u64], out: &mut Vec<u64>) {
        let m = self.config.m;
        let w = self.input_words;
        debug_assert_eq!(input.len(), w);
        out.clear();
        out.resize(m.div_ceil(64), 0);
        for i in 0..m {
            let offset = m - 1 - i;
            let window = &self.windows[offset & 63][offset >> 6..(offset >> 6) + w];
            let acc = window
                .iter()
                .zip(input)
                .fold(0u64, |acc, (s, x)| acc ^ (s & x));
            out[i >> 6] |= ((acc.count_ones() & 1) as u64) << (63 - (i & 63));
        }
    }
}

pub fn build_seed(source: SeedSource<'_>, config: ExtractorConfig) -> Result<ToeplitzSeed> {
    match source {
        SeedSource::Bits(bits) => ToeplitzSeed::from_bits(bits, config),
        SeedSource::Rng(seed) => ToeplitzSeed::from_rng(seed, config),
    }
}

/// `T · raw` over GF(2) for a single `n`-bit block.
pub fn extract_block(raw: &BitStream, seed: &ToeplitzSeed) -> Result<BitStream> {
    let cfg = seed.config;
    if raw.len() != cfg.n {
        return Err(Error::LengthMismatch { expected: cfg.n, actual: raw.len() });
    }
    let mut input = Vec::new();
    raw.read_words(0, cfg.n, &mut input);
    let mut words = Vec::new();
    seed.multiply(&input, &mut words);
    let mut out = BitStream::with_capacity(cfg.m);
    out.push_words(&words, cfg.m);
    Ok(out)
}

/// Hashes every full `n`-bit block of `raw` and concatenates the outputs; a
/// trailing partial block is dropped. Blocks run in parallel, output order
/// is preserved.
pub fn extract_stream(
    raw: &BitStream,
    config: &ExtractorConfig,
    seed: &ToeplitzSeed,
) -> Result<BitStream> {
    config.validate()?;
    if seed.config != *config {
        return Err(Error::domain(format!(
            "seed was built for {:?}, extractor configured as {:?}",
            seed.config, config
        )));
    }
    let blocks = raw.len() / config.n;
    let mut out = BitStream::with_capacity(blocks * config.m);
    let mut start = 0;
    while start < blocks {
        let end = (start + BATCH_BLOCKS).min(blocks);
        let results: Vec<Vec<u64>> = (start..end)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(input, words), b| {
                    raw.read_words(b * config.n, config.n, input);
                    seed.multiply(input, words);
                    words.clone()
                },
            )
            .collect();
        for words in &results {
            out.push_words(words, config.m);
        }
        start = end;
    }
    Ok(out)
}
