use serde::{Deserialize, Serialize};

use crate::{BitStream, Error, Result};

/// Full-scale range (mV, peak to peak) at which the 8-bit mid-tread quantizer
/// puts a probability of 0.00993296 into the most likely bin for zero-mean
/// Gaussian noise with σ = √4765.26 mV. Reproduced by
/// [`crate::entropy::calibrate_full_scale`].
pub const DEFAULT_FULL_SCALE_MV: f64 = 440.010_565_742_52;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdcConfig {
    pub bits: u32,
    /// Peak-to-peak input range, mV.
    pub full_scale_mv: f64,
    pub sample_rate_hz: f64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self {
            bits: 8,
            full_scale_mv: DEFAULT_FULL_SCALE_MV,
            sample_rate_hz: 1.0e7,
        }
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=16).contains(&self.bits) {
            return Err(Error::domain(format!("ADC bits must lie in 1..=16, got {}", self.bits)));
        }
        if !(self.full_scale_mv > 0.0) || !self.full_scale_mv.is_finite() {
            return Err(Error::domain("full_scale_mv must be > 0"));
        }
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(Error::domain("sample_rate_hz must be > 0"));
        }
        Ok(())
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    /// Bin width δ = full_scale / 2^bits.
    pub fn step_mv(&self) -> f64 {
        self.full_scale_mv / self.levels() as f64
    }

    pub fn mid_code(&self) -> u32 {
        1 << (self.bits - 1)
    }

    /// Mid-tread code for `x`: code `2^(bits−1)` is centered on 0 V and
    /// covers `[−δ/2, δ/2)`; out-of-range inputs clamp to the extreme codes.
    #[inline]
    pub fn code(&self, x_mv: f64) -> u16 {
        let k = (x_mv / self.step_mv() + 0.5).floor() + self.mid_code() as f64;
        k.clamp(0.0, (self.levels() - 1) as f64) as u16
    }

    /// Center voltage of a code's bin.
    pub fn dequantize(&self, code: u16) -> f64 {
        (code as f64 - self.mid_code() as f64) * self.step_mv()
    }

    /// Lower edge of the bin of `code`, or −∞ for code 0.
    pub fn lower_edge(&self, code: u32) -> f64 {
        if code == 0 {
            f64::NEG_INFINITY
        } else {
            (code as f64 - self.mid_code() as f64 - 0.5) * self.step_mv()
        }
    }

    /// Upper edge of the bin of `code`, or +∞ for the top code.
    pub fn upper_edge(&self, code: u32) -> f64 {
        if code + 1 >= self.levels() {
            f64::INFINITY
        } else {
            (code as f64 - self.mid_code() as f64 + 0.5) * self.step_mv()
        }
    }

    pub fn raw_bit_rate(&self) -> f64 {
        self.bits as f64 * self.sample_rate_hz
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBlock {
    pub codes: Vec<u16>,
    pub adc: AdcConfig,
}

impl SampleBlock {
    pub fn new(codes: Vec<u16>, adc: AdcConfig) -> Result<Self> {
        adc.validate()?;
        if let Some(&c) = codes.iter().find(|&&c| c as u32 >= adc.levels()) {
            return Err(Error::domain(format!("code {c} exceeds {}-bit range", adc.bits)));
        }
        Ok(Self { codes, adc })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn dequantized(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| self.adc.dequantize(c)).collect()
    }
}

pub fn quantize(signal: &[f64], adc: &AdcConfig) -> Result<SampleBlock> {
    adc.validate()?;
    let codes = signal.iter().map(|&x| adc.code(x)).collect();
    Ok(SampleBlock {
        codes,
        adc: adc.clone(),
    })
}

/// Each code contributes exactly `bits` bits, MSB first, in sample order.
pub fn serialize_bits(block: &SampleBlock) -> BitStream {
    let bits = block.adc.bits;
    if bits == 8 {
        return BitStream::from_byte_vec(block.codes.iter().map(|&c| c as u8).collect());
    }
    let mut out = BitStream::with_capacity(block.codes.len() * bits as usize);
    for &c in &block.codes {
        out.push_word((c as u64) << (64 - bits), bits);
    }
    out
}

/// Inverse of [`serialize_bits`].
pub fn deserialize_bits(bits: &BitStream, adc: &AdcConfig) -> Result<SampleBlock> {
    adc.validate()?;
    let width = adc.bits as usize;
    if bits.len() % width != 0 {
        return Err(Error::Format(format!(
            "{} bits is not a whole number of {width}-bit codes",
            bits.len()
        )));
    }
    let codes = if width == 8 {
        bits.as_bytes().iter().map(|&b| b as u16).collect()
    } else {
        (0..bits.len() / width)
            .map(|k| (bits.word_at(k * width) >> (64 - width)) as u16)
            .collect()
    };
    Ok(SampleBlock {
        codes,
        adc: adc.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn adc(bits: u32, fs: f64) -> AdcConfig {
        AdcConfig { bits, full_scale_mv: fs, sample_rate_hz: 1e7 }
    }

    #[test]
    fn mid_scale_and_clamping() {
        let a = adc(8, 440.0);
        assert_eq!(a.code(0.0), 128);
        assert_eq!(a.code(10.0 * 440.0), 255);
        assert_eq!(a.code(-10.0 * 440.0), 0);
        assert_eq!(a.code(a.step_mv() * 0.49), 128);
        assert_eq!(a.code(-a.step_mv() * 0.51), 127);
    }

    #[test]
    fn serialization_examples() {
        let block = SampleBlock::new(vec![0xA5], adc(8, 1.0)).unwrap();
        assert_eq!(serialize_bits(&block).to_string(), "10100101");
        let block = SampleBlock::new(vec![1, 2], adc(8, 1.0)).unwrap();
        assert_eq!(serialize_bits(&block).to_string(), "0000000100000010");
        let block = SampleBlock::new(vec![5, 2], adc(3, 1.0)).unwrap();
        assert_eq!(serialize_bits(&block).to_string(), "101010");
        assert!(SampleBlock::new(vec![8], adc(3, 1.0)).is_err());
    }

    #[test]
    fn invalid_adc() {
        assert!(quantize(&[0.0], &adc(0, 1.0)).is_err());
        assert!(quantize(&[0.0], &adc(17, 1.0)).is_err());
        assert!(quantize(&[0.0], &adc(8, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_error_bounded(bits in 1u32..=16, fs in 1.0f64..1000.0,
                                      x in -2000.0f64..2000.0, y in -2000.0f64..2000.0) {
            let a = adc(bits, fs);
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(a.code(lo) <= a.code(hi));
            let d = a.step_mv();
            let in_range = x >= a.lower_edge(1) - d && x < a.upper_edge(a.levels() - 2) + d;
            if in_range {
                prop_assert!((a.dequantize(a.code(x)) - x).abs() <= d / 2.0 * (1.0 + 1e-12));
            }
        }

        #[test]
        fn serialize_round_trip(bits in 1u32..=16, raw in proptest::collection::vec(any::<u16>(), 0..200)) {
            let a = adc(bits, 100.0);
            let codes: Vec<u16> = raw.iter().map(|c| ((*c as u32) % a.levels()) as u16).collect();
            let block = SampleBlock::new(codes, a.clone()).unwrap();
            let s = serialize_bits(&block);
            prop_assert_eq!(s.len(), block.len() * bits as usize);
            prop_assert_eq!(deserialize_bits(&s, &a).unwrap(), block);
        }
    }
}
