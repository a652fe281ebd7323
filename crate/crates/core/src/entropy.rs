//! Extractable-randomness estimates for a quantized Gaussian source.
//!
//! The quantum part of the detector voltage is treated as zero-mean Gaussian
//! and independent of the classical noise, so the variance splits additively
//! and the min-entropy per sample follows from the most likely ADC bin.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::acquisition::{AdcConfig, SampleBlock};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition<T> {
    pub sigma_total_sq: T,
    pub sigma_classical_sq: T,
    pub sigma_quant_sq: T,
}

/// Splits a measured total variance into quantum and classical parts.
pub fn decompose_variance<T: Real>(total: T, classical: T) -> Result<VarianceDecomposition<T>> {
    if !(classical >= T::zero()) || !(total >= classical) {
        return Err(Error::domain(format!(
            "need total >= classical >= 0, got total {total:?}, classical {classical:?}"
        )));
    }
    Ok(VarianceDecomposition {
        sigma_total_sq: total,
        sigma_classical_sq: classical,
        sigma_quant_sq: total - classical,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub p_max: f64,
    pub h_min_bits: f64,
    pub bits_per_sample: u32,
    /// Largest safe output/input ratio, `h_min / bits_per_sample`.
    pub extraction_ratio_bound: f64,
}

/// Upper tail `P(Z > z)` of the standard normal.
fn normal_sf(z: f64) -> f64 {
    if z == f64::INFINITY {
        0.0
    } else if z == f64::NEG_INFINITY {
        1.0
    } else {
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    }
}

/// `P(lo <= Z < hi)` for the standard normal, using whichever tail keeps
/// the subtraction well conditioned.
fn normal_interval(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else if hi <= 0.0 {
        normal_sf(-hi) - normal_sf(-lo)
    } else {
        1.0 - normal_sf(-lo) - normal_sf(hi)
    }
}

/// Probability of every ADC code for zero-mean Gaussian input of width
/// `sigma`, with the clamped tails folded into the two extreme codes.
pub fn gaussian_bin_probabilities(sigma: f64, adc: &AdcConfig) -> Result<Vec<f64>> {
    adc.validate()?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be > 0, got {sigma}")));
    }
    Ok((0..adc.levels())
        .map(|c| normal_interval(adc.lower_edge(c) / sigma, adc.upper_edge(c) / sigma))
        .collect())
}

/// Largest single-code probability of the quantized Gaussian.
pub fn gaussian_bin_pmax(sigma: f64, adc: &AdcConfig) -> Result<f64> {
    Ok(gaussian_bin_probabilities(sigma, adc)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// `−log2(p_max)`.
pub fn min_entropy<T: Real>(p_max: T) -> Result<T> {
    if !(p_max > T::zero() && p_max <= T::one()) {
        return Err(Error::domain(format!("p_max must lie in (0, 1], got {p_max:?}")));
    }
    Ok(-p_max.log2())
}

/// Highest code frequency in a block of samples.
pub fn empirical_pmax(block: &SampleBlock) -> Result<f64> {
    if block.is_empty() {
        return Err(Error::Empty);
    }
    let mut counts = vec![0u64; block.adc.levels() as usize];
    for &c in &block.codes {
        counts[c as usize] += 1;
    }
    let max = counts.into_iter().max().unwrap_or(0);
    Ok(max as f64 / block.len() as f64)
}

/// Smallest raw block `n` (bits) that carries at least `m` bits of min-entropy.
pub fn required_raw_block(m: usize, h_min: f64, bits_per_sample: u32) -> Result<usize> {
    if m == 0 {
        return Err(Error::domain("m must be > 0"));
    }
    if !(h_min > 0.0 && h_min <= bits_per_sample as f64) {
        return Err(Error::domain(format!(
            "h_min must lie in (0, {bits_per_sample}], got {h_min}"
        )));
    }
    Ok((m as f64 * bits_per_sample as f64 / h_min).ceil() as usize)
}

pub fn entropy_report(sigma_quant: f64, adc: &AdcConfig) -> Result<EntropyReport> {
    let p_max = gaussian_bin_pmax(sigma_quant, adc)?;
    let h_min_bits = min_entropy(p_max)?;
    Ok(EntropyReport {
        p_max,
        h_min_bits,
        bits_per_sample: adc.bits,
        extraction_ratio_bound: h_min_bits / adc.bits as f64,
    })
}

/// Full-scale range (mV) at which [`gaussian_bin_pmax`] equals `target_pmax`
/// with the centre code as the most likely one. Bisection on the centre-bin
/// probability `P(|Z| < δ/2σ)`, which rises monotonically with the range,
/// to `1e-12` relative width.
pub fn calibrate_full_scale(sigma: f64, target_pmax: f64, bits: u32) -> Result<f64> {
    let adc_at = |fs: f64| AdcConfig { bits, full_scale_mv: fs, ..Default::default() };
    adc_at(1.0).validate()?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be > 0, got {sigma}")));
    }
    if !(target_pmax > 0.0 && target_pmax < 1.0) {
        return Err(Error::domain(format!("target p_max must lie in (0, 1), got {target_pmax}")));
    }
    let levels = (1u64 << bits) as f64;
    let centre = |fs: f64| {
        let half = fs / levels / 2.0 / sigma;
        normal_interval(-half, half)
    };
    let mut lo = 0.0;
    let mut hi = sigma * levels;
    while centre(hi) < target_pmax {
        hi *= 2.0;
    }
    while (hi - lo) > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if centre(mid) < target_pmax {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let fs = 0.5 * (lo + hi);
    let adc = adc_at(fs);
    let probs = gaussian_bin_probabilities(sigma, &adc)?;
    let mid = probs[adc.mid_code() as usize];
    if probs.iter().any(|&p| p > mid) {
        return Err(Error::domain(
            "calibrated range clips so hard that an extreme code outweighs the centre code",
        ));
    }
    Ok(fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::DEFAULT_FULL_SCALE_MV;

    #[test]
    fn variance_split() {
        let d = decompose_variance(4768.44f64, 3.18).unwrap();
        assert!((d.sigma_quant_sq - 4765.26).abs() < 1e-9);
        assert_eq!(decompose_variance(7.5, 0.0).unwrap().sigma_quant_sq, 7.5);
        assert_eq!(decompose_variance(5.0, 5.0).unwrap().sigma_quant_sq, 0.0);
        assert!(decompose_variance(3.0, 5.0).is_err());
        assert!(decompose_variance(3.0, -1.0).is_err());
        let f = decompose_variance(4768.44f32, 3.18f32).unwrap();
        assert!((f.sigma_quant_sq - 4765.26).abs() < 1e-3);
    }

    #[test]
    fn min_entropy_values() {
        assert!((min_entropy(0.00993296f64).unwrap() - 6.65).abs() < 0.01);
        assert_eq!(min_entropy(1.0 / 256.0).unwrap(), 8.0);
        assert_eq!(min_entropy(1.0f32).unwrap(), 0.0);
        assert!(min_entropy(0.0).is_err());
        assert!(min_entropy(1.5).is_err());
        let mut last = f64::INFINITY;
        for k in 1..=100 {
            let h = min_entropy(k as f64 / 100.0).unwrap();
            assert!(h < last);
            last = h;
        }
    }

    #[test]
    fn raw_block_sizes() {
        assert_eq!(required_raw_block(1024, 6.65, 8).unwrap(), 1232);
        assert_eq!(required_raw_block(777, 8.0, 8).unwrap(), 777);
        assert_eq!(required_raw_block(1024, 4.0, 8).unwrap(), 2048);
        assert!(required_raw_block(0, 4.0, 8).is_err());
        assert!(required_raw_block(10, 9.0, 8).is_err());
        assert!(required_raw_block(10, 0.0, 8).is_err());
    }

    #[test]
    fn calibrated_default_range() {
        let sigma = 4765.26f64.sqrt();
        let fs = calibrate_full_scale(sigma, 0.00993296, 8).unwrap();
        // Frozen from an independent solve (scipy brentq on 2Φ(δ/2σ)−1).
        assert!((fs - 440.010_565_742_52).abs() < 1e-6, "{fs}");
        assert!((fs / DEFAULT_FULL_SCALE_MV - 1.0).abs() < 1e-9);
        let p = gaussian_bin_pmax(69.03, &AdcConfig::default()).unwrap();
        assert!((p - 0.00993296).abs() < 1e-6, "{p}");
    }

    #[test]
    fn pmax_limits() {
        let adc = AdcConfig::default();
        assert!((gaussian_bin_pmax(1e-6, &adc).unwrap() - 1.0).abs() < 1e-12);
        let one_bit = AdcConfig { bits: 1, full_scale_mv: 4.0, ..Default::default() };
        // Mid-tread with two codes: code 1 covers [−δ/2, ∞) with δ = 2.
        let p = gaussian_bin_pmax(1.0, &one_bit).unwrap();
        assert!((p - (1.0 - normal_sf(1.0))).abs() < 1e-15);
        assert!(gaussian_bin_pmax(0.0, &adc).is_err());
    }

    #[test]
    fn bins_sum_to_one_and_pmax_falls_with_sigma() {
        for bits in [1, 4, 8, 12] {
            let adc = AdcConfig { bits, ..Default::default() };
            // Up to σ = FS/10 the clamped tails stay far below the centre code.
            let mut last = f64::INFINITY;
            for k in 1..=88 {
                let sigma = 0.5 * k as f64;
                let probs = gaussian_bin_probabilities(sigma, &adc).unwrap();
                let total: f64 = probs.iter().sum();
                assert!((total - 1.0).abs() < 1e-12, "bits {bits} sigma {sigma}: {total}");
                let p = probs.iter().cloned().fold(0.0, f64::max);
                assert!(p <= last + 1e-15, "bits {bits} sigma {sigma}: {p} > {last}");
                last = p;
            }
        }
    }

    #[test]
    fn empirical_counts() {
        let adc = AdcConfig::default();
        let b = SampleBlock::new(vec![9; 50], adc.clone()).unwrap();
        assert_eq!(empirical_pmax(&b).unwrap(), 1.0);
        let b = SampleBlock::new(vec![0, 1, 2, 3], adc.clone()).unwrap();
        assert_eq!(empirical_pmax(&b).unwrap(), 0.25);
        let b = SampleBlock::new(vec![], adc).unwrap();
        assert!(matches!(empirical_pmax(&b), Err(Error::Empty)));
    }
}
