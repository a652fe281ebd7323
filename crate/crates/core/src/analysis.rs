//! Statistical characterization of raw and extracted data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::SampleBlock;
use crate::model::AnalogPair;
use crate::{BitStream, Error, Real, Result};

/// Floor reported by [`difference_noise_db`] when the difference cancels.
pub const DIFFERENCE_NOISE_FLOOR_DB: f64 = -80.0;

const SUM_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile<T> {
    /// `R(k)` for `k = 0..=k_max`.
    pub r: Vec<T>,
    pub k_max: usize,
    pub n_samples: usize,
    /// Signed mean of `R(k)` over `k = 1..=k_max`.
    pub mean_tail: T,
    /// Mean of `|R(k)|` over `k = 1..=k_max`.
    pub mean_abs_tail: T,
}

impl<T: Real> CorrelationProfile<T> {
    fn from_r(r: Vec<T>, n_samples: usize) -> Self {
        let k_max = r.len() - 1;
        let (mean_tail, mean_abs_tail) = if k_max == 0 {
            (T::zero(), T::zero())
        } else {
            let count = T::from_usize(k_max).unwrap();
            let tail = &r[1..];
            (
                tail.iter().fold(T::zero(), |s, &v| s + v) / count,
                tail.iter().fold(T::zero(), |s, &v| s + v.abs()) / count,
            )
        };
        Self { r, k_max, n_samples, mean_tail, mean_abs_tail }
    }
}

/// Deterministic chunked sum: fixed-size chunks summed in parallel, partial
/// sums added in index order.
fn chunked_sum<T: Real>(len: usize, term: impl Fn(usize) -> T + Sync) -> T {
    let partials: Vec<T> = (0..len.div_ceil(SUM_CHUNK))
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * SUM_CHUNK).min(len);
            (c * SUM_CHUNK..end).fold(T::zero(), |s, i| s + term(i))
        })
        .collect();
    partials.into_iter().fold(T::zero(), |s, v| s + v)
}

/// Self-correlation `R(k) = Σ_{i<N−k} (x_i−μ)(x_{i+k}−μ) / Σ_i (x_i−μ)²`
/// with the full-sample mean `μ` (non-circular).
pub fn autocorrelation<T: Real>(x: &[T], k_max: usize) -> Result<CorrelationProfile<T>> {
    let n = x.len();
    if n <= k_max {
        return Err(Error::InsufficientData {
            needed: k_max as u64 + 1,
            available: n as u64,
            unit: "samples",
        });
    }
    let mean = chunked_sum(n, |i| x[i]) / T::from_usize(n).unwrap();
    let d: Vec<T> = x.iter().map(|&v| v - mean).collect();
    let denom = chunked_sum(n, |i| d[i] * d[i]);
    if !(denom > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    let r = (0..=k_max)
        .map(|k| {
            if k == 0 {
                T::one()
            } else {
                chunked_sum(n - k, |i| d[i] * d[i + k]) / denom
            }
        })
        .collect();
    Ok(CorrelationProfile::from_r(r, n))
}

/// [`autocorrelation`] of a bit sequence read as 0/1 values, computed from
/// popcounts in exact integer arithmetic.
pub fn autocorrelation_bits(bits: &BitStream, k_max: usize) -> Result<CorrelationProfile<f64>> {
    let n = bits.len();
    if n <= k_max {
        return Err(Error::InsufficientData {
            needed: k_max as u64 + 1,
            available: n as u64,
            unit: "bits",
        });
    }
    let ones = bits.count_ones() as i128;
    let n_i = n as i128;
    if ones == 0 || ones == n_i {
        return Err(Error::ZeroVariance);
    }
    let mut words = Vec::new();
    bits.read_words(0, n, &mut words);
    // prefix[q] = ones in the first 64q bits.
    let mut prefix = Vec::with_capacity(words.len() + 1);
    prefix.push(0i128);
    for w in &words {
        prefix.push(prefix.last().unwrap() + w.count_ones() as i128);
    }
    let ones_before = |pos: usize| -> i128 {
        let q = pos / 64;
        let r = pos % 64;
        let partial = if r == 0 { 0 } else { (words[q] >> (64 - r)).count_ones() as i128 };
        prefix[q] + partial
    };
    // N²·Σ(x−μ)² = N·ones·(N − ones)
    let denom = (n_i * ones * (n_i - ones)) as f64;

    let r: Vec<f64> = (0..=k_max)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            let len = n - k;
            let mut shifted = Vec::new();
            bits.read_words(k, len, &mut shifted);
            let nw = len.div_ceil(64);
            let tail = len % 64;
            let mut both: i128 = 0;
            for q in 0..nw {
                let mut w = words[q] & shifted[q];
                if q == nw - 1 && tail != 0 {
                    w &= !(u64::MAX >> tail);
                }
                both += w.count_ones() as i128;
            }
            let s1 = ones_before(len);
            let s2 = ones - ones_before(k);
            // N²·Σ(x_i−μ)(x_{i+k}−μ) with μ = ones/N.
            let num = n_i * n_i * both - n_i * ones * (s1 + s2) + (n_i - k as i128) * ones * ones;
            num as f64 / denom
        })
        .collect();
    Ok(CorrelationProfile::from_r(r, n))
}

/// Sample Pearson correlation coefficient.
pub fn pearson_correlation<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), actual: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, available: a.len() as u64, unit: "samples" });
    }
    let n = T::from_usize(a.len()).unwrap();
    let ma = chunked_sum(a.len(), |i| a[i]) / n;
    let mb = chunked_sum(b.len(), |i| b[i]) / n;
    let saa = chunked_sum(a.len(), |i| (a[i] - ma) * (a[i] - ma));
    let sbb = chunked_sum(b.len(), |i| (b[i] - mb) * (b[i] - mb));
    if !(saa > T::zero() && sbb > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    let sab = chunked_sum(a.len(), |i| (a[i] - ma) * (b[i] - mb));
    let r = sab / (saa.sqrt() * sbb.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// Pearson correlation of two equal-length bit sequences read as 0/1.
pub fn bit_cross_correlation(a: &BitStream, b: &BitStream) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), actual: b.len() });
    }
    let n = a.len() as i128;
    let na = a.count_ones() as i128;
    let nb = b.count_ones() as i128;
    if na == 0 || na == n || nb == 0 || nb == n {
        return Err(Error::ZeroVariance);
    }
    let both: i128 = a
        .as_bytes()
        .iter()
        .zip(b.as_bytes())
        .map(|(x, y)| (x & y).count_ones() as i128)
        .sum();
    let cov = (n * both - na * nb) as f64;
    let var = ((na * (n - na)) as f64).sqrt() * ((nb * (n - nb)) as f64).sqrt();
    Ok(cov / var)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramFit {
    /// Occurrences of every ADC code.
    pub counts: Vec<u64>,
    /// Maximum-likelihood Gaussian mean of the dequantized samples, mV.
    pub mean_mv: f64,
    /// Maximum-likelihood Gaussian width (population σ), mV.
    pub sigma_mv: f64,
    pub step_mv: f64,
    pub mid_code: u32,
}

impl HistogramFit {
    /// Expected count per code under the fitted Gaussian, for overlay plots.
    pub fn fitted_counts(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        if self.sigma_mv == 0.0 {
            return self.counts.iter().map(|&c| c as f64).collect();
        }
        let norm = total as f64 * self.step_mv / (self.sigma_mv * (std::f64::consts::TAU).sqrt());
        (0..self.counts.len())
            .map(|c| {
                let v = (c as f64 - self.mid_code as f64) * self.step_mv;
                let z = (v - self.mean_mv) / self.sigma_mv;
                norm * (-0.5 * z * z).exp()
            })
            .collect()
    }
}

pub fn histogram_fit(block: &SampleBlock) -> Result<HistogramFit> {
    if block.is_empty() {
        return Err(Error::Empty);
    }
    let mut counts = vec![0u64; block.adc.levels() as usize];
    for &c in &block.codes {
        counts[c as usize] += 1;
    }
    let n = block.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    let mean = counts
        .iter()
        .enumerate()
        .map(|(c, &k)| k as f64 * block.adc.dequantize(c as u16))
        .sum::<f64>()
        / n;
    for (c, &k) in counts.iter().enumerate() {
        if k > 0 {
            let d = block.adc.dequantize(c as u16) - mean;
            s1 += k as f64 * d;
            s2 += k as f64 * d * d;
        }
    }
    let var = (s2 - s1 * s1 / n) / n;
    Ok(HistogramFit {
        counts,
        mean_mv: mean,
        sigma_mv: var.max(0.0).sqrt(),
        step_mv: block.adc.step_mv(),
        mid_code: block.adc.mid_code(),
    })
}

fn centered_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = chunked_sum(x.len(), |i| x[i]) / n;
    chunked_sum(x.len(), |i| (x[i] - mean) * (x[i] - mean)) / n
}

/// `10·log10(Var(a−b) / Var(a_ref−b_ref))`; negative means below the
/// shot-noise reference. Perfect cancellation reports
/// [`DIFFERENCE_NOISE_FLOOR_DB`].
pub fn difference_noise_db(pair: &AnalogPair, snl_ref: &AnalogPair) -> Result<f64> {
    if pair.is_empty() || snl_ref.is_empty() {
        return Err(Error::Empty);
    }
    let reference = centered_variance(&snl_ref.difference());
    if !(reference > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let var = centered_variance(&pair.difference());
    Ok((10.0 * (var / reference).log10()).max(DIFFERENCE_NOISE_FLOOR_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::AdcConfig;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain double loop in f64.
    fn direct(x: &[f64], k_max: usize) -> Vec<f64> {
        let n = x.len();
        let mu = x.iter().sum::<f64>() / n as f64;
        let den: f64 = x.iter().map(|v| (v - mu) * (v - mu)).sum();
        (0..=k_max)
            .map(|k| (0..n - k).map(|i| (x[i] - mu) * (x[i + k] - mu)).sum::<f64>() / den)
            .collect()
    }

    #[test]
    fn alternating_sequence() {
        for n in [10usize, 64, 1000] {
            let x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let p = autocorrelation(&x, 3).unwrap();
            assert_eq!(p.r[0], 1.0);
            let expect = -((n - 1) as f64) / n as f64;
            assert!((p.r[1] - expect).abs() < 1e-15);
            let bits: BitStream = (0..n).map(|i| i % 2 == 0).collect();
            let pb = autocorrelation_bits(&bits, 3).unwrap();
            assert!((pb.r[1] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_direct_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>() * 3.0 - 1.0).collect();
        let fast = autocorrelation(&x, 50).unwrap();
        let slow = direct(&x, 50);
        for (a, b) in fast.r.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
        let bits: BitStream = (0..10_007).map(|_| rng.gen_bool(0.3)).collect();
        let fb = autocorrelation_bits(&bits, 70).unwrap();
        let as_real: Vec<f64> = bits.iter().map(|b| b as u8 as f64).collect();
        for (a, b) in fb.r.iter().zip(&direct(&as_real, 70)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_bits_have_small_correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 1_000_000;
        let bits: BitStream = (0..n).map(|_| rng.gen::<bool>()).collect();
        let p = autocorrelation_bits(&bits, 100).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        let inside = p.r[1..].iter().filter(|r| r.abs() < bound).count();
        assert!(inside >= 99, "{inside}");
        assert!(p.r.iter().all(|r| r.abs() <= 1.0));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(autocorrelation(&[2.0; 10], 2), Err(Error::ZeroVariance)));
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
        let zeros = BitStream::from_bools(&[false; 100]);
        assert!(matches!(autocorrelation_bits(&zeros, 2), Err(Error::ZeroVariance)));
        assert!(matches!(pearson_correlation(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
        assert!(pearson_correlation(&[1.0], &[1.0]).is_err());
        assert!(pearson_correlation(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn pearson_extremes() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_correlation(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        let af: Vec<f32> = a.iter().map(|&v| v as f32).collect();
        assert!((pearson_correlation(&af, &af).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bit_cross_correlation_matches_pearson() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: BitStream = (0..5000).map(|_| rng.gen_bool(0.5)).collect();
        let b: BitStream = a.iter().map(|x| if rng.gen_bool(0.2) { !x } else { x }).collect();
        let fa: Vec<f64> = a.iter().map(|v| v as u8 as f64).collect();
        let fb: Vec<f64> = b.iter().map(|v| v as u8 as f64).collect();
        let r = bit_cross_correlation(&a, &b).unwrap();
        assert!((r - pearson_correlation(&fa, &fb).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn histogram_of_constant_and_symmetric_blocks() {
        let adc = AdcConfig::default();
        let fit = histogram_fit(&SampleBlock::new(vec![140; 30], adc.clone()).unwrap()).unwrap();
        assert_eq!(fit.sigma_mv, 0.0);
        assert_eq!(fit.counts[140], 30);
        let sym = SampleBlock::new(vec![120, 136, 128, 100, 156], adc.clone()).unwrap();
        let fit = histogram_fit(&sym).unwrap();
        assert!(fit.mean_mv.abs() < 1e-12);
        assert!(fit.sigma_mv > 0.0);
        let fitted: f64 = fit.fitted_counts().iter().sum();
        assert!(fitted > 0.0);
        assert!(matches!(histogram_fit(&SampleBlock::new(vec![], adc).unwrap()), Err(Error::Empty)));
    }

    #[test]
    fn difference_noise_edges() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..1000).map(|i| (i as f64 * 1.3).cos()).collect();
        let pair = AnalogPair::new(a.clone(), b, 1.0).unwrap();
        assert_eq!(difference_noise_db(&pair, &pair).unwrap(), 0.0);
        let same = AnalogPair::new(a.clone(), a.clone(), 1.0).unwrap();
        assert_eq!(difference_noise_db(&same, &pair).unwrap(), DIFFERENCE_NOISE_FLOOR_DB);
        assert!(matches!(difference_noise_db(&pair, &same), Err(Error::ZeroVariance)));
    }

    proptest! {
        #[test]
        fn pearson_affine_invariant(seed in any::<u64>(), sa in 0.1f64..10.0, oa in -50.0f64..50.0,
                                    sb in 0.1f64..10.0, ob in -50.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
            let b: Vec<f64> = a.iter().map(|v| v + rng.gen::<f64>()).collect();
            let r0 = pearson_correlation(&a, &b).unwrap();
            let a2: Vec<f64> = a.iter().map(|v| sa * v + oa).collect();
            let b2: Vec<f64> = b.iter().map(|v| sb * v + ob).collect();
            prop_assert!((pearson_correlation(&a2, &b2).unwrap() - r0).abs() < 1e-12);
        }
    }
}
