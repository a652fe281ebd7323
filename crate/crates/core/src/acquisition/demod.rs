use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemodConfig {
    pub lo_frequency_hz: f64,
    pub lpf_cutoff_hz: f64,
    /// Number of cascaded single-pole sections.
    pub lpf_order: u32,
}

impl Default for DemodConfig {
    fn default() -> Self {
        Self {
            lo_frequency_hz: 4.0e6,
            lpf_cutoff_hz: 3.0e5,
            lpf_order: 1,
        }
    }
}

impl DemodConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lpf_cutoff_hz > 0.0 && self.lpf_cutoff_hz < self.lo_frequency_hz) {
            return Err(Error::domain(
                "low-pass cutoff must satisfy 0 < cutoff < lo_frequency",
            ));
        }
        if !(1..=16).contains(&self.lpf_order) {
            return Err(Error::domain("lpf_order must lie in 1..=16"));
        }
        Ok(())
    }
}

/// One bilinear-transform single-pole low-pass section, pre-warped so the
/// -3 dB point lands exactly on the cutoff. Unity gain at DC.
#[derive(Clone, Copy, Debug)]
struct PoleSection {
    b: f64,
    a: f64,
    x_prev: f64,
    y_prev: f64,
}

impl PoleSection {
    fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        let k = (std::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
        Self {
            b: k / (1.0 + k),
            a: (k - 1.0) / (1.0 + k),
            x_prev: 0.0,
            y_prev: 0.0,
        }
    }

    #[inline]
    fn step(&mut self, x: f64) -> f64 {
        let y = self.b * (x + self.x_prev) - self.a * self.y_prev;
        self.x_prev = x;
        self.y_prev = y;
        y
    }
}

/// Streaming mixer + low-pass. Feeding a signal in arbitrary chunks gives the
/// same output as one call over the whole signal.
#[derive(Clone, Debug)]
pub struct Demodulator {
    lo_cycles_per_sample: f64,
    sections: Vec<PoleSection>,
    index: u64,
}

impl Demodulator {
    pub fn new(config: &DemodConfig, sample_rate_hz: f64) -> Result<Self> {
        config.validate()?;
        if !(sample_rate_hz > 2.0 * config.lo_frequency_hz) {
            return Err(Error::domain(format!(
                "sample rate {sample_rate_hz} Hz violates Nyquist for a {} Hz local oscillator",
                config.lo_frequency_hz
            )));
        }
        let section = PoleSection::new(config.lpf_cutoff_hz, sample_rate_hz);
        Ok(Self {
            lo_cycles_per_sample: config.lo_frequency_hz / sample_rate_hz,
            sections: vec![section; config.lpf_order as usize],
            index: 0,
        })
    }

    #[inline]
    fn lo(&self, n: u64) -> f64 {
        let phase = (n as f64 * self.lo_cycles_per_sample).fract();
        (std::f64::consts::TAU * phase).cos()
    }

    pub fn process_into(&mut self, input: &[f64], out: &mut Vec<f64>) {
        out.reserve(input.len());
        for &x in input {
            let mut v = x * self.lo(self.index);
            for s in &mut self.sections {
                v = s.step(v);
            }
            out.push(v);
            self.index += 1;
        }
    }

    pub fn process(&mut self, input: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(input.len());
        self.process_into(input, &mut out);
        out
    }

    /// Σ h[k]² of the filter cascade: the output variance of unit-variance
    /// white noise passed through the low-pass alone.
    pub fn noise_power_gain(&self) -> f64 {
        let mut sections: Vec<PoleSection> = self
            .sections
            .iter()
            .map(|s| PoleSection {
                x_prev: 0.0,
                y_prev: 0.0,
                ..*s
            })
            .collect();
        let mut sum = 0.0;
        let mut input = 1.0;
        let mut quiet = 0;
        for _ in 0..10_000_000 {
            let mut v = input;
            input = 0.0;
            for s in &mut sections {
                v = s.step(v);
            }
            sum += v * v;
            if v * v < sum * 1e-20 {
                quiet += 1;
                if quiet > 64 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        sum
    }
}

/// Mixes `signal` with a unit-amplitude cosine at the LO frequency, then
/// low-pass filters it. Filter state starts at zero.
pub fn demodulate(signal: &[f64], sample_rate_hz: f64, config: &DemodConfig) -> Result<Vec<f64>> {
    Ok(Demodulator::new(config, sample_rate_hz)?.process(signal))
}

/// `2·x[n]·cos(2π·f_lo·n/f_s)`: puts a baseband signal on a carrier so that
/// [`demodulate`] recovers it.
pub fn upconvert(baseband: &[f64], sample_rate_hz: f64, lo_frequency_hz: f64) -> Vec<f64> {
    let cps = lo_frequency_hz / sample_rate_hz;
    baseband
        .iter()
        .enumerate()
        .map(|(n, &x)| 2.0 * x * (std::f64::consts::TAU * (n as f64 * cps).fract()).cos())
        .collect()
}
