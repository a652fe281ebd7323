//! Measurement chain: mixer demodulation, low-pass filtering, ADC
//! quantization and serialization of ADC codes into raw bitstreams.
//!
//! Two routes lead to a [`SampleBlock`]: passband signal → [`demodulate`] →
//! [`quantize`], or a baseband simulation straight into [`quantize`]. The
//! simulator emits baseband noise directly, so the second route is the
//! default in the pipeline.

mod adc;
mod demod;
mod rawfile;

pub use adc::{
    deserialize_bits, quantize, serialize_bits, AdcConfig, SampleBlock, DEFAULT_FULL_SCALE_MV,
};
pub use demod::{demodulate, upconvert, DemodConfig, Demodulator};
pub use rawfile::{RawSampleFile, RAW_MAGIC, RAW_VERSION};
