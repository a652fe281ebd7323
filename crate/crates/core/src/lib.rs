//! Twin-beam quantum random number generation pipeline.
//!
//! The crate follows the signal from source to verdict:
//!
//! * [`model`] predicts the intensity-difference noise spectrum of a pair of
//!   twin beams and synthesizes correlated, bandlimited Gaussian noise pairs.
//! * [`acquisition`] demodulates, low-pass filters and digitizes those
//!   signals, and packs ADC codes into [`BitStream`]s.
//! * [`entropy`] estimates the quantum min-entropy per sample and plans
//!   extraction block sizes.
//! * [`extraction`] implements the seeded Toeplitz-hashing extractor over GF(2).
//! * [`postselect`] keeps agreeing bits of two raw streams to produce two
//!   identical random strings.
//! * [`analysis`] and [`randtests`] characterize the output.
//!
//! Numeric code that does not depend on random sampling or special functions
//! is generic over [`Real`]; the aliases at the crate root pin it to `f64`
//! (or `f32` where that is useful).

pub mod acquisition;
pub mod analysis;
pub mod bitstream;
pub mod entropy;
mod error;
pub mod extraction;
pub mod model;
pub mod postselect;
pub mod randtests;

pub use bitstream::BitStream;
pub use error::{Error, Result};

use num_traits::{Float, FromPrimitive};

/// Scalar type used by the generic numeric routines.
pub trait Real: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {
    /// Converts an `f64` literal into `Self`.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type CavityParams = model::CavityParams<f64>;
pub type CavityParamsF32 = model::CavityParams<f32>;
pub type VarianceDecomposition = entropy::VarianceDecomposition<f64>;
pub type VarianceDecompositionF32 = entropy::VarianceDecomposition<f32>;
pub type CorrelationProfile = analysis::CorrelationProfile<f64>;
pub type CorrelationProfileF32 = analysis::CorrelationProfile<f32>;

pub use acquisition::{AdcConfig, DemodConfig, SampleBlock};
pub use entropy::EntropyReport;
pub use extraction::{ExtractorConfig, ToeplitzSeed};
pub use model::{AnalogPair, TwinBeamConfig};
pub use postselect::SelectionResult;
pub use randtests::{SuiteConfig, TestId, TestReport};
