//! Twin-beam noise model: the intensity-difference spectrum of a
//! nondegenerate OPO and a time-domain simulator for the detected pair.

mod simulate;
mod spectrum;

pub use simulate::{
    simulate_snl_reference, simulate_twin_streams, AnalogPair, TwinBeamConfig, SEGMENT_LEN,
    WARMUP_TIME_CONSTANTS,
};
pub use spectrum::{intensity_difference_spectrum, squeezing_db, CavityParams};
