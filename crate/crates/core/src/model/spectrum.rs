use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Cavity and detection parameters of the twin-beam difference spectrum.
///
/// `tau_c` is in microseconds and `omega` in MHz; the spectrum uses their
/// plain numeric product as the dimensionless `Ω·τ_c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams<T> {
    pub eta: T,
    pub xi: T,
    pub tau_c: T,
    pub omega: T,
}

impl<T: Real> CavityParams<T> {
    pub fn new(eta: T, xi: T, tau_c: T, omega: T) -> Result<Self> {
        let p = Self {
            eta,
            xi,
            tau_c,
            omega,
        };
        p.validate()?;
        Ok(p)
    }

    /// η = 0.893, ξ = 0.953, τ_c = 0.0196 μs, Ω = 4 MHz.
    pub fn reference() -> Self {
        Self {
            eta: T::lit(0.893),
            xi: T::lit(0.953),
            tau_c: T::lit(0.0196),
            omega: T::lit(4.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(self.eta) {
            return Err(Error::domain(format!("eta must lie in [0,1], got {:?}", self.eta)));
        }
        if !unit(self.xi) {
            return Err(Error::domain(format!("xi must lie in [0,1], got {:?}", self.xi)));
        }
        if !(self.tau_c > T::zero()) || !self.tau_c.is_finite() {
            return Err(Error::domain(format!("tau_c must be > 0, got {:?}", self.tau_c)));
        }
        if !(self.omega >= T::zero()) {
            return Err(Error::domain(format!("omega must be >= 0, got {:?}", self.omega)));
        }
        Ok(())
    }
}

/// Normalized intensity-difference noise `S/S_SNL = 1 − ηξ / (1 + Ω²τ_c²)`.
pub fn intensity_difference_spectrum<T: Real>(params: &CavityParams<T>) -> Result<T> {
    params.validate()?;
    let x = params.omega * params.tau_c;
    Ok(T::one() - params.eta * params.xi / (T::one() + x * x))
}

/// Noise reduction below the shot-noise limit in dB (positive = squeezed).
pub fn squeezing_db<T: Real>(params: &CavityParams<T>) -> Result<T> {
    let s = intensity_difference_spectrum(params)?;
    if !(s > T::zero()) {
        return Err(Error::domain(
            "spectrum is zero; squeezing is unbounded for eta*xi = 1 at omega = 0",
        ));
    }
    Ok(-T::lit(10.0) * s.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_parameters() {
        let p = CavityParams::<f64>::reference();
        let s = intensity_difference_spectrum(&p).unwrap();
        assert!((s - 0.1542).abs() < 5e-4, "{s}");
        let db = squeezing_db(&p).unwrap();
        assert!((db - 8.1).abs() < 0.05, "{db}");

        let pf = CavityParams::<f32>::reference();
        assert!((squeezing_db(&pf).unwrap() - 8.1).abs() < 0.05);
    }

    #[test]
    fn dc_and_limits() {
        let mut p = CavityParams::<f64>::reference();
        p.omega = 0.0;
        // 1 − 0.893·0.953
        let s0 = intensity_difference_spectrum(&p).unwrap();
        assert!((s0 - 0.148_971).abs() < 1e-9);

        p.eta = 0.0;
        assert_eq!(intensity_difference_spectrum(&p).unwrap(), 1.0);
        assert_eq!(squeezing_db(&p).unwrap(), 0.0);

        let mut far = CavityParams::<f64>::reference();
        far.omega = 1e6;
        assert!(squeezing_db(&far).unwrap() < 1e-6);
    }

    #[test]
    fn invalid_parameters() {
        assert!(CavityParams::new(1.2, 0.5, 0.01, 1.0).is_err());
        assert!(CavityParams::new(0.5, -0.1, 0.01, 1.0).is_err());
        assert!(CavityParams::new(0.5, 0.5, 0.0, 1.0).is_err());
        assert!(CavityParams::new(0.5, 0.5, 0.01, -1.0).is_err());
        let perfect = CavityParams::new(1.0, 1.0, 0.01, 0.0).unwrap();
        assert!(squeezing_db(&perfect).is_err());
    }

    proptest! {
        #[test]
        fn bounded_and_monotone(eta in 0.0f64..=1.0, xi in 0.0f64..=1.0,
                                tau in 1e-4f64..1.0, w1 in 0.0f64..100.0, dw in 0.0f64..100.0) {
            let a = CavityParams::new(eta, xi, tau, w1).unwrap();
            let b = CavityParams::new(eta, xi, tau, w1 + dw).unwrap();
            let sa = intensity_difference_spectrum(&a).unwrap();
            let sb = intensity_difference_spectrum(&b).unwrap();
            prop_assert!(sa <= sb + 1e-15);
            prop_assert!(sa >= 1.0 - eta * xi - 1e-15);
            prop_assert!(sa <= 1.0);
        }
    }
}
