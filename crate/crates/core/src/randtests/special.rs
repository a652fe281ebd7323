use statrs::function::erf::erfc as statrs_erfc;
use statrs::function::gamma::checked_gamma_ur;

pub(crate) fn erfc(x: f64) -> f64 {
    statrs_erfc(x)
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub(crate) fn igamc(a: f64, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    checked_gamma_ur(a, x).unwrap_or(0.0).clamp(0.0, 1.0)
}

/// Standard normal CDF.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs_erfc(-z / std::f64::consts::SQRT_2)
}
