//! Scalar float helpers.
//!
//! Transcendental functions go through `libm` so the crate builds without
//! `std` and produces the same bits on every target.

/// Hyperbolic tangent.
#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

/// Natural exponential.
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// Natural logarithm.
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// `ln(1 + x)` without catastrophic cancellation near zero.
#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Rounds half away from zero (`round(0.5) = 1`, `round(-0.5) = -1`).
#[inline]
pub fn round_half_away(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// Numerically safe logistic function.
///
/// Split on the sign of the argument so `exp` is only ever called on
/// non-positive values and cannot overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(z))` computed directly, avoiding `ln` of a saturated sigmoid.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

/// `ln(1 + exp(x))` in overflow-safe form.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 { x + ln_1p(exp(-x)) } else { ln_1p(exp(x)) }
}

/// Sample mean; 0.0 on an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Relative error against an expectation, with an absolute floor so values
/// near zero compare sanely.
pub fn rel_error(actual: f64, expected: f64) -> f64 {
    let denom = expected.abs().max(1.0);
    (actual - expected).abs() / denom
}
