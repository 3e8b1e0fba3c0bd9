//! Float shims: std intrinsics when available, `libm` otherwise.

#[cfg(feature = "std")]
pub(crate) fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(not(feature = "std"))]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[cfg(feature = "std")]
pub(crate) fn exp(x: f64) -> f64 {
    x.exp()
}

#[cfg(not(feature = "std"))]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[cfg(feature = "std")]
pub(crate) fn ln(x: f64) -> f64 {
    x.ln()
}

#[cfg(not(feature = "std"))]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// `sqrt(a^2 + b^2)` without intermediate overflow.
#[cfg(feature = "std")]
pub(crate) fn hypot(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

#[cfg(not(feature = "std"))]
pub(crate) fn hypot(a: f64, b: f64) -> f64 {
    libm::hypot(a, b)
}
