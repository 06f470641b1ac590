//! Thin wrappers over `libm` so call sites read like `std`.

pub(crate) use libm::{exp, expm1, fabs as abs, log, pow, sin, sqrt};

pub(crate) const PI: f64 = core::f64::consts::PI;

pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}
