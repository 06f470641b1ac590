//! Tipping probabilities for a scalar saddle-node system driven through a
//! parameter ramp.
//!
//! The crate is `no_std` and only needs `alloc`. It provides the ramp model,
//! deterministic rate-induced tipping analysis, an Euler–Maruyama Monte-Carlo
//! estimator, a spectral Fokker–Planck solver, and closed-form estimates of
//! the leading eigenvalue and probability flux from nested integrals.
//!
//! The prototype system is
//!
//! ```text
//! dx = ((x + λ(t))² − 1) dt + √(2D) dW,   λ(t) = λmax/2 · (tanh(λmax ρ t / 2) + 1)
//! ```
//!
//! ```
//! use tipping_core::ramp::RampParameters;
//!
//! let p = RampParameters::from_rho(0.14, 6.0).unwrap();
//! assert!((p.epsilon - 0.21).abs() < 1e-12);
//! assert!((p.r - 1.26).abs() < 1e-12);
//! ```
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod math;

pub mod deterministic;
pub mod error;
pub mod fpe;
pub mod monte_carlo;
pub mod ode;
pub mod perturbation;
pub mod ramp;
pub mod roots;
pub mod tridiag;

pub use error::{Error, Result};
