use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("{name} = {value} is outside the domain {domain}")]
    Domain { name: &'static str, value: f64, domain: &'static str },

    #[error("division by zero while computing {0}")]
    DivisionByZero(&'static str),

    #[error("no potential barrier exists for r·Γ = {r_gamma} (saddle-node at {r0})")]
    NoBarrier { r_gamma: f64, r0: f64 },

    #[error("root is not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("state exceeded the blow-up cap at t = {t}")]
    BlowUp { t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("orbit is only available up to t = {available}, requested t = {requested}")]
    OrbitTruncated { available: f64, requested: f64 },

    #[error("eigenvector sign alignment failed for mode {mode} at t = {t} (overlap {overlap})")]
    SignAlignment { mode: usize, t: f64, overlap: f64 },

    #[error("eigenvalue formula denominator has the wrong sign at t = {t}")]
    WrongSign { t: f64 },

    #[error("{censored} paths did not reach the target within the horizon {horizon}")]
    Timeout { censored: u64, horizon: f64 },

    #[error("numerical overflow in {0}")]
    Overflow(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn require(cond: bool, name: &'static str, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason })
    }
}
