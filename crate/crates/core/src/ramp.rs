//! Ramp parameterisation, ramp profiles and the frozen-parameter landscape of
//! a scalar saddle-node system.

use crate::error::{require, Error, Result};
use crate::math::{abs, exp, log, sin, sqrt, PI};
use crate::roots::{golden_section_max, newton_bracketed};

/// Shape `Γ(μ)` of the ramp rate as a function of the ramp progress `μ ∈ [0, 1]`.
///
/// Implementations must satisfy `Γ(0) = Γ(1) = 0`, `Γ > 0` inside, and have a
/// single maximum.
pub trait RampProfile {
    fn gamma(&self, mu: f64) -> f64;
    fn dgamma(&self, mu: f64) -> f64;
    fn d2gamma(&self, mu: f64) -> f64;

    /// Location of the maximum of `Γ`.
    fn mu_crit(&self) -> f64 {
        golden_section_max(|m| self.gamma(m), 0.0, 1.0, 1e-12)
    }

    fn gamma_checked(&self, mu: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::Domain { name: "mu", value: mu, domain: "[0, 1]" });
        }
        Ok(self.gamma(mu))
    }
}

/// `Γ(μ) = 4μ(1 − μ)`, the profile of a `tanh` ramp.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogisticRamp;

impl RampProfile for LogisticRamp {
    fn gamma(&self, mu: f64) -> f64 {
        4.0 * mu * (1.0 - mu)
    }
    fn dgamma(&self, mu: f64) -> f64 {
        4.0 - 8.0 * mu
    }
    fn d2gamma(&self, _mu: f64) -> f64 {
        -8.0
    }
    fn mu_crit(&self) -> f64 {
        0.5
    }
}

/// `Γ(μ) = sin(πμ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SineRamp;

impl RampProfile for SineRamp {
    fn gamma(&self, mu: f64) -> f64 {
        sin(PI * mu)
    }
    fn dgamma(&self, mu: f64) -> f64 {
        PI * crate::math::cos(PI * mu)
    }
    fn d2gamma(&self, mu: f64) -> f64 {
        -PI * PI * sin(PI * mu)
    }
    fn mu_crit(&self) -> f64 {
        0.5
    }
}

/// `Γ(μ) = 4μ(1 − μ)` with a domain check.
pub fn gamma_of_mu(mu: f64) -> Result<f64> {
    LogisticRamp.gamma_checked(mu)
}

/// Parameters of the `tanh` ramp `λ(t) = λmax/2 · (tanh(λmax ρ t / 2) + 1)`
/// together with the derived rescaled rates `ε = ρλmax/4` and `r = ρλmax²/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampParameters {
    pub lambda_max: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub r: f64,
    pub mu_crit: f64,
}

impl RampParameters {
    pub fn from_rho(rho: f64, lambda_max: f64) -> Result<Self> {
        let (epsilon, r) = convert_parameters(rho, lambda_max)?;
        Ok(Self { lambda_max, rho, epsilon, r, mu_crit: 0.5 })
    }

    pub fn from_epsilon_r(epsilon: f64, r: f64) -> Result<Self> {
        let (rho, lambda_max) = invert_parameters(epsilon, r)?;
        Ok(Self { lambda_max, rho, epsilon, r, mu_crit: 0.5 })
    }

    /// Ramp value at time `t`.
    pub fn lambda(&self, t: f64) -> f64 {
        // Logistic form of the tanh ramp; accurate in both tails.
        self.lambda_max / (1.0 + exp(-self.lambda_max * self.rho * t))
    }

    /// `dλ/dt = ρ λ (λmax − λ)`.
    pub fn lambda_rate(&self, t: f64) -> f64 {
        let l = self.lambda(t);
        self.rho * l * (self.lambda_max - l)
    }

    /// Ramp progress `μ = λ/λmax`.
    pub fn mu(&self, t: f64) -> f64 {
        1.0 / (1.0 + exp(-self.lambda_max * self.rho * t))
    }

    /// Time at which the ramp reaches `lambda ∈ (0, λmax)`.
    pub fn time_of_lambda(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0 && lambda < self.lambda_max) {
            return Err(Error::Domain { name: "lambda", value: lambda, domain: "(0, lambda_max)" });
        }
        if self.rho == 0.0 {
            return Err(Error::DivisionByZero("time of lambda for a frozen ramp"));
        }
        Ok(log(lambda / (self.lambda_max - lambda)) / (self.lambda_max * self.rho))
    }
}

/// `(ρ, λmax) ↦ (ε, r) = (ρλmax/4, ρλmax²/4)`.
pub fn convert_parameters(rho: f64, lambda_max: f64) -> Result<(f64, f64)> {
    require(lambda_max.is_finite() && lambda_max > 0.0, "lambda_max", "must be finite and positive")?;
    require(rho.is_finite() && rho >= 0.0, "rho", "must be finite and non-negative")?;
    Ok((rho * lambda_max / 4.0, rho * lambda_max * lambda_max / 4.0))
}

/// `(ε, r) ↦ (ρ, λmax) = (4ε²/r, r/ε)`.
pub fn invert_parameters(epsilon: f64, r: f64) -> Result<(f64, f64)> {
    if epsilon == 0.0 {
        return Err(Error::DivisionByZero("lambda_max = r / epsilon"));
    }
    require(epsilon.is_finite() && epsilon > 0.0, "epsilon", "must be finite and positive")?;
    require(r.is_finite() && r > 0.0, "r", "must be finite and positive")?;
    Ok((4.0 * epsilon * epsilon / r, r / epsilon))
}

/// Critical ramp speed `ρc = 4 / (λmax(λmax − 2))` of the prototype.
pub fn critical_rho(lambda_max: f64) -> Result<f64> {
    if !(lambda_max > 2.0) {
        return Err(Error::Domain { name: "lambda_max", value: lambda_max, domain: "(2, inf)" });
    }
    Ok(4.0 / (lambda_max * (lambda_max - 2.0)))
}

/// Saddle-node point `(y0, r0)` where `f(y0) + b·r0 = 0` and `f'(y0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleNode {
    pub y0: f64,
    pub r0: f64,
}

/// Stable and unstable equilibria of `ẏ = f(y) + b·rΓ` for a frozen `rΓ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPair {
    pub r_gamma: f64,
    branches: Option<(f64, f64)>,
}

impl BranchPair {
    pub fn new(r_gamma: f64, branches: Option<(f64, f64)>) -> Self {
        Self { r_gamma, branches }
    }

    pub fn exists(&self) -> bool {
        self.branches.is_some()
    }

    pub fn stable(&self) -> Option<f64> {
        self.branches.map(|b| b.0)
    }

    pub fn unstable(&self) -> Option<f64> {
        self.branches.map(|b| b.1)
    }
}

/// Scalar vector field `f` with a saddle-node at `(y0, r0)`, driven as
/// `ẏ = f(y) + b·rΓ(μ)`.
///
/// The defaults assume `b > 0` and `f''(y0) > 0`, so the stable branch lies
/// below `y0` and the unstable branch above.
pub trait ScalarModel {
    fn f(&self, y: f64) -> f64;
    fn df(&self, y: f64) -> f64;
    fn d2f(&self, y: f64) -> f64;
    /// An antiderivative of `f`.
    fn primitive(&self, y: f64) -> f64;
    fn saddle_node(&self) -> SaddleNode;

    /// Coupling `b` of the ramp into the state.
    fn shift(&self) -> f64 {
        1.0
    }

    /// Typical distance between the branches, used to bracket roots.
    fn bracket_scale(&self) -> f64 {
        1.0
    }

    /// `a0 = ∂(f + b·r)/∂r` at the saddle-node.
    fn a0(&self) -> f64 {
        self.shift()
    }

    /// `a2 = f''(y0)/2`.
    fn a2(&self) -> f64 {
        0.5 * self.d2f(self.saddle_node().y0)
    }

    fn branches(&self, r_gamma: f64) -> BranchPair {
        generic_branches(self, r_gamma)
    }

    /// Frozen potential `U(y) = −∫f − b·rΓ·y`.
    fn potential(&self, y: f64, r_gamma: f64) -> f64 {
        -self.primitive(y) - self.shift() * r_gamma * y
    }

    /// Barrier `U(y_u) − U(y_s)`; fails when no barrier exists (`rΓ ≥ r0`).
    fn barrier(&self, r_gamma: f64) -> Result<f64> {
        let r0 = self.saddle_node().r0;
        match (r_gamma < r0, self.branches(r_gamma).stable(), self.branches(r_gamma).unstable()) {
            (true, Some(s), Some(u)) => Ok(self.potential(u, r_gamma) - self.potential(s, r_gamma)),
            _ => Err(Error::NoBarrier { r_gamma, r0 }),
        }
    }
}

fn generic_branches<M: ScalarModel + ?Sized>(m: &M, r_gamma: f64) -> BranchPair {
    let SaddleNode { y0, r0 } = m.saddle_node();
    if r_gamma > r0 {
        return BranchPair::new(r_gamma, None);
    }
    if r_gamma == r0 {
        return BranchPair::new(r_gamma, Some((y0, y0)));
    }
    let b = m.shift();
    let g = |y: f64| m.f(y) + b * r_gamma;
    let side = |dir: f64| -> Option<f64> {
        let mut w = m.bracket_scale();
        for _ in 0..64 {
            if g(y0 + dir * w) > 0.0 {
                let (lo, hi) = if dir < 0.0 { (y0 + dir * w, y0) } else { (y0, y0 + dir * w) };
                return newton_bracketed(g, |y| m.df(y), lo, hi, 1e-15).ok();
            }
            w *= 2.0;
        }
        None
    };
    match (side(-1.0), side(1.0)) {
        (Some(s), Some(u)) => BranchPair::new(r_gamma, Some((s, u))),
        _ => BranchPair::new(r_gamma, None),
    }
}

/// The prototype `f(y) = y² − 1` with `b = 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QuadraticFold;

impl ScalarModel for QuadraticFold {
    fn f(&self, y: f64) -> f64 {
        y * y - 1.0
    }
    fn df(&self, y: f64) -> f64 {
        2.0 * y
    }
    fn d2f(&self, _y: f64) -> f64 {
        2.0
    }
    fn primitive(&self, y: f64) -> f64 {
        y * y * y / 3.0 - y
    }
    fn saddle_node(&self) -> SaddleNode {
        SaddleNode { y0: 0.0, r0: 1.0 }
    }
    fn branches(&self, r_gamma: f64) -> BranchPair {
        if r_gamma > 1.0 {
            return BranchPair::new(r_gamma, None);
        }
        let s = sqrt(1.0 - r_gamma);
        BranchPair::new(r_gamma, Some((-s, s)))
    }
}

/// Branch pair of the prototype at `rΓ`.
pub fn equilibrium_branches(r_gamma: f64) -> BranchPair {
    QuadraticFold.branches(r_gamma)
}

/// An equilibrium of the extended system in `(x, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedEquilibrium {
    pub label: &'static str,
    pub x: f64,
    pub lambda: f64,
    /// Number of eigenvalues with positive real part.
    pub unstable_dims: usize,
}

/// The four equilibria `S₋, U₋, S₊, U₊` of `ẋ = f(x + bλ)`, `λ̇ = ρλ(λmax − λ)`.
pub fn extended_equilibria<M: ScalarModel>(model: &M, p: &RampParameters) -> Result<[ExtendedEquilibrium; 4]> {
    let br = model.branches(0.0);
    let (s, u) = match (br.stable(), br.unstable()) {
        (Some(s), Some(u)) => (s, u),
        _ => return Err(Error::NoBarrier { r_gamma: 0.0, r0: model.saddle_node().r0 }),
    };
    let shift = model.shift() * p.lambda_max;
    let rate = p.rho * p.lambda_max;
    let dims = |y: f64, lambda_rate: f64| (model.df(y) > 0.0) as usize + (lambda_rate > 0.0) as usize;
    Ok([
        ExtendedEquilibrium { label: "S-", x: s, lambda: 0.0, unstable_dims: dims(s, rate) },
        ExtendedEquilibrium { label: "U-", x: u, lambda: 0.0, unstable_dims: dims(u, rate) },
        ExtendedEquilibrium { label: "S+", x: s - shift, lambda: p.lambda_max, unstable_dims: dims(s, -rate) },
        ExtendedEquilibrium { label: "U+", x: u - shift, lambda: p.lambda_max, unstable_dims: dims(u, -rate) },
    ])
}

/// Kramers escape rate over the unramped barrier,
/// `κ = √(αβ)/(2π) · exp(−ΔU/D)`.
pub fn kramers_rate<M: ScalarModel>(model: &M, d: f64) -> Result<f64> {
    require(d.is_finite() && d > 0.0, "D", "must be finite and positive")?;
    let br = model.branches(0.0);
    let (s, u) = match (br.stable(), br.unstable()) {
        (Some(s), Some(u)) => (s, u),
        _ => return Err(Error::NoBarrier { r_gamma: 0.0, r0: model.saddle_node().r0 }),
    };
    let alpha = -model.df(s);
    let beta = model.df(u);
    let du = model.barrier(0.0)?;
    Ok(sqrt(abs(alpha * beta)) / (2.0 * PI) * exp(-du / d))
}
