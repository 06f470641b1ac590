//! Nested anti-derivatives of the stationary density and the closed-form
//! escape estimates built from them.
//!
//! With `p = exp(−U/D)` and `p₂ = ∫_y^δ exp(U/D)`, the iterated integrals are
//!
//! ```text
//! p₁₂(y)   = ∫_y^δ p·p₂,        p₂₁₂(y) = ∫_y^δ exp(U/D)·p₁₂,
//! p₁₂₁₂(y) = ∫_y^δ p·p₂₁₂,
//! ```
//!
//! evaluated at `y = −δ`. Every exponential carries a subtracted offset, so
//! `U/D` of several hundred is harmless.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{require, Error, Result};
use crate::fpe::{Landscape, SpatialGrid};
use crate::math::{exp, expm1, log};

/// A positive number stored as `mantissa·exp(ln_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub ln_scale: f64,
}

impl Scaled {
    pub fn value(&self) -> f64 {
        self.mantissa * exp(self.ln_scale)
    }

    pub fn ln(&self) -> f64 {
        log(self.mantissa) + self.ln_scale
    }
}

/// Values of the nested integrals at the left end `a = −δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NestedIntegralTable {
    pub t: f64,
    pub a: f64,
    pub p: Scaled,
    pub p2: Scaled,
    pub p12: Scaled,
    pub p212: Scaled,
    pub p1212: Scaled,
}

/// Cumulative right-to-left integral of `f` on a uniform grid, fourth order.
/// `out[i] = ∫_{y_i}^{y_last} f`.
pub(crate) fn cumulative_from_right(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 4 {
        for i in (0..n - 1).rev() {
            out[i] = out[i + 1] + 0.5 * h * (f[i] + f[i + 1]);
        }
        return out;
    }
    let w = h / 24.0;
    for i in (0..n - 1).rev() {
        let piece = if i == 0 {
            9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]
        } else if i == n - 2 {
            f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]
        } else {
            -f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]
        };
        out[i] = out[i + 1] + w * piece;
    }
    out
}

/// The nested integrals as functions of `y` on the grid nodes, boundaries included.
#[derive(Debug, Clone)]
pub struct NestedProfiles {
    pub t: f64,
    pub d: f64,
    pub grid: SpatialGrid,
    /// `max U/D` and `min U/D` over the nodes.
    u_max: f64,
    u_min: f64,
    /// `exp(−U/D + min)`.
    e1: Vec<f64>,
    /// Scaled by `exp(−max)`.
    p2: Vec<f64>,
    /// Scaled by `exp(min − max)`.
    p12: Vec<f64>,
    /// Scaled by `exp(min − 2max)`.
    p212: Vec<f64>,
    /// Scaled by `exp(2min − 2max)`.
    p1212: Vec<f64>,
}

impl NestedProfiles {
    pub fn new<L: Landscape>(landscape: &L, t: f64, d: f64, grid: &SpatialGrid) -> Result<Self> {
        require(d.is_finite() && d > 0.0, "D", "must be positive")?;
        let u: Vec<f64> = landscape.potential_nodes(grid, t)?.into_iter().map(|x| x / d).collect();
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow("U/D"));
        }
        let u_max = u.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let u_min = u.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let h = grid.spacing;
        let e1: Vec<f64> = u.iter().map(|x| exp(u_min - x)).collect();
        let e2: Vec<f64> = u.iter().map(|x| exp(x - u_max)).collect();
        let mul = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<f64>>();
        let p2 = cumulative_from_right(&e2, h);
        let p12 = cumulative_from_right(&mul(&e1, &p2), h);
        let p212 = cumulative_from_right(&mul(&e2, &p12), h);
        let p1212 = cumulative_from_right(&mul(&e1, &p212), h);
        let ok = [&p2, &p12, &p212, &p1212].iter().all(|v| v[0].is_finite() && v[0] > 0.0);
        if !ok {
            return Err(Error::Overflow("nested integrals"));
        }
        Ok(Self { t, d, grid: *grid, u_max, u_min, e1, p2, p12, p212, p1212 })
    }

    pub fn table(&self) -> NestedIntegralTable {
        let (mx, mn) = (self.u_max, self.u_min);
        NestedIntegralTable {
            t: self.t,
            a: -self.grid.delta,
            p: Scaled { mantissa: self.e1[0], ln_scale: -mn },
            p2: Scaled { mantissa: self.p2[0], ln_scale: mx },
            p12: Scaled { mantissa: self.p12[0], ln_scale: mx - mn },
            p212: Scaled { mantissa: self.p212[0], ln_scale: 2.0 * mx - mn },
            p1212: Scaled { mantissa: self.p1212[0], ln_scale: 2.0 * mx - 2.0 * mn },
        }
    }

    pub fn p12(&self) -> Scaled {
        self.table().p12
    }

    /// `p·p₂` over the nodes, in units of `exp(max − min)`.
    pub fn p_times_p2_scaled(&self) -> Vec<f64> {
        self.e1.iter().zip(&self.p2).map(|(a, b)| a * b).collect()
    }

    /// `ln ∫ p·p₂ dy` by the grid rule; equals `ln p₁₂(−δ)` to quadrature accuracy.
    pub fn ln_mass(&self) -> f64 {
        let n = self.e1.len();
        let s: f64 = (1..n - 1).map(|i| self.e1[i] * self.p2[i]).sum();
        log(self.grid.spacing * s) + self.u_max - self.u_min
    }

    /// `P_* ∝ p·p₂` on the interior points, zero at `±δ`, with unit integral
    /// under the grid rule.
    pub fn quasi_stationary(&self) -> Vec<f64> {
        let n = self.e1.len();
        let s: f64 = (1..n - 1).map(|i| self.e1[i] * self.p2[i]).sum();
        let norm = 1.0 / (self.grid.spacing * s);
        (1..n - 1).map(|i| self.e1[i] * self.p2[i] * norm).collect()
    }

    /// First-order estimate `γ₁ ≈ D/(p₁₂₁₂/p₁₂ − p₂₁₂/p₂)` at `a = −δ`.
    pub fn gamma1(&self) -> Result<f64> {
        let denom = self.p1212[0] / self.p12[0] - self.p212[0] / self.p2[0];
        if !(denom < 0.0) {
            return Err(Error::WrongSign { t: self.t });
        }
        Ok(self.d * exp(self.u_min - self.u_max) / denom)
    }

    /// Probability flux `J = D/p₁₂(−δ)`.
    pub fn flux(&self) -> f64 {
        self.d * exp(self.u_min - self.u_max) / self.p12[0]
    }
}

/// Nested-integral table at time `t`.
pub fn nested_integrals<L: Landscape>(landscape: &L, t: f64, d: f64, grid: &SpatialGrid) -> Result<NestedIntegralTable> {
    Ok(NestedProfiles::new(landscape, t, d, grid)?.table())
}

/// First-order leading eigenvalue at time `t`; always negative.
pub fn leading_eigenvalue_formula<L: Landscape>(landscape: &L, t: f64, d: f64, grid: &SpatialGrid) -> Result<f64> {
    NestedProfiles::new(landscape, t, d, grid)?.gamma1()
}

/// Probability flux through `y = δ` at time `t`.
pub fn probability_flux<L: Landscape>(landscape: &L, t: f64, d: f64, grid: &SpatialGrid) -> Result<f64> {
    Ok(NestedProfiles::new(landscape, t, d, grid)?.flux())
}

/// Time window and sampling for the closed-form probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub t0: f64,
    pub t_end: f64,
    pub n_time: usize,
}

impl Default for TimeWindow {
    fn default() -> Self {
        Self { t0: -10.0, t_end: 10.0, n_time: 2001 }
    }
}

impl TimeWindow {
    pub fn times(&self) -> Vec<f64> {
        let n = self.n_time;
        (0..n).map(|i| self.t0 + (self.t_end - self.t0) * i as f64 / (n - 1) as f64).collect()
    }

    fn validate(&self) -> Result<()> {
        require(self.t_end > self.t0, "t_end", "must exceed t0")?;
        require(self.n_time >= 2, "n_time", "must be at least 2")
    }
}

/// `γ₁(t)` and `J(t)` sampled over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    pub t: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub flux: Vec<f64>,
}

impl RateProfile {
    /// `1 − exp(∫γ₁ dt)`.
    pub fn escape_eigen(&self) -> f64 {
        (-expm1(trapezoid(&self.t, &self.gamma1))).clamp(0.0, 1.0)
    }

    /// `1 − exp(−∫J dt)`.
    pub fn escape_flux(&self) -> f64 {
        (-expm1(-trapezoid(&self.t, &self.flux))).clamp(0.0, 1.0)
    }
}

pub(crate) fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2).zip(f.windows(2)).map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1])).sum()
}

/// `γ₁` and `J` at every sample of `window`.
pub fn rate_profile<L: Landscape>(landscape: &L, d: f64, grid: &SpatialGrid, window: &TimeWindow) -> Result<RateProfile> {
    window.validate()?;
    let t = window.times();
    let mut gamma1 = Vec::with_capacity(t.len());
    let mut flux = Vec::with_capacity(t.len());
    for &s in &t {
        let prof = NestedProfiles::new(landscape, s, d, grid)?;
        gamma1.push(prof.gamma1()?);
        flux.push(prof.flux());
    }
    Ok(RateProfile { t, gamma1, flux })
}

/// Escape probability from the leading eigenvalue, `P_P`.
pub fn escape_probability_eigen<L: Landscape>(landscape: &L, d: f64, grid: &SpatialGrid, window: &TimeWindow) -> Result<f64> {
    window.validate()?;
    let t = window.times();
    let g = t
        .iter()
        .map(|&s| NestedProfiles::new(landscape, s, d, grid)?.gamma1())
        .collect::<Result<Vec<f64>>>()?;
    Ok((-expm1(trapezoid(&t, &g))).clamp(0.0, 1.0))
}

/// Escape probability from the probability flux, `P_J`.
pub fn escape_probability_flux<L: Landscape>(landscape: &L, d: f64, grid: &SpatialGrid, window: &TimeWindow) -> Result<f64> {
    window.validate()?;
    let t = window.times();
    let j = t
        .iter()
        .map(|&s| Ok(NestedProfiles::new(landscape, s, d, grid)?.flux()))
        .collect::<Result<Vec<f64>>>()?;
    Ok((-expm1(-trapezoid(&t, &j))).clamp(0.0, 1.0))
}
