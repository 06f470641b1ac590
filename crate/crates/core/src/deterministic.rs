//! Deterministic rate-induced tipping: connecting orbits, regime
//! classification, critical rates and the rescaled normal form.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{require, Error, Result};
use crate::math::{abs, pow, sqrt};
use crate::ode::{integrate, DenseSolution, OdeOptions, Termination, Trajectory};
use crate::ramp::{critical_rho, LogisticRamp, QuadraticFold, RampParameters, RampProfile, ScalarModel};
use crate::roots::{bisect, bisect_predicate};

/// Offset of manifold seeds from their equilibrium.
pub const SEED_OFFSET: f64 = 1e-8;
/// Magnitude beyond which a trajectory is declared escaped.
pub const BLOW_UP_CAP: f64 = 1e6;

/// Which invariant manifold of the extended system to follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldBranch {
    /// Unstable manifold of `S₋` (the past stable state), written `x^u(t)`.
    UnstableOfSMinus,
    /// Stable manifold of `U₊` (the future unstable state), written `x^s(t)`.
    StableOfUPlus,
}

/// Window and tolerance for connecting-orbit integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    pub t_min: f64,
    pub t_max: f64,
    pub tol: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { t_min: -40.0, t_max: 40.0, tol: 1e-11 }
    }
}

/// An invariant manifold of `ẋ = f(x + bλ(t))` traced in time.
///
/// Beyond the seed the orbit is continued by its linearisation, so `x(t)` is
/// defined on the whole side of the seed up to where the integration ended.
#[derive(Debug, Clone)]
pub struct ConnectingOrbit<M = QuadraticFold> {
    model: M,
    params: RampParameters,
    branch: ManifoldBranch,
    solution: DenseSolution,
    t_seed: f64,
    /// `x − x_eq` per unit `λ − λ_eq` along the seeding eigendirection.
    slope: f64,
    x_eq: f64,
    lambda_eq: f64,
    truncated: bool,
}

impl<M: ScalarModel> ConnectingOrbit<M> {
    pub fn params(&self) -> &RampParameters {
        &self.params
    }

    pub fn branch(&self) -> ManifoldBranch {
        self.branch
    }

    /// True when the integration stopped at the blow-up cap.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Interval on which `x(t)` is available.
    pub fn span(&self) -> (f64, f64) {
        let (a, b) = self.solution.span();
        match self.branch {
            ManifoldBranch::UnstableOfSMinus => (f64::NEG_INFINITY, b),
            ManifoldBranch::StableOfUPlus => (a, f64::INFINITY),
        }
    }

    pub fn x(&self, t: f64) -> Result<f64> {
        let beyond_seed = match self.branch {
            ManifoldBranch::UnstableOfSMinus => t < self.t_seed,
            ManifoldBranch::StableOfUPlus => t > self.t_seed,
        };
        if beyond_seed {
            return Ok(self.x_eq + self.slope * (self.params.lambda(t) - self.lambda_eq));
        }
        self.solution.eval_component(t, 0)
    }

    /// Linear coefficient `c1(t) = −f'(x(t) + bλ(t))` of the drift in the
    /// frame co-moving with the orbit.
    pub fn c1(&self, t: f64) -> Result<f64> {
        let x = self.x(t)?;
        Ok(-self.model.df(x + self.model.shift() * self.params.lambda(t)))
    }

    pub fn trajectory(&self, times: &[f64]) -> Trajectory {
        let label = match self.branch {
            ManifoldBranch::UnstableOfSMinus => "x_u",
            ManifoldBranch::StableOfUPlus => "x_s",
        };
        sample(label, times, |t| self.x(t))
    }
}

fn sample<F: Fn(f64) -> Result<f64>>(label: &str, times: &[f64], f: F) -> Trajectory {
    let mut tr = Trajectory { label: String::from(label), times: Vec::new(), values: Vec::new(), truncated: false };
    for &t in times {
        match f(t) {
            Ok(v) => {
                tr.times.push(t);
                tr.values.push(v);
            }
            Err(_) => {
                tr.truncated = true;
                break;
            }
        }
    }
    tr
}

/// Connecting orbit of the prototype over the default window.
pub fn connecting_orbit(p: &RampParameters, branch: ManifoldBranch) -> Result<ConnectingOrbit> {
    connecting_orbit_with(QuadraticFold, p, branch, &OrbitOptions::default())
}

/// Connecting orbit for a general model.
pub fn connecting_orbit_with<M: ScalarModel>(
    model: M,
    p: &RampParameters,
    branch: ManifoldBranch,
    opts: &OrbitOptions,
) -> Result<ConnectingOrbit<M>> {
    require(p.rho > 0.0, "rho", "must be positive for a connecting orbit")?;
    require(opts.t_min < opts.t_max, "t_min", "must be below t_max")?;
    let br = model.branches(0.0);
    let (ys, yu) = match (br.stable(), br.unstable()) {
        (Some(s), Some(u)) => (s, u),
        _ => return Err(Error::NoBarrier { r_gamma: 0.0, r0: model.saddle_node().r0 }),
    };
    let b = model.shift();
    let sigma = p.rho * p.lambda_max;
    let (x_eq, lambda_eq, slope, dl) = match branch {
        ManifoldBranch::UnstableOfSMinus => {
            let fp = model.df(ys);
            (ys, 0.0, b * fp / (sigma - fp), 1.0)
        }
        ManifoldBranch::StableOfUPlus => {
            let fp = model.df(yu);
            (yu - b * p.lambda_max, p.lambda_max, -b * fp / (fp + sigma), -1.0)
        }
    };
    let norm = sqrt(1.0 + slope * slope);
    let lambda_seed = lambda_eq + dl * SEED_OFFSET / norm;
    let x_seed = x_eq + slope * (lambda_seed - lambda_eq);
    let t_seed = p.time_of_lambda(lambda_seed)?;
    let t_target = match branch {
        ManifoldBranch::UnstableOfSMinus => opts.t_max.max(t_seed + 1.0),
        ManifoldBranch::StableOfUPlus => opts.t_min.min(t_seed - 1.0),
    };
    let ode = OdeOptions { blow_up: BLOW_UP_CAP, ..OdeOptions::with_tol(opts.tol) };
    let params = *p;
    let run = integrate(
        |t, x, dx| dx[0] = model.f(x[0] + b * params.lambda(t)),
        t_seed,
        &[x_seed],
        t_target,
        &ode,
        |_, _| false,
    )?;
    Ok(ConnectingOrbit {
        model,
        params,
        branch,
        solution: run.solution,
        t_seed,
        slope,
        x_eq,
        lambda_eq,
        truncated: run.termination == Termination::BlowUp,
    })
}

/// Outcome of a deterministic ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Tracking,
    Escape,
    Critical,
}

/// Classification together with the trajectory used to decide it.
#[derive(Debug, Clone)]
pub struct RegimeReport {
    pub regime: Regime,
    pub epsilon: f64,
    pub r: f64,
    /// `y(t)` of the past stable state's unstable manifold.
    pub witness: Trajectory,
}

/// Tolerance for declaring the end state reached.
pub const TRACKING_TOL: f64 = 1e-3;

/// Path of the autonomous system `ẏ = f(y) + b·rΓ(μ)`, `μ̇ = εΓ(μ)` in the
/// `(μ, y)` plane.
#[derive(Debug, Clone)]
pub struct PhaseCurve {
    pub t: Vec<f64>,
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
    pub escaped: bool,
}

fn phase_curve(sol: &DenseSolution, escaped: bool) -> PhaseCurve {
    let mut c = PhaseCurve { t: Vec::new(), mu: Vec::new(), y: Vec::new(), escaped };
    for (i, &t) in sol.node_times().iter().enumerate() {
        let s = sol.node_state(i);
        c.t.push(t);
        c.y.push(s[0]);
        c.mu.push(s[1]);
    }
    c
}

fn check_rates(epsilon: f64, r: f64) -> Result<()> {
    require(epsilon.is_finite() && epsilon > 0.0, "epsilon", "must be finite and positive")?;
    require(r.is_finite() && r >= 0.0, "r", "must be finite and non-negative")
}

/// Unstable manifold of `(y_s[0], μ = 0)` in the autonomous system, followed
/// until it blows up or settles on `y_s[0]` near `μ = 1`.
pub fn unstable_manifold<M: ScalarModel, G: RampProfile>(
    model: &M,
    profile: &G,
    epsilon: f64,
    r: f64,
) -> Result<(PhaseCurve, Regime)> {
    check_rates(epsilon, r)?;
    let (ys, _) = end_states(model)?;
    let b = model.shift();
    let sigma = epsilon * profile.dgamma(0.0);
    let fp = model.df(ys);
    let mu0 = SEED_OFFSET;
    let y0 = ys + b * r * profile.dgamma(0.0) / (sigma - fp) * mu0;
    let mu_end = 1.0 - TRACKING_TOL;
    let horizon = 20.0 / epsilon + 200.0;
    let ode = OdeOptions { blow_up: BLOW_UP_CAP, ..OdeOptions::with_tol(1e-11) };
    let run = integrate(
        |_, s, ds| {
            let g = profile.gamma(s[1]);
            ds[0] = model.f(s[0]) + b * r * g;
            ds[1] = epsilon * g;
        },
        0.0,
        &[y0, mu0],
        horizon,
        &ode,
        |_, s| s[1] >= mu_end && abs(s[0] - ys) < TRACKING_TOL,
    )?;
    let regime = match run.termination {
        Termination::BlowUp => Regime::Escape,
        Termination::Stopped => Regime::Tracking,
        Termination::Completed => {
            let s = run.solution.final_state();
            match model.branches(r * profile.gamma(s[1])).unstable() {
                Some(u) if s[0] < u => Regime::Tracking,
                _ => Regime::Escape,
            }
        }
    };
    Ok((phase_curve(&run.solution, regime == Regime::Escape), regime))
}

/// Stable manifold of `(y_u[0], μ = 1)`, traced backward until `μ` falls
/// below the seed offset or the curve blows up.
pub fn stable_manifold<M: ScalarModel, G: RampProfile>(model: &M, profile: &G, epsilon: f64, r: f64) -> Result<PhaseCurve> {
    check_rates(epsilon, r)?;
    let (_, yu) = end_states(model)?;
    let b = model.shift();
    let lam = epsilon * profile.dgamma(1.0);
    let slope = -b * r * profile.dgamma(1.0) / (model.df(yu) - lam);
    let mu0 = 1.0 - SEED_OFFSET;
    let y0 = yu + slope * (mu0 - 1.0);
    let horizon = 20.0 / epsilon + 200.0;
    let ode = OdeOptions { blow_up: BLOW_UP_CAP, ..OdeOptions::with_tol(1e-11) };
    let run = integrate(
        |_, s, ds| {
            let g = profile.gamma(s[1]);
            ds[0] = model.f(s[0]) + b * r * g;
            ds[1] = epsilon * g;
        },
        0.0,
        &[y0, mu0],
        -horizon,
        &ode,
        |_, s| s[1] < SEED_OFFSET,
    )?;
    let escaped = run.termination == Termination::BlowUp;
    Ok(phase_curve(&run.solution, escaped))
}

fn end_states<M: ScalarModel>(model: &M) -> Result<(f64, f64)> {
    let br = model.branches(0.0);
    match (br.stable(), br.unstable()) {
        (Some(s), Some(u)) => Ok((s, u)),
        _ => Err(Error::NoBarrier { r_gamma: 0.0, r0: model.saddle_node().r0 }),
    }
}

/// Classifies the ramp `(ε, r)` as tracking or escaping.
pub fn classify_regime<M: ScalarModel, G: RampProfile>(model: &M, profile: &G, epsilon: f64, r: f64) -> Result<RegimeReport> {
    let (curve, regime) = unstable_manifold(model, profile, epsilon, r)?;
    let witness = Trajectory { label: String::from("y"), times: curve.t, values: curve.y, truncated: curve.escaped };
    Ok(RegimeReport { regime, epsilon, r, witness })
}

/// Leading-order critical rate `r0 + ε·√(−r0Γ''(μc)/(2a0a2))`.
pub fn critical_rate_asymptotic<M: ScalarModel, G: RampProfile>(model: &M, profile: &G, epsilon: f64) -> Result<f64> {
    require(epsilon.is_finite() && epsilon >= 0.0, "epsilon", "must be finite and non-negative")?;
    let r0 = model.saddle_node().r0;
    let g2 = profile.d2gamma(profile.mu_crit());
    let q = -r0 * g2 / (2.0 * model.a0() * model.a2());
    if !(q > 0.0) || !(g2 < 0.0) {
        return Err(Error::Domain { name: "-r0 Γ''/(2 a0 a2)", value: q, domain: "(0, inf)" });
    }
    Ok(r0 + epsilon * sqrt(q))
}

/// Critical rate located by bisection on the regime.
#[derive(Debug, Clone)]
pub struct CriticalRate {
    pub r_c: f64,
    pub bracket: (f64, f64),
    pub report: RegimeReport,
}

/// Bisects `r` over `[r0, r0 + 4ε]` until the bracket is below `tol`.
pub fn critical_rate_numeric<M: ScalarModel, G: RampProfile>(
    model: &M,
    profile: &G,
    epsilon: f64,
    tol: f64,
) -> Result<CriticalRate> {
    require(tol > 0.0, "tol", "must be positive")?;
    check_rates(epsilon, 1.0)?;
    let r0 = model.saddle_node().r0;
    let escapes = |r: f64| -> Result<bool> { Ok(classify_regime(model, profile, epsilon, r)?.regime == Regime::Escape) };
    let (lo, hi) = bisect_predicate(escapes, r0, r0 + 4.0 * epsilon, tol)?;
    let r_c = 0.5 * (lo + hi);
    let mut report = classify_regime(model, profile, epsilon, r_c)?;
    report.regime = Regime::Critical;
    Ok(CriticalRate { r_c, bracket: (lo, hi), report })
}

/// Critical ramp speed of the prototype located by bisection on `ρ`.
pub fn critical_speed_numeric(lambda_max: f64, tol: f64) -> Result<(f64, f64)> {
    let guess = critical_rho(lambda_max)?;
    let escapes = |rho: f64| -> Result<bool> {
        let p = RampParameters::from_rho(rho, lambda_max)?;
        Ok(classify_regime(&QuadraticFold, &LogisticRamp, p.epsilon, p.r)?.regime == Regime::Escape)
    };
    bisect_predicate(escapes, 0.5 * guess, 2.0 * guess, tol)
}

/// Values of `μ` where `rΓ(μ)` crosses the saddle-node value `r0`, or `None`
/// when it never does.
pub fn saddle_node_crossings<M: ScalarModel, G: RampProfile>(model: &M, profile: &G, r: f64) -> Option<(f64, f64)> {
    let r0 = model.saddle_node().r0;
    let mc = profile.mu_crit();
    let g = |mu: f64| r * profile.gamma(mu) - r0;
    if !(g(mc) > 0.0) {
        return None;
    }
    let a = bisect(g, 0.0, mc, 1e-14).ok()?;
    let b = bisect(g, mc, 1.0, 1e-14).ok()?;
    Some((a, b))
}

/// `c1(t)` along the prototype's `x^u` together with its minimum.
#[derive(Debug, Clone)]
pub struct C1Profile {
    pub trajectory: Trajectory,
    pub min_value: f64,
    pub t_at_min: f64,
}

pub fn c1_profile(p: &RampParameters, times: &[f64]) -> Result<C1Profile> {
    let orbit = connecting_orbit(p, ManifoldBranch::UnstableOfSMinus)?;
    let mut trajectory = sample("c1", times, |t| orbit.c1(t));
    trajectory.label = String::from("c1");
    if trajectory.truncated {
        let available = orbit.span().1;
        let requested = times[trajectory.len()];
        return Err(Error::OrbitTruncated { available, requested });
    }
    let (mut min_value, mut t_at_min) = (f64::INFINITY, f64::NAN);
    for (&t, &v) in trajectory.times.iter().zip(&trajectory.values) {
        if v < min_value {
            min_value = v;
            t_at_min = t;
        }
    }
    Ok(C1Profile { trajectory, min_value, t_at_min })
}

/// Speed limits beyond which a single-mode description is unreliable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedLimits {
    /// Smallest `ρ` for which `min c1` over `t ∈ [−10, 10]` reaches zero.
    pub min_c1_zero: f64,
    /// `ρ` at which `r = r0 + ε·c_r/2`.
    pub half_rate: f64,
}

/// Evaluation window for the `c1` criterion.
pub const C1_WINDOW: (f64, f64) = (-10.0, 10.0);

pub fn single_mode_speed_limit(lambda_max: f64, tol: f64) -> Result<SpeedLimits> {
    let rho_c = critical_rho(lambda_max)?;
    let min_c1 = |rho: f64| -> Result<f64> {
        let p = RampParameters::from_rho(rho, lambda_max)?;
        let orbit = connecting_orbit(&p, ManifoldBranch::UnstableOfSMinus)?;
        let n = 2000;
        let mut m = f64::INFINITY;
        for i in 0..=n {
            let t = C1_WINDOW.0 + (C1_WINDOW.1 - C1_WINDOW.0) * i as f64 / n as f64;
            match orbit.c1(t) {
                Ok(c) => m = m.min(c),
                Err(_) => return Ok(f64::NEG_INFINITY),
            }
        }
        Ok(m)
    };
    let (lo, hi) = bisect_predicate(|rho| Ok(min_c1(rho)? <= 0.0), 0.5 * rho_c, rho_c, tol)?;
    let c = rescaling_constants(&QuadraticFold, &LogisticRamp)?;
    let r0 = QuadraticFold.saddle_node().r0;
    // r = ρλ²/4 and ε = ρλ/4, so r = r0 + ε c_r/2 is linear in ρ.
    let half_rate = 4.0 * r0 / (lambda_max * lambda_max - 0.5 * c.c_r * lambda_max);
    Ok(SpeedLimits { min_c1_zero: 0.5 * (lo + hi), half_rate })
}

/// Scale factors mapping the system near the saddle-node onto the normal
/// form `ż = z² + r − μ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescalingConstants {
    pub c_mu: f64,
    pub c_t: f64,
    pub c_z: f64,
    pub c_r: f64,
    pub c_n: f64,
}

pub fn rescaling_constants<M: ScalarModel, G: RampProfile>(model: &M, profile: &G) -> Result<RescalingConstants> {
    let g2 = -0.5 * profile.d2gamma(profile.mu_crit());
    let r0 = model.saddle_node().r0;
    let (a0, a2) = (model.a0(), model.a2());
    let base = g2 * r0 * a0;
    if !(base > 0.0 && a2 > 0.0) {
        return Err(Error::Domain { name: "g2 r0 a0", value: base, domain: "(0, inf) with a2 > 0" });
    }
    let c_mu = 1.0 / sqrt(base * a2);
    Ok(RescalingConstants {
        c_mu,
        c_t: c_mu,
        c_z: sqrt(base / (a2 * a2 * a2)),
        c_r: sqrt(g2 * r0 / (a0 * a2)),
        c_n: sqrt(base) * pow(a2, -5.0 / 6.0),
    })
}

/// Default half-width of the normal-form window.
pub const NORMAL_FORM_HALF_WIDTH: f64 = 15.0;

/// The orbit of `dz/dμ = z² + r − μ²` that follows `z ≈ −|μ|` as `μ → −∞`.
#[derive(Debug, Clone)]
pub struct NormalFormOrbit {
    pub r: f64,
    pub half_width: f64,
    solution: Option<DenseSolution>,
    /// True when the orbit leaves along `z → +∞` before `μ = M`.
    pub escaped: bool,
}

impl NormalFormOrbit {
    /// Last `μ` at which the orbit is available.
    pub fn mu_end(&self) -> f64 {
        self.solution.as_ref().map_or(self.half_width, |s| s.t_end())
    }

    pub fn z(&self, mu: f64) -> Result<f64> {
        match &self.solution {
            None if abs(mu) <= self.half_width => Ok(mu),
            None => Err(Error::Domain { name: "mu", value: mu, domain: "[-M, M]" }),
            Some(s) => s.eval_component(mu, 0),
        }
    }

    pub fn trajectory(&self, spacing: f64) -> Trajectory {
        let n = crate::math::ceil(2.0 * self.half_width / spacing) as usize;
        let mus: Vec<f64> = (0..=n).map(|i| (-self.half_width + i as f64 * spacing).min(self.half_width)).collect();
        sample("z", &mus, |m| self.z(m))
    }

    /// Maximum of `z̃` over the window; `+∞` for escaping orbits.
    pub fn max(&self) -> f64 {
        if self.escaped {
            return f64::INFINITY;
        }
        let Some(s) = &self.solution else { return self.half_width };
        let mut m = f64::NEG_INFINITY;
        let n = 30_000;
        for i in 0..=n {
            let mu = -self.half_width + 2.0 * self.half_width * i as f64 / n as f64;
            if let Ok(z) = s.eval_component(mu, 0) {
                m = m.max(z);
            }
        }
        m
    }
}

/// Computes the globally defined normal-form orbit on `[−M, M]`.
///
/// For `r < 1` it is integrated forward from the asymptotic tail
/// `z ≈ −M − (1 − r)/(2M)` at `μ = −M`, the direction in which the lower
/// branch attracts. For `r = 1` it is `z = μ`.
pub fn normal_form_orbit(r: f64, half_width: f64) -> Result<NormalFormOrbit> {
    require(r.is_finite(), "r", "must be finite")?;
    require(half_width >= 10.0, "half_width", "must be at least 10")?;
    if r == 1.0 {
        return Ok(NormalFormOrbit { r, half_width, solution: None, escaped: false });
    }
    let m = half_width;
    let z0 = -m - (1.0 - r) / (2.0 * m);
    let ode = OdeOptions { blow_up: BLOW_UP_CAP, ..OdeOptions::with_tol(1e-12) };
    let run = integrate(|mu, z, dz| dz[0] = z[0] * z[0] + r - mu * mu, -m, &[z0], m, &ode, |_, _| false)?;
    let escaped = run.termination == Termination::BlowUp;
    Ok(NormalFormOrbit { r, half_width, solution: Some(run.solution), escaped })
}

/// Largest `r ∈ (0, 1)` for which the normal-form orbit stays below `z = 0`.
pub fn normal_form_validity_threshold(tol: f64) -> Result<f64> {
    require(tol > 0.0, "tol", "must be positive")?;
    let reaches_zero = |r: f64| -> Result<bool> { Ok(normal_form_orbit(r, NORMAL_FORM_HALF_WIDTH)?.max() >= 0.0) };
    let (lo, hi) = bisect_predicate(reaches_zero, 0.0, 1.0, tol)?;
    Ok(0.5 * (lo + hi))
}
