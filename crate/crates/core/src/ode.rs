//! Adaptive Dormand–Prince 5(4) integration with continuous output.
//!
//! Supports forward and backward integration, a blow-up cap, and an optional
//! stop predicate checked after each accepted step.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, pow, sqrt};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed |h|.
    pub h_max: f64,
    pub max_steps: usize,
    /// Any component with magnitude above this ends the integration.
    pub blow_up: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_max: f64::INFINITY, max_steps: 2_000_000, blow_up: 1e6 }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol * 1e-2, ..Self::default() }
    }
}

/// Why an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    Stopped,
    BlowUp,
}

/// Piecewise quartic continuous extension of an integration.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    dir: f64,
    /// Node times, one more than the number of steps.
    t: Vec<f64>,
    /// States at the nodes.
    y: Vec<f64>,
    /// Five coefficient blocks of length `dim` per step.
    cont: Vec<f64>,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Lower and upper ends of the covered interval.
    pub fn span(&self) -> (f64, f64) {
        let (a, b) = (self.t_start(), self.t_end());
        if a <= b { (a, b) } else { (b, a) }
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = self.span();
        t >= a && t <= b
    }

    pub fn n_steps(&self) -> usize {
        self.t.len() - 1
    }

    pub fn node_times(&self) -> &[f64] {
        &self.t
    }

    pub fn node_state(&self, i: usize) -> &[f64] {
        &self.y[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.node_state(self.t.len() - 1)
    }

    /// Evaluates the state at `t`, which must lie in the covered span.
    pub fn eval(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if !self.contains(t) {
            let (a, b) = self.span();
            let available = if t < a { a } else { b };
            return Err(Error::OrbitTruncated { available, requested: t });
        }
        let n = self.n_steps();
        if n == 0 {
            out.copy_from_slice(self.node_state(0));
            return Ok(());
        }
        let s = self.dir * t;
        // Last node whose (direction-adjusted) time is <= s.
        let k = self.t.partition_point(|&ti| self.dir * ti <= s).clamp(1, n) - 1;
        let h = self.t[k + 1] - self.t[k];
        let theta = (t - self.t[k]) / h;
        let theta1 = 1.0 - theta;
        let d = self.dim;
        let c = &self.cont[5 * d * k..5 * d * (k + 1)];
        for i in 0..d {
            out[i] = c[i]
                + theta * (c[d + i] + theta1 * (c[2 * d + i] + theta * (c[3 * d + i] + theta1 * c[4 * d + i])));
        }
        Ok(())
    }

    /// Evaluates component `i` at `t`.
    pub fn eval_component(&self, t: f64, i: usize) -> Result<f64> {
        let mut buf = vec![0.0; self.dim];
        self.eval(t, &mut buf)?;
        Ok(buf[i])
    }
}

/// Result of [`integrate`].
#[derive(Debug, Clone)]
pub struct Integration {
    pub solution: DenseSolution,
    pub termination: Termination,
}

fn norm(y: &[f64], scale: &[f64]) -> f64 {
    let s: f64 = y.iter().zip(scale).map(|(a, b)| (a / b) * (a / b)).sum();
    sqrt(s / y.len() as f64)
}

/// Integrates `dy/dt = field(t, y)` from `t0` to `t_end` (either direction).
///
/// `stop(t, y)` is evaluated after each accepted step; returning `true` ends
/// the integration with [`Termination::Stopped`]. Exceeding the blow-up cap
/// ends it with [`Termination::BlowUp`]; the partial solution is kept.
pub fn integrate<F, S>(mut field: F, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions, mut stop: S) -> Result<Integration>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    let dim = y0.len();
    if dim == 0 || !(t0.is_finite() && t_end.is_finite()) || y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter { name: "y0/t", reason: "must be finite and non-empty" });
    }
    if t_end == t0 {
        return Err(Error::InvalidParameter { name: "t_end", reason: "must differ from t_start" });
    }
    let dir = if t_end > t0 { 1.0 } else { -1.0 };
    let mut sol = DenseSolution { dim, dir, t: vec![t0], y: y0.to_vec(), cont: Vec::new() };

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut scale = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    field(t0, &y, &mut k1);
    let mut t = t0;
    let mut h = dir * initial_step(&mut field, t0, &y, &k1, dir, opts).min(abs(t_end - t0)).min(opts.h_max);
    let mut reject = false;

    for _ in 0..opts.max_steps {
        if dir * (t + h - t_end) > 0.0 {
            h = t_end - t;
        }
        let h_floor = 1e-14 * (1.0 + abs(t));
        if abs(h) < h_floor {
            return Err(Error::StepUnderflow { t, h });
        }

        for i in 0..dim {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        field(t + C2 * h, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        field(t + C3 * h, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        field(t + C4 * h, &tmp, &mut k4);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        field(t + C5 * h, &tmp, &mut k5);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        field(t + h, &tmp, &mut k6);
        for i in 0..dim {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        field(t + h, &y_new, &mut k7);
        for i in 0..dim {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            scale[i] = opts.atol + opts.rtol * abs(y[i]).max(abs(y_new[i]));
        }
        let mut e = norm(&err, &scale);
        if !e.is_finite() {
            e = 1e10;
        }

        if e <= 1.0 {
            let t_new = t + h;
            for i in 0..dim {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                tmp[i] = bspl;
            }
            sol.cont.extend_from_slice(&y);
            for i in 0..dim {
                sol.cont.push(y_new[i] - y[i]);
            }
            sol.cont.extend_from_slice(&tmp);
            for i in 0..dim {
                sol.cont.push(y_new[i] - y[i] - h * k7[i] - tmp[i]);
            }
            for i in 0..dim {
                sol.cont.push(h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]));
            }
            sol.t.push(t_new);
            sol.y.extend_from_slice(&y_new);
            t = t_new;
            y.copy_from_slice(&y_new);
            k1.copy_from_slice(&k7);

            if y.iter().any(|v| !(abs(*v) <= opts.blow_up)) {
                return Ok(Integration { solution: sol, termination: Termination::BlowUp });
            }
            if stop(t, &y) {
                return Ok(Integration { solution: sol, termination: Termination::Stopped });
            }
            if t == t_end {
                return Ok(Integration { solution: sol, termination: Termination::Completed });
            }
            let mut fac = (0.9 * pow(e.max(1e-10), -0.2)).clamp(0.2, 10.0);
            if reject {
                fac = fac.min(1.0);
            }
            reject = false;
            h = dir * (abs(h) * fac).min(opts.h_max);
        } else {
            reject = true;
            let fac = (0.9 * pow(e, -0.2)).clamp(0.1, 0.9);
            h *= fac;
        }
    }
    Err(Error::NoConvergence { what: "ODE integration (max steps)", iterations: opts.max_steps })
}

fn initial_step<F: FnMut(f64, &[f64], &mut [f64])>(
    field: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    opts: &OdeOptions,
) -> f64 {
    let dim = y0.len();
    let scale: Vec<f64> = y0.iter().map(|v| opts.atol + opts.rtol * abs(*v)).collect();
    let d0 = norm(y0, &scale);
    let d1 = norm(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = (0..dim).map(|i| y0[i] + dir * h0 * f0[i]).collect();
    let mut f1 = vec![0.0; dim];
    field(t0 + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = (0..dim).map(|i| f1[i] - f0[i]).collect();
    let d2 = norm(&diff, &scale) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { pow(0.01 / d1.max(d2), 0.2) };
    let h = (100.0 * h0).min(h1);
    if h.is_finite() && h > 0.0 { h } else { 1e-6 }
}

/// A sampled scalar trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// True when the integration stopped before the last requested time.
    pub truncated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A failed scalar integration together with the samples obtained before it
/// failed.
#[derive(Debug, Clone)]
pub struct PartialTrajectory {
    pub error: Error,
    pub trajectory: Trajectory,
}

/// Integrates a scalar ODE and samples the dense output at `samples`
/// (sorted in the direction of integration).
#[allow(clippy::result_large_err)]
pub fn integrate_ode<F>(
    mut field: F,
    y_start: f64,
    t_start: f64,
    t_end: f64,
    tol: f64,
    samples: &[f64],
) -> core::result::Result<Trajectory, PartialTrajectory>
where
    F: FnMut(f64, f64) -> f64,
{
    let empty = |error| PartialTrajectory {
        error,
        trajectory: Trajectory { label: String::from("y"), times: Vec::new(), values: Vec::new(), truncated: true },
    };
    if !(tol > 0.0) {
        return Err(empty(Error::InvalidParameter { name: "tol", reason: "must be positive" }));
    }
    let opts = OdeOptions::with_tol(tol);
    let run = integrate(|t, y, dy| dy[0] = field(t, y[0]), t_start, &[y_start], t_end, &opts, |_, _| false)
        .map_err(empty)?;
    let sol = &run.solution;
    let mut traj = Trajectory { label: String::from("y"), times: Vec::new(), values: Vec::new(), truncated: false };
    let mut buf = [0.0];
    for &s in samples {
        if sol.eval(s, &mut buf).is_err() {
            traj.truncated = true;
            break;
        }
        traj.times.push(s);
        traj.values.push(buf[0]);
    }
    if run.termination == Termination::BlowUp {
        traj.truncated = true;
        return Err(PartialTrajectory { error: Error::BlowUp { t: sol.t_end() }, trajectory: traj });
    }
    Ok(traj)
}
