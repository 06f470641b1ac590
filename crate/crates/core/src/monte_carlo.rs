//! Euler–Maruyama Monte-Carlo estimates of escape probabilities and of the
//! stationary escape rate.
//!
//! Every path draws from its own ChaCha8 stream, selected by the path index
//! under a key derived from the master seed. Tallies are integer counts, so
//! splitting a run into path ranges and merging them in any order gives
//! bitwise identical estimates.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::deterministic::{connecting_orbit, ManifoldBranch};
use crate::error::{require, Error, Result};
use crate::math::{abs, round, sqrt};
use crate::ramp::RampParameters;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub n_paths: u64,
    pub dt: f64,
    pub seed: u64,
    pub x0: f64,
    pub t0: f64,
    pub t_end: f64,
    pub x_threshold: f64,
    /// Half-width of the strip around `x^u(t)`.
    pub delta: f64,
    pub cap: f64,
    pub lambda_max: f64,
    /// Spacing of the strip-exit checks.
    pub sample_dt: f64,
    /// Longest first-passage time allowed in stationary runs.
    pub horizon: f64,
    /// First-passage target for stationary runs (the unstable equilibrium).
    pub passage_target: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            dt: 1e-3,
            seed: 0,
            x0: -1.0,
            t0: -10.0,
            t_end: 10.0,
            x_threshold: 4.0,
            delta: 1.5,
            cap: 1e6,
            lambda_max: 6.0,
            sample_dt: 0.01,
            horizon: 1e5,
            passage_target: 1.0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.n_paths >= 1, "n_paths", "must be at least 1")?;
        require(self.dt.is_finite() && self.dt > 0.0, "dt", "must be positive")?;
        require(self.t_end > self.t0, "t_end", "must exceed t0")?;
        require(self.delta > 0.0, "delta", "must be positive")?;
        require(self.sample_dt >= self.dt, "sample_dt", "must be at least dt")?;
        require(self.horizon > 0.0, "horizon", "must be positive")?;
        require(self.x0.is_finite() && self.x_threshold.is_finite(), "x0/x_threshold", "must be finite")
    }

    fn n_steps(&self) -> usize {
        round((self.t_end - self.t0) / self.dt) as usize
    }
}

/// Which event counts as an escape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EscapeMethod {
    /// First crossing of `x_threshold`.
    Threshold,
    /// First exit from the strip `|x − x^u(t)| ≤ δ`.
    Strip,
}

impl EscapeMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EscapeMethod::Threshold => "MC",
            EscapeMethod::Strip => "MC-strip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeEstimate {
    pub p_hat: f64,
    /// Binomial standard error `√(p(1−p)/n)`.
    pub stderr: f64,
    pub n_paths: u64,
    pub method: EscapeMethod,
}

/// Integer tally of escaped paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EscapeTally {
    pub escaped: u64,
    pub paths: u64,
}

impl EscapeTally {
    pub fn merge(self, other: Self) -> Self {
        Self { escaped: self.escaped + other.escaped, paths: self.paths + other.paths }
    }

    pub fn estimate(&self, method: EscapeMethod) -> EscapeEstimate {
        let n = self.paths.max(1) as f64;
        let p = self.escaped as f64 / n;
        EscapeEstimate { p_hat: p, stderr: sqrt(p * (1.0 - p) / n), n_paths: self.paths, method }
    }
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn check_noise(d: f64) -> Result<f64> {
    require(d.is_finite() && d >= 0.0, "D", "must be finite and non-negative")?;
    Ok(d)
}

fn ramp_table(rho: f64, cfg: &SimulationConfig) -> Result<Vec<f64>> {
    let p = RampParameters::from_rho(rho, cfg.lambda_max)?;
    Ok((0..cfg.n_steps()).map(|i| p.lambda(cfg.t0 + i as f64 * cfg.dt)).collect())
}

/// Threshold-crossing escape probability over the full ensemble.
pub fn simulate_escape(rho: f64, d: f64, cfg: &SimulationConfig) -> Result<EscapeEstimate> {
    Ok(simulate_escape_range(rho, d, cfg, 0, cfg.n_paths)?.estimate(EscapeMethod::Threshold))
}

/// Threshold-crossing tally for paths `first..last`.
pub fn simulate_escape_range(rho: f64, d: f64, cfg: &SimulationConfig, first: u64, last: u64) -> Result<EscapeTally> {
    cfg.validate()?;
    let d = check_noise(d)?;
    let lambdas = ramp_table(rho, cfg)?;
    let sq = sqrt(2.0 * d * cfg.dt);
    let dt = cfg.dt;
    let mut tally = EscapeTally::default();
    for path in first..last {
        let mut rng = path_rng(cfg.seed, path);
        let mut x = cfg.x0;
        let mut escaped = false;
        for &l in &lambdas {
            let s = x + l;
            x += (s * s - 1.0) * dt;
            if sq > 0.0 {
                let xi: f64 = rng.sample(StandardNormal);
                x += sq * xi;
            }
            if x > cfg.x_threshold || !(abs(x) <= cfg.cap) {
                escaped = true;
                break;
            }
        }
        tally.paths += 1;
        tally.escaped += escaped as u64;
    }
    Ok(tally)
}

/// Strip-exit escape probability over the full ensemble.
pub fn strip_escape(rho: f64, d: f64, cfg: &SimulationConfig) -> Result<EscapeEstimate> {
    Ok(strip_escape_range(rho, d, cfg, 0, cfg.n_paths)?.estimate(EscapeMethod::Strip))
}

/// Strip-exit tally for paths `first..last`. The strip is centred on the
/// past stable state's connecting orbit and checked every `sample_dt`.
pub fn strip_escape_range(rho: f64, d: f64, cfg: &SimulationConfig, first: u64, last: u64) -> Result<EscapeTally> {
    cfg.validate()?;
    let d = check_noise(d)?;
    let p = RampParameters::from_rho(rho, cfg.lambda_max)?;
    let orbit = connecting_orbit(&p, ManifoldBranch::UnstableOfSMinus)?;
    let lambdas = ramp_table(rho, cfg)?;
    let every = (round(cfg.sample_dt / cfg.dt) as usize).max(1);
    let centres = (0..=lambdas.len() / every)
        .map(|k| orbit.x(cfg.t0 + (k * every) as f64 * cfg.dt))
        .collect::<Result<Vec<f64>>>()?;
    let sq = sqrt(2.0 * d * cfg.dt);
    let dt = cfg.dt;
    let mut tally = EscapeTally::default();
    for path in first..last {
        let mut rng = path_rng(cfg.seed, path);
        let mut x = cfg.x0;
        let mut escaped = false;
        for (i, &l) in lambdas.iter().enumerate() {
            let s = x + l;
            x += (s * s - 1.0) * dt;
            if sq > 0.0 {
                let xi: f64 = rng.sample(StandardNormal);
                x += sq * xi;
            }
            let step = i + 1;
            if step % every == 0 && !(abs(x - centres[step / every]) <= cfg.delta) {
                escaped = true;
                break;
            }
        }
        tally.paths += 1;
        tally.escaped += escaped as u64;
    }
    Ok(tally)
}

/// Integer tally of first-passage times, in steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PassageTally {
    pub paths: u64,
    pub censored: u64,
    pub steps: u128,
    pub steps_sq: u128,
}

impl PassageTally {
    pub fn merge(self, other: Self) -> Self {
        Self {
            paths: self.paths + other.paths,
            censored: self.censored + other.censored,
            steps: self.steps + other.steps,
            steps_sq: self.steps_sq + other.steps_sq,
        }
    }
}

/// Mean first-passage rate estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub rate: f64,
    pub mean_passage: f64,
    /// Standard error of the mean passage time.
    pub stderr_passage: f64,
    pub n_paths: u64,
}

impl PassageTally {
    pub fn estimate(&self, cfg: &SimulationConfig) -> Result<RateEstimate> {
        if self.censored > 0 || self.paths == 0 {
            return Err(Error::Timeout { censored: self.censored, horizon: cfg.horizon });
        }
        let n = self.paths as f64;
        let mean_steps = self.steps as f64 / n;
        let var_steps = (self.steps_sq as f64 / n - mean_steps * mean_steps).max(0.0);
        let mean = mean_steps * cfg.dt;
        Ok(RateEstimate {
            rate: 1.0 / mean,
            mean_passage: mean,
            stderr_passage: sqrt(var_steps / n) * cfg.dt,
            n_paths: self.paths,
        })
    }
}

/// Rate `1/E[T]` of first passage from `x0` to `passage_target` with the ramp
/// frozen at `λ = 0`.
pub fn stationary_escape_rate(d: f64, cfg: &SimulationConfig) -> Result<RateEstimate> {
    stationary_passage_range(d, cfg, 0, cfg.n_paths)?.estimate(cfg)
}

pub fn stationary_passage_range(d: f64, cfg: &SimulationConfig, first: u64, last: u64) -> Result<PassageTally> {
    cfg.validate()?;
    require(d.is_finite() && d > 0.0, "D", "must be positive")?;
    let sq = sqrt(2.0 * d * cfg.dt);
    let max_steps = (cfg.horizon / cfg.dt) as u64;
    let mut tally = PassageTally::default();
    for path in first..last {
        let mut rng = path_rng(cfg.seed, path);
        let mut x = cfg.x0;
        let mut n = 0u64;
        while x < cfg.passage_target && n < max_steps {
            let xi: f64 = rng.sample(StandardNormal);
            x += (x * x - 1.0) * cfg.dt + sq * xi;
            n += 1;
        }
        tally.paths += 1;
        if x < cfg.passage_target {
            tally.censored += 1;
        } else {
            tally.steps += n as u128;
            tally.steps_sq += (n as u128) * (n as u128);
        }
    }
    Ok(tally)
}
