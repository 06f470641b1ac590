//! Command-line interface.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use tipping_core::deterministic::{
    connecting_orbit, critical_rate_asymptotic, critical_rate_numeric, critical_speed_numeric, normal_form_orbit,
    normal_form_validity_threshold, single_mode_speed_limit, stable_manifold, unstable_manifold, ManifoldBranch,
    NORMAL_FORM_HALF_WIDTH,
};
use tipping_core::fpe::{
    co_moving, evolve_modes, instantaneous_spectrum, mode_escape_probability, quasi_stationary_density,
    solve_fpe_reference, FpeOptions, ModeOptions, SpatialGrid,
};
use tipping_core::monte_carlo::{EscapeMethod, SimulationConfig};
use tipping_core::perturbation::{rate_profile, TimeWindow};
use tipping_core::ramp::{critical_rho, equilibrium_branches, LogisticRamp, QuadraticFold, RampParameters, RampProfile};

use crate::error::{io_error, Error, Result};
use crate::format::*;
use crate::parallel::{escape_estimate, thread_pool};
use crate::sweep::{error_map, error_rows, run_sweep, smooth_grid, Method, SweepConfig, SweepGrid, DEFAULT_BANDWIDTH};

#[derive(Debug, Parser)]
#[command(name = "tipctl", version, about = "Rate-induced tipping: critical rates, escape probabilities and sweeps")]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// key=value file with default flag values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, env = "TIPCTL_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Branch {
    /// Unstable manifold of the past stable state.
    Unstable,
    /// Stable manifold of the future unstable state.
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McMethod {
    Threshold,
    Strip,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Asymptotic and numeric critical rates, and the critical ramp speed.
    CriticalRate {
        #[arg(long, default_value_t = 6.0)]
        lambda_max: f64,
        /// Ramp rates ε (comma separated).
        #[arg(long, value_delimiter = ',')]
        epsilon: Vec<f64>,
        /// Ramp speeds ρ, converted with λmax (comma separated).
        #[arg(long, value_delimiter = ',')]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Connecting orbit and its c1 coefficient.
    Orbit {
        #[arg(long, default_value_t = 0.14)]
        rho: f64,
        #[arg(long, default_value_t = 6.0)]
        lambda_max: f64,
        #[arg(long, value_enum, default_value_t = Branch::Unstable)]
        branch: Branch,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        t_min: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        t_max: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
    },
    /// Equilibrium branches and invariant manifolds in the (μ, y) plane.
    PhasePlane {
        /// Rates r (comma separated).
        #[arg(long, value_delimiter = ',', default_values_t = [0.8, 1.2])]
        r: Vec<f64>,
        #[arg(long, default_value_t = 0.21)]
        epsilon: f64,
        #[arg(long, default_value_t = 201)]
        mu_points: usize,
    },
    /// Normal-form orbits and the largest rate with a tracking orbit.
    NormalForm {
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.59, 0.7, 1.0])]
        r: Vec<f64>,
        #[arg(long, default_value_t = NORMAL_FORM_HALF_WIDTH)]
        half_width: f64,
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Monte-Carlo escape probability.
    Simulate {
        #[arg(long, default_value_t = 0.14)]
        rho: f64,
        #[arg(long = "D", default_value_t = 0.06)]
        d: f64,
        #[arg(long, default_value_t = 10_000)]
        paths: u64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = McMethod::Threshold)]
        method: McMethod,
        #[arg(long, default_value_t = 1.5)]
        delta: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, default_value_t = 4.0)]
        threshold: f64,
        #[arg(long, default_value_t = 6.0)]
        lambda_max: f64,
    },
    /// Reference and n-mode densities at selected times.
    Density {
        #[arg(long, default_value_t = 0.14)]
        rho: f64,
        #[arg(long = "D", default_value_t = 0.06)]
        d: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 3])]
        modes: Vec<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 1.0, 2.0])]
        times: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        n_points: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Instantaneous eigenvalues.
    Spectrum {
        #[arg(long, default_value_t = 0.14)]
        rho: f64,
        #[arg(long = "D", default_value_t = 0.06)]
        d: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-10.0, 0.0, 1.0, 2.0])]
        times: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 2000)]
        n_points: usize,
    },
    /// Mode, eigenvalue and flux escape probabilities for one (ρ, D).
    Probability {
        #[arg(long, default_value_t = 0.14)]
        rho: f64,
        #[arg(long = "D", default_value_t = 0.06)]
        d: f64,
        #[arg(long, default_value_t = 3)]
        modes: usize,
        #[arg(long, default_value_t = 2000)]
        n_points: usize,
        #[arg(long, default_value_t = 2001)]
        n_time: usize,
        /// Also write γ₁(t) and J(t).
        #[arg(long)]
        profile: bool,
    },
    /// Escape probabilities over a (ρ, D) grid.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = ["MC".to_string(), "M1".into(), "M3".into(), "PP".into(), "PJ".into()])]
        methods: Vec<String>,
        /// Use the full region ρ ∈ [0.005, 0.165] instead of [0.01, 0.14].
        #[arg(long)]
        full: bool,
        #[arg(long)]
        rho_min: Option<f64>,
        #[arg(long)]
        rho_max: Option<f64>,
        #[arg(long)]
        rho_step: Option<f64>,
        #[arg(long = "D-min")]
        d_min: Option<f64>,
        #[arg(long = "D-max")]
        d_max: Option<f64>,
        #[arg(long = "D-step")]
        d_step: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        paths: u64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Start Monte-Carlo paths on the orbit x^u(t0) of each ρ instead of x0 = −1.
        #[arg(long)]
        orbit_start: bool,
        #[arg(long, default_value_t = 2000)]
        n_points: usize,
        #[arg(long, default_value_t = 2001)]
        n_time: usize,
        /// Gaussian smoothing of the Monte-Carlo map, in grid cells.
        #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
        bandwidth: f64,
    },
}

/// Files of one run; removed again unless the run completes.
struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), done: false })
    }

    fn write<R: Record>(&mut self, name: &str, comments: &[String], rows: &[R]) -> Result<()> {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        write_file(&path, comments, rows)
    }

    fn finish(mut self) -> Vec<PathBuf> {
        self.done = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.done {
            for f in &self.files {
                let _ = fs::remove_file(f);
            }
        }
    }
}

/// What a run produced.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

fn time_tag(t: f64) -> String {
    fmt_f64(t)
}

fn arg_err(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument { name, reason: reason.into() }
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<Report> {
    let mut out = Outputs::new(&cli.out)?;
    let mut summary = Vec::new();
    match &cli.command {
        Command::CriticalRate { lambda_max, epsilon, rho, tol } => {
            let mut eps: Vec<f64> = epsilon.clone();
            eps.extend(rho.iter().map(|r| r * lambda_max / 4.0));
            if eps.is_empty() {
                eps = vec![0.01, 0.02, 0.05, 0.1, 0.21, 0.25];
            }
            let mut rows = Vec::new();
            for e in eps {
                let asym = critical_rate_asymptotic(&QuadraticFold, &LogisticRamp, e)?;
                let num = critical_rate_numeric(&QuadraticFold, &LogisticRamp, e, *tol)?;
                rows.push(CriticalRateRow {
                    epsilon: e,
                    rho: 4.0 * e / lambda_max,
                    r_c_asymptotic: asym,
                    r_c_numeric: num.r_c,
                    bracket: num.bracket.1 - num.bracket.0,
                });
            }
            out.write("critical_rate.csv", &[format!("lambda_max={lambda_max}")], &rows)?;
            let rho_c = critical_rho(*lambda_max)?;
            let (lo, hi) = critical_speed_numeric(*lambda_max, 1e-6)?;
            let limits = single_mode_speed_limit(*lambda_max, 1e-5)?;
            let speed = CriticalSpeedRow {
                lambda_max: *lambda_max,
                rho_c,
                rho_c_numeric: 0.5 * (lo + hi),
                rho_max_c1: limits.min_c1_zero,
                rho_max_rate: limits.half_rate,
            };
            out.write("critical_speed.csv", &[], &[speed])?;
            summary.push(format!("rho_c={rho_c:.6}"));
            summary.push(format!("rho_c_numeric={:.6}", speed.rho_c_numeric));
        }
        Command::Orbit { rho, lambda_max, branch, t_min, t_max, dt } => {
            if !(t_max > t_min && *dt > 0.0) {
                return Err(arg_err("t-max", "need t-max > t-min and dt > 0"));
            }
            let p = RampParameters::from_rho(*rho, *lambda_max)?;
            let b = match branch {
                Branch::Unstable => ManifoldBranch::UnstableOfSMinus,
                Branch::Stable => ManifoldBranch::StableOfUPlus,
            };
            let orbit = connecting_orbit(&p, b)?;
            let n = ((t_max - t_min) / dt).round() as usize;
            let mut rows = Vec::new();
            for i in 0..=n {
                let t = ((t_min + i as f64 * dt) * 1e9).round() / 1e9;
                match (orbit.x(t), orbit.c1(t)) {
                    (Ok(x), Ok(c1)) => rows.push(OrbitRow { t, x, c1 }),
                    _ => {
                        summary.push(format!("orbit truncated at t={t}"));
                        break;
                    }
                }
            }
            out.write("orbit.csv", &[format!("rho={rho} lambda_max={lambda_max} branch={branch:?}")], &rows)?;
        }
        Command::PhasePlane { r, epsilon, mu_points } => {
            if *mu_points < 2 {
                return Err(arg_err("mu-points", "must be at least 2"));
            }
            let mut rows = Vec::new();
            for &rv in r {
                for i in 0..*mu_points {
                    let mu = i as f64 / (*mu_points - 1) as f64;
                    let br = equilibrium_branches(rv * LogisticRamp.gamma(mu));
                    if let (Some(s), Some(u)) = (br.stable(), br.unstable()) {
                        rows.push(PhaseRow { curve: format!("stable-branch r={rv}"), mu, y: s });
                        rows.push(PhaseRow { curve: format!("unstable-branch r={rv}"), mu, y: u });
                    }
                }
                let (wu, regime) = unstable_manifold(&QuadraticFold, &LogisticRamp, *epsilon, rv)?;
                for (mu, y) in wu.mu.iter().zip(&wu.y) {
                    rows.push(PhaseRow { curve: format!("unstable-manifold r={rv}"), mu: *mu, y: *y });
                }
                let ws = stable_manifold(&QuadraticFold, &LogisticRamp, *epsilon, rv)?;
                for (mu, y) in ws.mu.iter().zip(&ws.y) {
                    rows.push(PhaseRow { curve: format!("stable-manifold r={rv}"), mu: *mu, y: *y });
                }
                summary.push(format!("r={rv}: {regime:?}"));
            }
            out.write("phase_plane.csv", &[format!("epsilon={epsilon}")], &rows)?;
        }
        Command::NormalForm { r, half_width, spacing, tol } => {
            let mut rows = Vec::new();
            for &rv in r {
                let orbit = normal_form_orbit(rv, *half_width)?;
                let tr = orbit.trajectory(*spacing);
                rows.extend(tr.times.iter().zip(&tr.values).map(|(mu, z)| NormalFormRow { r: rv, mu: *mu, z: *z }));
            }
            out.write("normal_form.csv", &[format!("half_width={half_width}")], &rows)?;
            let r_star = normal_form_validity_threshold(*tol)?;
            out.write("normal_form_threshold.csv", &[], &[ThresholdRow { r_star, tol: *tol }])?;
            summary.push(format!("r_star={r_star:.4}"));
        }
        Command::Simulate { rho, d, paths, dt, method, delta, x0, threshold, lambda_max } => {
            let cfg = SimulationConfig {
                n_paths: *paths,
                dt: *dt,
                seed: cli.seed,
                x0: *x0,
                x_threshold: *threshold,
                delta: *delta,
                lambda_max: *lambda_max,
                ..SimulationConfig::default()
            };
            let m = match method {
                McMethod::Threshold => EscapeMethod::Threshold,
                McMethod::Strip => EscapeMethod::Strip,
            };
            let pool = thread_pool(cli.threads)?;
            let est = escape_estimate(&pool, *rho, *d, &cfg, m)?;
            let row = SimulationRow {
                rho: *rho,
                d: *d,
                p: est.p_hat,
                stderr: est.stderr,
                n_paths: est.n_paths,
                method: m.as_str().to_string(),
            };
            out.write("simulate.csv", &[format!("seed={}", cli.seed)], &[row])?;
            summary.push(format!("p={:.4} stderr={:.4}", est.p_hat, est.stderr));
        }
        Command::Density { rho, d, modes, times, n_points, dt } => {
            let grid = SpatialGrid::new(1.5, *n_points)?;
            let land = co_moving(*rho, 6.0)?;
            let window = TimeWindow::default();
            let t_end = times.iter().cloned().fold(window.t0 + *dt, f64::max);
            if times.iter().any(|t| *t < window.t0) {
                return Err(arg_err("times", "must not precede t0 = -10"));
            }
            let p0 = quasi_stationary_density(&land, window.t0, *d, &grid)?;
            let reference = solve_fpe_reference(
                &land,
                *d,
                &grid,
                &FpeOptions { t_end, dt: *dt, snapshot_times: times.clone(), ..FpeOptions::default() },
                &p0,
            )?;
            let ys = grid.points();
            let rows_of = |p: &[f64]| ys.iter().zip(p).map(|(y, p)| DensityRow { y: *y, p: *p }).collect::<Vec<_>>();
            for s in &reference.snapshots {
                out.write(&format!("density_reference_t{}.csv", time_tag(s.t)), &[format!("t={}", s.t)], &rows_of(&s.density))?;
            }
            for &n in modes {
                let opts = ModeOptions { t_end, snapshot_times: times.clone(), ..ModeOptions::default() };
                let ev = evolve_modes(&land, *d, n, &grid, &opts, &p0)?;
                for s in &ev.snapshots {
                    out.write(&format!("density_m{n}_t{}.csv", time_tag(s.t)), &[format!("t={} modes={n}", s.t)], &rows_of(&s.density))?;
                }
            }
        }
        Command::Spectrum { rho, d, times, count, n_points } => {
            let grid = SpatialGrid::new(1.5, *n_points)?;
            let land = co_moving(*rho, 6.0)?;
            let mut rows = Vec::new();
            for &t in times {
                let s = instantaneous_spectrum(&land, t, *d, *count, &grid)?;
                rows.extend(s.gammas.iter().enumerate().map(|(k, g)| SpectrumRow { t, k: (k + 1) as f64, gamma: *g }));
            }
            out.write("spectrum.csv", &[format!("rho={rho} D={d}")], &rows)?;
        }
        Command::Probability { rho, d, modes, n_points, n_time, profile } => {
            let grid = SpatialGrid::new(1.5, *n_points)?;
            let land = co_moving(*rho, 6.0)?;
            let window = TimeWindow { n_time: *n_time, ..TimeWindow::default() };
            let rates = rate_profile(&land, *d, &grid, &window)?;
            let p0 = quasi_stationary_density(&land, window.t0, *d, &grid)?;
            let opts = ModeOptions { t0: window.t0, t_end: window.t_end, ..ModeOptions::default() };
            let p_m = mode_escape_probability(&land, *d, *modes, &grid, &opts, &p0)?;
            let row = ProbabilityRow { rho: *rho, d: *d, p_m, p_p: rates.escape_eigen(), p_j: rates.escape_flux() };
            out.write("probability.csv", &[format!("modes={modes}")], &[row])?;
            if *profile {
                let rows: Vec<RateRow> = (0..rates.t.len())
                    .map(|i| RateRow { t: rates.t[i], gamma1: rates.gamma1[i], flux: rates.flux[i] })
                    .collect();
                out.write("rates.csv", &[format!("rho={rho} D={d}")], &rows)?;
            }
            summary.push(format!("P_M={p_m:.4} P_P={:.4} P_J={:.4}", row.p_p, row.p_j));
        }
        Command::Sweep {
            methods,
            full,
            rho_min,
            rho_max,
            rho_step,
            d_min,
            d_max,
            d_step,
            paths,
            dt,
            orbit_start,
            n_points,
            n_time,
            bandwidth,
        } => {
            let methods = methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
            let base = if *full { SweepGrid::full(methods.clone())? } else { SweepGrid::restricted(methods.clone())? };
            let rho_values = crate::sweep::stepped(
                rho_min.unwrap_or(base.rho_values[0]),
                rho_max.unwrap_or(*base.rho_values.last().expect("non-empty")),
                rho_step.unwrap_or(0.005),
            )?;
            let d_values = crate::sweep::stepped(
                d_min.unwrap_or(base.d_values[0]),
                d_max.unwrap_or(*base.d_values.last().expect("non-empty")),
                d_step.unwrap_or(0.005),
            )?;
            let grid = SweepGrid::new(rho_values, d_values, methods)?;
            let cfg = SweepConfig {
                sim: SimulationConfig { n_paths: *paths, dt: *dt, seed: cli.seed, ..SimulationConfig::default() },
                grid: SpatialGrid::new(1.5, *n_points)?,
                window: TimeWindow { n_time: *n_time, ..TimeWindow::default() },
                orbit_start: *orbit_start,
                ..SweepConfig::default()
            };
            let pool = thread_pool(cli.threads)?;
            let result = run_sweep(&grid, &cfg, &pool);
            for &m in &grid.methods {
                out.write(&format!("sweep_{m}.csv"), &result.provenance, &result.rows(m))?;
            }
            if grid.methods.contains(&Method::Mc) {
                for &m in grid.methods.iter().filter(|m| **m != Method::Mc) {
                    match error_map(&result, m, Method::Mc) {
                        Ok(e) => out.write(&format!("error_{m}.csv"), &result.provenance, &error_rows(&result, &e))?,
                        Err(e) => summary.push(format!("no error map for {m}: {e}")),
                    }
                }
                match result.matrix(Method::Mc) {
                    Ok(raw) => {
                        let sm = smooth_grid(&raw, *bandwidth)?;
                        let mut rows = Vec::new();
                        for (i, row) in sm.iter().enumerate() {
                            for (j, p) in row.iter().enumerate() {
                                rows.push(SweepRow {
                                    rho: result.rho_values[i],
                                    d: result.d_values[j],
                                    p: Some(*p),
                                    stderr: None,
                                    flag: String::new(),
                                });
                            }
                        }
                        let mut comments = result.provenance.clone();
                        comments.push(format!("bandwidth={bandwidth}"));
                        out.write("sweep_MC_smoothed.csv", &comments, &rows)?;
                    }
                    Err(e) => summary.push(format!("no smoothed map: {e}")),
                }
            }
            let failed = result.cells.values().filter(|v| v.p.is_err()).count();
            summary.push(format!(
                "{} cells x {} methods, {failed} failed",
                grid.rho_values.len() * grid.d_values.len(),
                grid.methods.len()
            ));
        }
    }
    Ok(Report { files: out.finish(), summary })
}
