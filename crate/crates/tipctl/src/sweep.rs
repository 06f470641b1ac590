//! `(ρ, D)` parameter sweeps over all escape estimators.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rayon::ThreadPool;
use tipping_core::deterministic::ConnectingOrbit;
use tipping_core::fpe::{co_moving, mode_escape_probability, quasi_stationary_density, CoMoving, ModeOptions, SpatialGrid};
use tipping_core::monte_carlo::{simulate_escape, SimulationConfig};
use tipping_core::perturbation::{rate_profile, TimeWindow};

use crate::error::{Error, Result};
use crate::format::{ErrorRow, SweepRow};

/// Escape estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Monte-Carlo reference.
    Mc,
    /// Single-mode Galerkin evolution.
    M1,
    /// Three-mode Galerkin evolution.
    M3,
    /// Leading eigenvalue formula.
    Pp,
    /// Probability flux.
    Pj,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Mc, Method::M1, Method::M3, Method::Pp, Method::Pj];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mc => "MC",
            Method::M1 => "M1",
            Method::M3 => "M3",
            Method::Pp => "PP",
            Method::Pj => "PJ",
        }
    }

    /// Single-mode methods are flagged beyond this speed.
    pub fn has_validity_limit(self) -> bool {
        matches!(self, Method::M1 | Method::Pp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument { name: "method", reason: format!("unknown method {s:?}") })
    }
}

/// Largest `ρ` at which single-mode estimates are trusted.
pub const SINGLE_MODE_RHO_MAX: f64 = 0.14;

pub const OUTSIDE_VALIDITY: &str = "outside-validity";

/// `start, start + step, …` up to `stop`, rounded to clean decimals.
pub fn stepped(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(Error::InvalidArgument { name: "range", reason: format!("{start}..{stop} step {step}") });
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub rho_values: Vec<f64>,
    pub d_values: Vec<f64>,
    pub methods: Vec<Method>,
}

impl SweepGrid {
    pub fn new(rho_values: Vec<f64>, d_values: Vec<f64>, mut methods: Vec<Method>) -> Result<Self> {
        let ascending = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        let bad = |name, reason: &str| Err(Error::InvalidArgument { name, reason: reason.into() });
        if rho_values.is_empty() || !ascending(&rho_values) || rho_values.iter().any(|r| r.is_nan() || *r < 0.0) {
            return bad("rho", "values must be non-negative and strictly ascending");
        }
        methods.sort();
        methods.dedup();
        if methods.is_empty() {
            return bad("methods", "at least one method is required");
        }
        let needs_noise = methods.iter().any(|m| *m != Method::Mc);
        let floor_ok = d_values.iter().all(|d| if needs_noise { *d > 0.0 } else { *d >= 0.0 });
        if d_values.is_empty() || !ascending(&d_values) || !floor_ok {
            return bad("D", "values must be strictly ascending, and positive for density methods");
        }
        Ok(Self { rho_values, d_values, methods })
    }

    /// `ρ ∈ [0.005, 0.165]`, `D ∈ [0.05, 0.2]`, both in steps of 0.005.
    pub fn full(methods: Vec<Method>) -> Result<Self> {
        Self::new(stepped(0.005, 0.165, 0.005)?, stepped(0.05, 0.2, 0.005)?, methods)
    }

    /// `ρ ∈ [0.01, 0.14]`, `D ∈ [0.05, 0.2]`, both in steps of 0.005.
    pub fn restricted(methods: Vec<Method>) -> Result<Self> {
        Self::new(stepped(0.01, 0.14, 0.005)?, stepped(0.05, 0.2, 0.005)?, methods)
    }

    pub fn cells(&self) -> Vec<(usize, usize)> {
        (0..self.rho_values.len()).flat_map(|i| (0..self.d_values.len()).map(move |j| (i, j))).collect()
    }
}

/// Settings shared by all cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Monte-Carlo settings; `seed` is the base seed.
    pub sim: SimulationConfig,
    pub grid: SpatialGrid,
    pub window: TimeWindow,
    pub mode_refresh_dt: f64,
    pub mode_tol: f64,
    /// Start Monte-Carlo paths on the orbit `x^u(t0)` of each ρ instead of `sim.x0`.
    pub orbit_start: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let m = ModeOptions::default();
        Self {
            sim: SimulationConfig::default(),
            grid: SpatialGrid::default(),
            window: TimeWindow::default(),
            mode_refresh_dt: m.refresh_dt,
            mode_tol: m.tol,
            orbit_start: false,
        }
    }
}

/// One method's value in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellValue {
    pub p: std::result::Result<f64, String>,
    pub stderr: Option<f64>,
    pub outside_validity: bool,
}

impl CellValue {
    pub fn value(&self) -> Option<f64> {
        self.p.as_ref().ok().copied()
    }

    fn flag(&self) -> String {
        match (&self.p, self.outside_validity) {
            (Err(e), _) => format!("error: {e}"),
            (Ok(_), true) => OUTSIDE_VALIDITY.to_string(),
            (Ok(_), false) => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rho_values: Vec<f64>,
    pub d_values: Vec<f64>,
    pub cells: BTreeMap<(usize, usize, Method), CellValue>,
    pub seed: u64,
    pub provenance: Vec<String>,
}

impl SweepResult {
    pub fn get(&self, i: usize, j: usize, method: Method) -> Option<&CellValue> {
        self.cells.get(&(i, j, method))
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.cells.keys().map(|k| k.2).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn rows(&self, method: Method) -> Vec<SweepRow> {
        self.cells
            .iter()
            .filter(|(k, _)| k.2 == method)
            .map(|(&(i, j, _), v)| SweepRow {
                rho: self.rho_values[i],
                d: self.d_values[j],
                p: v.value(),
                stderr: v.stderr,
                flag: v.flag(),
            })
            .collect()
    }

    /// Values as a `ρ × D` matrix.
    pub fn matrix(&self, method: Method) -> Result<Vec<Vec<f64>>> {
        let mut out = vec![vec![0.0; self.d_values.len()]; self.rho_values.len()];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.value(i, j, method)?;
            }
        }
        Ok(out)
    }

    fn value(&self, i: usize, j: usize, method: Method) -> Result<f64> {
        self.get(i, j, method).and_then(CellValue::value).ok_or_else(|| Error::MissingCell {
            method: method.to_string(),
            rho: self.rho_values[i],
            d: self.d_values[j],
        })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the Monte-Carlo ensemble of one cell, fixed by the base seed and
/// the cell's parameters alone.
pub fn cell_seed(seed: u64, rho: f64, d: f64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ rho.to_bits()) ^ d.to_bits())
}

type Landscape = CoMoving<ConnectingOrbit>;
type Cell = (usize, usize);

fn compute_cell(
    land: &std::result::Result<Landscape, String>,
    rho: f64,
    d: f64,
    methods: &[Method],
    cfg: &SweepConfig,
) -> Vec<(Method, CellValue)> {
    let flagged = |m: Method| m.has_validity_limit() && rho > SINGLE_MODE_RHO_MAX + 1e-12;
    let wrap = |m: Method, p: std::result::Result<f64, String>, stderr: Option<f64>| {
        (m, CellValue { p, stderr, outside_validity: flagged(m) })
    };
    let mut out = Vec::with_capacity(methods.len());
    let needs_rates = methods.iter().any(|m| matches!(m, Method::Pp | Method::Pj));
    let rates = if needs_rates {
        Some(land.clone().and_then(|l| rate_profile(&l, d, &cfg.grid, &cfg.window).map_err(|e| e.to_string())))
    } else {
        None
    };
    let initial = if methods.iter().any(|m| matches!(m, Method::M1 | Method::M3)) {
        Some(land.clone().and_then(|l| {
            quasi_stationary_density(&l, cfg.window.t0, d, &cfg.grid).map_err(|e| e.to_string())
        }))
    } else {
        None
    };
    for &m in methods {
        match m {
            Method::Mc => {
                let x0 = match land {
                    Ok(l) if cfg.orbit_start => l.c1.x(cfg.sim.t0).map_err(|e| e.to_string()),
                    Err(e) if cfg.orbit_start => Err(e.clone()),
                    _ => Ok(cfg.sim.x0),
                };
                let sim = x0.map(|x0| SimulationConfig { seed: cell_seed(cfg.sim.seed, rho, d), x0, ..cfg.sim });
                match sim.and_then(|sim| simulate_escape(rho, d, &sim).map_err(|e| e.to_string())) {
                    Ok(e) => out.push(wrap(m, Ok(e.p_hat), Some(e.stderr))),
                    Err(e) => out.push(wrap(m, Err(e), None)),
                }
            }
            Method::Pp | Method::Pj => {
                let p = match rates.as_ref().expect("computed above") {
                    Ok(r) if m == Method::Pp => Ok(r.escape_eigen()),
                    Ok(r) => Ok(r.escape_flux()),
                    Err(e) => Err(e.clone()),
                };
                out.push(wrap(m, p, None));
            }
            Method::M1 | Method::M3 => {
                let n = if m == Method::M1 { 1 } else { 3 };
                let opts = ModeOptions {
                    t0: cfg.window.t0,
                    t_end: cfg.window.t_end,
                    refresh_dt: cfg.mode_refresh_dt,
                    tol: cfg.mode_tol,
                    ..ModeOptions::default()
                };
                let p = match (land, initial.as_ref().expect("computed above")) {
                    (Ok(l), Ok(p0)) => mode_escape_probability(l, d, n, &cfg.grid, &opts, p0).map_err(|e| e.to_string()),
                    (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                };
                out.push(wrap(m, p, None));
            }
        }
    }
    out
}

/// Runs every cell of `grid`.
pub fn run_sweep(grid: &SweepGrid, cfg: &SweepConfig, pool: &ThreadPool) -> SweepResult {
    run_cells(grid, cfg, pool, &grid.cells())
}

/// Runs the listed cells in the given order. The result does not depend on
/// the order or on the number of threads.
pub fn run_cells(grid: &SweepGrid, cfg: &SweepConfig, pool: &ThreadPool, cells: &[(usize, usize)]) -> SweepResult {
    let density = cfg.orbit_start || grid.methods.iter().any(|m| *m != Method::Mc);
    let landscapes: Vec<std::result::Result<Landscape, String>> = pool.install(|| {
        grid.rho_values
            .par_iter()
            .map(|&rho| {
                if density {
                    co_moving(rho, cfg.sim.lambda_max).map_err(|e| e.to_string())
                } else {
                    Err("not needed".to_string())
                }
            })
            .collect()
    });
    let computed: Vec<(Cell, Vec<(Method, CellValue)>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, j)| {
                let v = compute_cell(&landscapes[i], grid.rho_values[i], grid.d_values[j], &grid.methods, cfg);
                ((i, j), v)
            })
            .collect()
    });
    let mut map = BTreeMap::new();
    for ((i, j), values) in computed {
        for (m, v) in values {
            map.insert((i, j, m), v);
        }
    }
    SweepResult {
        rho_values: grid.rho_values.clone(),
        d_values: grid.d_values.clone(),
        cells: map,
        seed: cfg.sim.seed,
        provenance: vec![
            format!("seed={}", cfg.sim.seed),
            format!(
                "n_paths={} dt={} x0={}",
                cfg.sim.n_paths,
                cfg.sim.dt,
                if cfg.orbit_start { "orbit".to_string() } else { cfg.sim.x0.to_string() }
            ),
            format!("n_points={} delta={}", cfg.grid.n_points, cfg.grid.delta),
            format!("n_time={} window={}..{}", cfg.window.n_time, cfg.window.t0, cfg.window.t_end),
            format!("version={}", env!("CARGO_PKG_VERSION")),
        ],
    }
}

/// Signed error `100·(P_method − P_reference)` per cell, in percentage points.
pub fn error_map(result: &SweepResult, method: Method, reference: Method) -> Result<BTreeMap<(usize, usize), f64>> {
    let mut out = BTreeMap::new();
    for i in 0..result.rho_values.len() {
        for j in 0..result.d_values.len() {
            let a = result.value(i, j, method)?;
            let b = result.value(i, j, reference)?;
            out.insert((i, j), 100.0 * (a - b));
        }
    }
    Ok(out)
}

pub fn error_rows(result: &SweepResult, errors: &BTreeMap<(usize, usize), f64>) -> Vec<ErrorRow> {
    errors
        .iter()
        .map(|(&(i, j), &e)| ErrorRow { rho: result.rho_values[i], d: result.d_values[j], err_pp: e })
        .collect()
}

/// Default smoothing bandwidth in grid cells.
pub const DEFAULT_BANDWIDTH: f64 = 1.0;

fn reflect(mut k: isize, n: isize) -> usize {
    // Half-sample symmetric: … b a | a b c … c b a | a …
    loop {
        if k < 0 {
            k = -k - 1;
        } else if k >= n {
            k = 2 * n - k - 1;
        } else {
            return k as usize;
        }
    }
}

fn kernel(bandwidth: f64) -> Vec<f64> {
    let radius = (4.0 * bandwidth).ceil() as isize;
    let w: Vec<f64> = (-radius..=radius).map(|k| (-0.5 * (k as f64 / bandwidth).powi(2)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn smooth_line(v: &[f64], w: &[f64]) -> Vec<f64> {
    let n = v.len() as isize;
    let r = (w.len() / 2) as isize;
    (0..n).map(|i| w.iter().enumerate().map(|(k, wk)| wk * v[reflect(i + k as isize - r, n)]).sum()).collect()
}

/// Separable Gaussian smoothing with standard deviation `bandwidth` cells.
/// Bandwidth 0 returns the map unchanged.
pub fn smooth_grid(map: &[Vec<f64>], bandwidth: f64) -> Result<Vec<Vec<f64>>> {
    if !(bandwidth >= 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument { name: "bandwidth", reason: "must be finite and non-negative".into() });
    }
    if bandwidth == 0.0 || map.is_empty() {
        return Ok(map.to_vec());
    }
    let w = kernel(bandwidth);
    let rows: Vec<Vec<f64>> = map.iter().map(|r| smooth_line(r, &w)).collect();
    let cols = rows[0].len();
    let mut out = rows.clone();
    for j in 0..cols {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        for (i, x) in smooth_line(&col, &w).into_iter().enumerate() {
            out[i][j] = x;
        }
    }
    Ok(out)
}

/// Sum of absolute differences between horizontally and vertically adjacent cells.
pub fn total_variation(map: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (i, row) in map.iter().enumerate() {
        for j in 0..row.len() {
            if j + 1 < row.len() {
                s += (row[j + 1] - row[j]).abs();
            }
            if i + 1 < map.len() {
                s += (map[i + 1][j] - row[j]).abs();
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("M2".parse::<Method>().is_err());
    }

    #[test]
    fn default_grids() {
        let full = SweepGrid::full(vec![Method::Mc]).unwrap();
        assert_eq!(full.rho_values.len(), 33);
        assert_eq!(full.d_values.len(), 31);
        assert_eq!(*full.rho_values.last().unwrap(), 0.165);
        let r = SweepGrid::restricted(vec![Method::Pp]).unwrap();
        assert_eq!(r.rho_values.first(), Some(&0.01));
        assert_eq!(r.rho_values.last(), Some(&0.14));
    }

    #[test]
    fn grid_validation() {
        assert!(SweepGrid::new(vec![0.1, 0.05], vec![0.1], vec![Method::Mc]).is_err());
        assert!(SweepGrid::new(vec![-0.1], vec![0.1], vec![Method::Mc]).is_err());
        assert!(SweepGrid::new(vec![0.1], vec![0.0], vec![Method::Pj]).is_err());
        assert!(SweepGrid::new(vec![0.1], vec![0.0], vec![Method::Mc]).is_ok());
    }

    #[test]
    fn reflect_indices() {
        let v: Vec<usize> = (-3..7).map(|k| reflect(k, 4)).collect();
        assert_eq!(v, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(-9, 2), 0);
    }

    #[test]
    fn seeds_depend_on_cell_only() {
        assert_eq!(cell_seed(3, 0.1, 0.05), cell_seed(3, 0.1, 0.05));
        assert_ne!(cell_seed(3, 0.1, 0.05), cell_seed(3, 0.05, 0.1));
        assert_ne!(cell_seed(3, 0.1, 0.05), cell_seed(4, 0.1, 0.05));
    }
}
