//! Density-based description of the co-moving Fokker–Planck equation
//!
//! ```text
//! ∂P/∂t = ∂/∂y (U'(y, t) P) + D ∂²P/∂y²,   P(±δ, t) = 0,
//! ```
//!
//! on a uniform grid of interior points. The operator is discretised with
//! exponentially fitted fluxes, `A[i, i±1] = (D/h²)·exp((U[i±1] − U[i])/2D)`,
//! which is exactly similar to the symmetric tridiagonal matrix
//! `H = S⁻¹AS`, `S = diag(exp(−U/2D))`, with constant off-diagonal `D/h²`.
//! The discrete stationary density `exp(−U/D)` is preserved exactly and
//! reflecting ends conserve `h·ΣP` exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::deterministic::{connecting_orbit, ConnectingOrbit, ManifoldBranch};
use crate::error::{require, Error, Result};
use crate::math::{abs, exp, round};
use crate::ode::{integrate, OdeOptions};
use crate::perturbation::NestedProfiles;
use crate::ramp::{RampParameters, ScalarModel};
use crate::tridiag::largest_eigenpairs;

/// Uniform grid of interior points on `(−δ, δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub delta: f64,
    pub n_points: usize,
    pub spacing: f64,
}

impl SpatialGrid {
    pub fn new(delta: f64, n_points: usize) -> Result<Self> {
        require(delta.is_finite() && delta > 0.0, "delta", "must be positive")?;
        require(n_points >= 3, "n_points", "must be at least 3")?;
        Ok(Self { delta, n_points, spacing: 2.0 * delta / (n_points + 1) as f64 })
    }

    /// Interior point `i`, `0 ≤ i < n_points`.
    pub fn point(&self, i: usize) -> f64 {
        -self.delta + (i + 1) as f64 * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Interior points together with both boundary nodes.
    pub fn nodes(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_points + 2);
        v.push(-self.delta);
        v.extend((0..self.n_points).map(|i| self.point(i)));
        v.push(self.delta);
        v
    }

    /// `h·Σ f` over interior values, the trapezoid rule with zero boundary values.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.spacing * f.iter().sum::<f64>()
    }
}

impl Default for SpatialGrid {
    fn default() -> Self {
        Self::new(1.5, 2000).expect("default grid is valid")
    }
}

/// Time-dependent coefficient `c1(t)` of the co-moving drift.
pub trait C1Source {
    fn c1(&self, t: f64) -> Result<f64>;
}

impl<M: ScalarModel> C1Source for ConnectingOrbit<M> {
    fn c1(&self, t: f64) -> Result<f64> {
        ConnectingOrbit::c1(self, t)
    }
}

/// A fixed `c1`, i.e. a frozen ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantC1(pub f64);

impl C1Source for ConstantC1 {
    fn c1(&self, _t: f64) -> Result<f64> {
        Ok(self.0)
    }
}

/// A potential `U(y, t)` with drift `−∂U/∂y`.
pub trait Landscape {
    fn potential(&self, y: f64, t: f64) -> Result<f64>;
    fn drift(&self, y: f64, t: f64) -> Result<f64>;

    /// `U` at every node of `grid`, boundaries included.
    fn potential_nodes(&self, grid: &SpatialGrid, t: f64) -> Result<Vec<f64>> {
        grid.nodes().into_iter().map(|y| self.potential(y, t)).collect()
    }
}

/// Prototype in the frame co-moving with `x^u(t)`: `U = c1 y²/2 − y³/3`.
#[derive(Debug, Clone)]
pub struct CoMoving<C> {
    pub c1: C,
}

impl<C: C1Source> Landscape for CoMoving<C> {
    fn potential(&self, y: f64, t: f64) -> Result<f64> {
        let c = self.c1.c1(t)?;
        Ok(c * y * y / 2.0 - y * y * y / 3.0)
    }

    fn drift(&self, y: f64, t: f64) -> Result<f64> {
        Ok(y * y - self.c1.c1(t)? * y)
    }

    fn potential_nodes(&self, grid: &SpatialGrid, t: f64) -> Result<Vec<f64>> {
        let c = self.c1.c1(t)?;
        Ok(grid.nodes().into_iter().map(|y| c * y * y / 2.0 - y * y * y / 3.0).collect())
    }
}

/// Prototype in a frame shifted by `x^u(t)` but with the frozen landscape
/// `f(y + x^u + λ)`: `U = y − (y − c1/2)³/3`.
#[derive(Debug, Clone)]
pub struct Frozen<C> {
    pub c1: C,
}

impl<C: C1Source> Landscape for Frozen<C> {
    fn potential(&self, y: f64, t: f64) -> Result<f64> {
        let s = y - 0.5 * self.c1.c1(t)?;
        Ok(y - s * s * s / 3.0)
    }

    fn drift(&self, y: f64, t: f64) -> Result<f64> {
        let s = y - 0.5 * self.c1.c1(t)?;
        Ok(s * s - 1.0)
    }
}

/// `U ≡ 0`: pure diffusion, for checks against the Dirichlet Laplacian.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Flat;

impl Landscape for Flat {
    fn potential(&self, _y: f64, _t: f64) -> Result<f64> {
        Ok(0.0)
    }
    fn drift(&self, _y: f64, _t: f64) -> Result<f64> {
        Ok(0.0)
    }
}

/// Co-moving landscape of the prototype ramp `(ρ, λmax)`.
pub fn co_moving(rho: f64, lambda_max: f64) -> Result<CoMoving<ConnectingOrbit>> {
    let p = RampParameters::from_rho(rho, lambda_max)?;
    Ok(CoMoving { c1: connecting_orbit(&p, ManifoldBranch::UnstableOfSMinus)? })
}

/// Frozen-frame landscape of the prototype ramp `(ρ, λmax)`.
pub fn frozen(rho: f64, lambda_max: f64) -> Result<Frozen<ConnectingOrbit>> {
    let p = RampParameters::from_rho(rho, lambda_max)?;
    Ok(Frozen { c1: connecting_orbit(&p, ManifoldBranch::UnstableOfSMinus)? })
}

/// Drift `y² − c1(t)·y` of the prototype in the co-moving frame.
pub fn effective_drift<C: C1Source>(c1: &C, y: f64, t: f64) -> Result<f64> {
    Ok(y * y - c1.c1(t)? * y)
}

/// Trapezoid quadrature of `w·v·exp(U/D)` with zero boundary values.
/// `log_weight` holds `U/D` on the interior points.
pub fn weighted_inner_product(w: &[f64], v: &[f64], log_weight: &[f64], grid: &SpatialGrid) -> f64 {
    let m = log_weight.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let s: f64 = w.iter().zip(v).zip(log_weight).map(|((a, b), u)| a * b * exp(u - m)).sum();
    grid.spacing * s * exp(m)
}

fn log_weights(u_nodes: &[f64], d: f64) -> Vec<f64> {
    u_nodes[1..u_nodes.len() - 1].iter().map(|u| u / d).collect()
}

/// Boundary treatment for the reference solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Absorbing ends, `P(±δ) = 0`.
    Dirichlet,
    /// Zero-flux ends.
    Reflecting,
}

/// Tridiagonal generator `A` (columns sum to zero in the interior).
#[derive(Debug, Clone)]
struct Generator {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

fn generator(u_nodes: &[f64], d: f64, h: f64, bc: Boundary) -> Generator {
    let n = u_nodes.len() - 2;
    let k = d / (h * h);
    let e = |from: usize, to: usize| exp((u_nodes[from] - u_nodes[to]) / (2.0 * d));
    let mut diag = vec![0.0; n];
    let mut sub = vec![0.0; n - 1];
    let mut sup = vec![0.0; n - 1];
    for i in 0..n {
        let node = i + 1;
        let left = if i == 0 && bc == Boundary::Reflecting { 0.0 } else { e(node, node - 1) };
        let right = if i == n - 1 && bc == Boundary::Reflecting { 0.0 } else { e(node, node + 1) };
        diag[i] = -k * (left + right);
        if i + 1 < n {
            sup[i] = k * e(node + 1, node);
            sub[i] = k * e(node, node + 1);
        }
    }
    Generator { sub, diag, sup }
}

/// Diagonal of the symmetric form `H`; its off-diagonal is `D/h²`.
fn symmetric_diagonal(u_nodes: &[f64], d: f64, h: f64) -> Vec<f64> {
    generator(u_nodes, d, h, Boundary::Dirichlet).diag
}

/// Symmetric tridiagonal form of the operator at `t`: `(diagonal, off-diagonal)`.
pub fn symmetric_operator<L: Landscape>(landscape: &L, t: f64, d: f64, grid: &SpatialGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    require(d.is_finite() && d > 0.0, "D", "must be positive")?;
    let u = landscape.potential_nodes(grid, t)?;
    let h = grid.spacing;
    Ok((symmetric_diagonal(&u, d, h), vec![d / (h * h); grid.n_points - 1]))
}

/// Shift of `γ_n` when the grid is refined to `2·n_points + 1` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionCheck {
    pub gamma_n: f64,
    pub refined: f64,
    pub converged: bool,
}

/// Largest tolerated shift of `γ_n` under grid refinement.
pub const RESOLUTION_TOL: f64 = 1e-6;

pub fn check_resolution<L: Landscape>(landscape: &L, t: f64, d: f64, n: usize, grid: &SpatialGrid) -> Result<ResolutionCheck> {
    let coarse = instantaneous_spectrum(landscape, t, d, n, grid)?;
    let fine_grid = SpatialGrid::new(grid.delta, 2 * grid.n_points + 1)?;
    let fine = instantaneous_spectrum(landscape, t, d, n, &fine_grid)?;
    let (a, b) = (coarse.gammas[n - 1], fine.gammas[n - 1]);
    Ok(ResolutionCheck { gamma_n: a, refined: b, converged: abs(a - b) <= RESOLUTION_TOL })
}

/// How the eigenvector signs were fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignConvention {
    /// Positive at the grid minimum of `U`.
    WellPositive,
    /// Overlap with the previous time's eigenvectors is positive.
    Aligned,
}

/// Leading eigenpairs of the Fokker–Planck operator at one time.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub t: f64,
    pub d: f64,
    pub grid: SpatialGrid,
    /// `γ₁ ≥ γ₂ ≥ …`.
    pub gammas: Vec<f64>,
    pub sign: SignConvention,
    /// Symmetric-frame eigenvectors, `h·Σψ_kψ_j = δ_kj`.
    psi: Vec<Vec<f64>>,
    /// `U/D` on the interior points.
    log_weight: Vec<f64>,
}

impl EigenDecomposition {
    pub fn n_modes(&self) -> usize {
        self.gammas.len()
    }

    pub fn log_weight(&self) -> &[f64] {
        &self.log_weight
    }

    pub fn psi(&self, k: usize) -> &[f64] {
        &self.psi[k]
    }

    /// Eigenfunction `v_k = exp(−U/2D)·ψ_k` on the interior points.
    pub fn mode(&self, k: usize) -> Vec<f64> {
        self.psi[k].iter().zip(&self.log_weight).map(|(p, u)| p * exp(-0.5 * u)).collect()
    }

    /// `∫ v_k dy`.
    pub fn mode_mass(&self, k: usize) -> f64 {
        self.grid.integrate(&self.mode(k))
    }

    /// Gram matrix under the weighted inner product.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let modes: Vec<Vec<f64>> = (0..self.n_modes()).map(|k| self.mode(k)).collect();
        modes
            .iter()
            .map(|a| modes.iter().map(|b| weighted_inner_product(a, b, &self.log_weight, &self.grid)).collect())
            .collect()
    }

    /// `⟨v_k(self.t), v_i(other.t)⟩` under the weight at `self.t`.
    pub fn cross_product(&self, k: usize, other: &Self, i: usize) -> f64 {
        let s: f64 = self.psi[k]
            .iter()
            .zip(&other.psi[i])
            .zip(self.log_weight.iter().zip(&other.log_weight))
            .map(|((a, b), (u, w))| a * b * exp(0.5 * (u - w)))
            .sum();
        self.grid.spacing * s
    }

    /// Flips signs so each mode overlaps positively with `prev`.
    pub fn align_to(&mut self, prev: &Self) -> Result<()> {
        for k in 0..self.n_modes().min(prev.n_modes()) {
            let o = self.cross_product(k, prev, k);
            if !(abs(o) >= 0.5) {
                return Err(Error::SignAlignment { mode: k + 1, t: self.t, overlap: o });
            }
            if o < 0.0 {
                for x in self.psi[k].iter_mut() {
                    *x = -*x;
                }
            }
        }
        self.sign = SignConvention::Aligned;
        Ok(())
    }
}

/// Top `n` eigenpairs of the operator at time `t`, signs fixed by positivity
/// at the well minimum.
pub fn instantaneous_spectrum<L: Landscape>(
    landscape: &L,
    t: f64,
    d: f64,
    n: usize,
    grid: &SpatialGrid,
) -> Result<EigenDecomposition> {
    require(d.is_finite() && d > 0.0, "D", "must be positive")?;
    let u = landscape.potential_nodes(grid, t)?;
    spectrum_from_potential(&u, t, d, n, grid)
}

fn spectrum_from_potential(u: &[f64], t: f64, d: f64, n: usize, grid: &SpatialGrid) -> Result<EigenDecomposition> {
    let h = grid.spacing;
    let diag = symmetric_diagonal(u, d, h);
    if diag.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow("symmetrised operator"));
    }
    let off = vec![d / (h * h); grid.n_points - 1];
    let (gammas, vectors) = largest_eigenpairs(&diag, &off, n)?;
    let log_weight = log_weights(u, d);
    let well = (0..grid.n_points)
        .min_by(|&a, &b| log_weight[a].partial_cmp(&log_weight[b]).unwrap_or(core::cmp::Ordering::Equal))
        .unwrap_or(0);
    let scale = 1.0 / crate::math::sqrt(h);
    let psi = vectors
        .into_iter()
        .map(|v| {
            let s = if v[well] < 0.0 { -scale } else { scale };
            v.into_iter().map(|x| x * s).collect()
        })
        .collect();
    Ok(EigenDecomposition { t, d, grid: *grid, gammas, sign: SignConvention::WellPositive, psi, log_weight })
}

/// Row-major `n×n` matrix of `⟨v_k, ∂v_i/∂t⟩` by central differences.
pub fn coupling_matrix(prev: &EigenDecomposition, cur: &EigenDecomposition, next: &EigenDecomposition) -> Result<Vec<f64>> {
    let n = cur.n_modes();
    for k in 0..n {
        for other in [prev, next] {
            let o = cur.cross_product(k, other, k);
            if !(o >= 0.5) {
                return Err(Error::SignAlignment { mode: k + 1, t: other.t, overlap: o });
            }
        }
    }
    let dt = next.t - prev.t;
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        for i in 0..n {
            c[k * n + i] = (cur.cross_product(k, next, i) - cur.cross_product(k, prev, i)) / dt;
        }
    }
    Ok(c)
}

/// Couplings at `t` from spectra at `t − Δt`, `t`, `t + Δt`.
pub fn coupling_coefficients<L: Landscape>(
    landscape: &L,
    t: f64,
    dt: f64,
    d: f64,
    n: usize,
    grid: &SpatialGrid,
) -> Result<Vec<f64>> {
    require(dt > 0.0, "dt", "must be positive")?;
    let prev = instantaneous_spectrum(landscape, t - dt, d, n, grid)?;
    let mut cur = instantaneous_spectrum(landscape, t, d, n, grid)?;
    cur.align_to(&prev)?;
    let mut next = instantaneous_spectrum(landscape, t + dt, d, n, grid)?;
    next.align_to(&cur)?;
    coupling_matrix(&prev, &cur, &next)
}

/// Settings for [`evolve_modes`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOptions {
    pub t0: f64,
    pub t_end: f64,
    /// Spacing of the spectrum refresh grid.
    pub refresh_dt: f64,
    pub tol: f64,
    /// When false the coupling term is dropped.
    pub couple: bool,
    /// Times at which to reconstruct the density (rounded to the refresh grid).
    pub snapshot_times: Vec<f64>,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self { t0: -10.0, t_end: 10.0, refresh_dt: 0.01, tol: 1e-10, couple: true, snapshot_times: Vec::new() }
    }
}

/// Mode amplitudes at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub t: f64,
    pub a: Vec<f64>,
}

/// Density reconstructed at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySnapshot {
    pub t: f64,
    pub density: Vec<f64>,
}

/// Result of [`evolve_modes`].
#[derive(Debug, Clone)]
pub struct ModeEvolution {
    pub states: Vec<ModeState>,
    pub gammas: Vec<Vec<f64>>,
    /// Row-major coupling matrices at the refresh nodes.
    pub couplings: Vec<Vec<f64>>,
    pub snapshots: Vec<DensitySnapshot>,
    /// `∫ P_n(y, T_end) dy`.
    pub final_mass: f64,
}

fn reconstruct(spec: &EigenDecomposition, a: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; spec.grid.n_points];
    for (k, ak) in a.iter().enumerate() {
        for (x, v) in p.iter_mut().zip(spec.mode(k)) {
            *x += ak * v;
        }
    }
    p
}

/// Evolves the `n`-mode Galerkin amplitudes
/// `ȧ_k = γ_k a_k − Σ_i ⟨v_k, v̇_i⟩ a_i` from the projection of `initial`.
pub fn evolve_modes<L: Landscape>(
    landscape: &L,
    d: f64,
    n: usize,
    grid: &SpatialGrid,
    opts: &ModeOptions,
    initial: &[f64],
) -> Result<ModeEvolution> {
    require(opts.t_end > opts.t0, "t_end", "must exceed t0")?;
    require(opts.refresh_dt > 0.0, "refresh_dt", "must be positive")?;
    require(initial.len() == grid.n_points, "initial", "must match the grid")?;
    let dt = opts.refresh_dt;
    let n_nodes = round((opts.t_end - opts.t0) / dt) as usize;
    let node_t = |j: isize| opts.t0 + j as f64 * dt;
    let snap_nodes: Vec<usize> = opts
        .snapshot_times
        .iter()
        .map(|&s| round((s - opts.t0) / dt).clamp(0.0, n_nodes as f64) as usize)
        .collect();

    let prev = instantaneous_spectrum(landscape, node_t(-1), d, n, grid)?;
    let mut cur = instantaneous_spectrum(landscape, node_t(0), d, n, grid)?;
    cur.align_to(&prev)?;
    let mut next = instantaneous_spectrum(landscape, node_t(1), d, n, grid)?;
    next.align_to(&cur)?;

    let matrix = |prev: &EigenDecomposition, cur: &EigenDecomposition, next: &EigenDecomposition| -> Result<Vec<f64>> {
        let mut m = if opts.couple { coupling_matrix(prev, cur, next)? } else { vec![0.0; n * n] };
        for x in m.iter_mut() {
            *x = -*x;
        }
        for k in 0..n {
            m[k * n + k] += cur.gammas[k];
        }
        Ok(m)
    };

    let mut a: Vec<f64> = (0..n).map(|k| weighted_inner_product(&cur.mode(k), initial, &cur.log_weight, grid)).collect();
    let mut out = ModeEvolution {
        states: Vec::with_capacity(n_nodes + 1),
        gammas: Vec::with_capacity(n_nodes + 1),
        couplings: Vec::with_capacity(n_nodes + 1),
        snapshots: Vec::new(),
        final_mass: 0.0,
    };
    let mut m_cur = matrix(&prev, &cur, &next)?;
    let mut prev = prev;
    let ode = OdeOptions { rtol: opts.tol, atol: opts.tol * 1e-6, ..OdeOptions::default() };

    for j in 0..=n_nodes {
        out.states.push(ModeState { t: node_t(j as isize), a: a.clone() });
        out.gammas.push(cur.gammas.clone());
        let mut c = m_cur.clone();
        for (idx, x) in c.iter_mut().enumerate() {
            *x = -*x;
            if idx % (n + 1) == 0 {
                *x += cur.gammas[idx / (n + 1)];
            }
        }
        out.couplings.push(c);
        for (s, &node) in snap_nodes.iter().enumerate() {
            if node == j {
                out.snapshots.push(DensitySnapshot { t: opts.snapshot_times[s], density: reconstruct(&cur, &a) });
            }
        }
        if j == n_nodes {
            out.final_mass = (0..n).map(|k| a[k] * cur.mode_mass(k)).sum();
            break;
        }
        let mut after = instantaneous_spectrum(landscape, node_t(j as isize + 2), d, n, grid)?;
        after.align_to(&next)?;
        let m_next = matrix(&cur, &next, &after)?;
        let (t_a, t_b) = (node_t(j as isize), node_t(j as isize + 1));
        let run = integrate(
            |t, y, dy| {
                let w = (t - t_a) / (t_b - t_a);
                for k in 0..n {
                    let mut s = 0.0;
                    for i in 0..n {
                        s += ((1.0 - w) * m_cur[k * n + i] + w * m_next[k * n + i]) * y[i];
                    }
                    dy[k] = s;
                }
            },
            t_a,
            &a,
            t_b,
            &ode,
            |_, _| false,
        )?;
        a.copy_from_slice(run.solution.final_state());
        prev = core::mem::replace(&mut cur, next);
        next = after;
        m_cur = m_next;
    }
    let _ = prev;
    Ok(out)
}

/// Outflow `−D ∂P/∂y` at `y = δ` for a density vanishing there, one-sided
/// second-order difference.
pub fn boundary_flux(density: &[f64], d: f64, grid: &SpatialGrid) -> f64 {
    let n = density.len();
    d * (4.0 * density[n - 1] - density[n - 2]) / (2.0 * grid.spacing)
}

/// Largest negative escape probability tolerated before it is an error.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// `P_M = 1 − ∫ P_n(y, T_end) dy` for the `n`-mode reconstruction.
pub fn mode_escape_probability<L: Landscape>(
    landscape: &L,
    d: f64,
    n: usize,
    grid: &SpatialGrid,
    opts: &ModeOptions,
    initial: &[f64],
) -> Result<f64> {
    let ev = evolve_modes(landscape, d, n, grid, opts, initial)?;
    escape_from_mass(ev.final_mass)
}

pub(crate) fn escape_from_mass(mass: f64) -> Result<f64> {
    let p = 1.0 - mass;
    if p < -NEGATIVE_TOLERANCE || !p.is_finite() {
        return Err(Error::Domain { name: "escape probability", value: p, domain: "[0, 1]" });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Settings for [`solve_fpe_reference`].
#[derive(Debug, Clone, PartialEq)]
pub struct FpeOptions {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub boundary: Boundary,
    pub snapshot_times: Vec<f64>,
}

impl Default for FpeOptions {
    fn default() -> Self {
        Self { t0: -10.0, t_end: 10.0, dt: 1e-3, boundary: Boundary::Dirichlet, snapshot_times: Vec::new() }
    }
}

/// A step whose mass grew by more than `1e-10` under absorbing ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassIncrease {
    pub t: f64,
    pub increase: f64,
}

#[derive(Debug, Clone)]
pub struct FpeSolution {
    pub snapshots: Vec<DensitySnapshot>,
    pub final_density: Vec<f64>,
    pub initial_mass: f64,
    pub final_mass: f64,
    /// `1 − final mass`.
    pub escaped: f64,
    pub warnings: Vec<MassIncrease>,
}

/// Crank–Nicolson solution of the co-moving Fokker–Planck equation.
pub fn solve_fpe_reference<L: Landscape>(
    landscape: &L,
    d: f64,
    grid: &SpatialGrid,
    opts: &FpeOptions,
    initial: &[f64],
) -> Result<FpeSolution> {
    require(d.is_finite() && d > 0.0, "D", "must be positive")?;
    require(opts.t_end > opts.t0, "t_end", "must exceed t0")?;
    require(opts.dt > 0.0, "dt", "must be positive")?;
    require(initial.len() == grid.n_points, "initial", "must match the grid")?;
    let n = grid.n_points;
    let h = grid.spacing;
    let steps = round((opts.t_end - opts.t0) / opts.dt) as usize;
    let dt = (opts.t_end - opts.t0) / steps as f64;
    let snap_steps: Vec<usize> =
        opts.snapshot_times.iter().map(|&s| round((s - opts.t0) / dt).clamp(0.0, steps as f64) as usize).collect();

    let mut p = initial.to_vec();
    let initial_mass = grid.integrate(&p);
    let mut mass = initial_mass;
    let mut a_old = generator(&landscape.potential_nodes(grid, opts.t0)?, d, h, opts.boundary);
    let mut sol = FpeSolution {
        snapshots: Vec::new(),
        final_density: Vec::new(),
        initial_mass,
        final_mass: 0.0,
        escaped: 0.0,
        warnings: Vec::new(),
    };
    let mut rhs = vec![0.0; n];
    let mut c_prime = vec![0.0; n];
    for step in 0..=steps {
        for (s, &k) in snap_steps.iter().enumerate() {
            if k == step {
                sol.snapshots.push(DensitySnapshot { t: opts.snapshot_times[s], density: p.clone() });
            }
        }
        if step == steps {
            break;
        }
        let t_new = opts.t0 + (step + 1) as f64 * dt;
        let a_new = generator(&landscape.potential_nodes(grid, t_new)?, d, h, opts.boundary);
        // rhs = (I + dt/2 A_old) p
        for i in 0..n {
            let mut v = p[i] + 0.5 * dt * a_old.diag[i] * p[i];
            if i > 0 {
                v += 0.5 * dt * a_old.sub[i - 1] * p[i - 1];
            }
            if i + 1 < n {
                v += 0.5 * dt * a_old.sup[i] * p[i + 1];
            }
            rhs[i] = v;
        }
        // (I − dt/2 A_new) p_new = rhs, Thomas algorithm (diagonally dominant).
        let lower = |i: usize| -0.5 * dt * a_new.sub[i - 1];
        let upper = |i: usize| -0.5 * dt * a_new.sup[i];
        let diag = |i: usize| 1.0 - 0.5 * dt * a_new.diag[i];
        c_prime[0] = if n > 1 { upper(0) / diag(0) } else { 0.0 };
        rhs[0] /= diag(0);
        for i in 1..n {
            let denom = diag(i) - lower(i) * c_prime[i - 1];
            if i + 1 < n {
                c_prime[i] = upper(i) / denom;
            }
            rhs[i] = (rhs[i] - lower(i) * rhs[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= c_prime[i] * rhs[i + 1];
        }
        core::mem::swap(&mut p, &mut rhs);
        let new_mass = grid.integrate(&p);
        if opts.boundary == Boundary::Dirichlet && new_mass - mass > 1e-10 {
            sol.warnings.push(MassIncrease { t: t_new, increase: new_mass - mass });
        }
        mass = new_mass;
        a_old = a_new;
    }
    sol.final_mass = mass;
    sol.escaped = 1.0 - mass;
    sol.final_density = p;
    Ok(sol)
}

/// Quasi-stationary density `P_* ∝ p·p₂` on the interior points, with unit
/// integral at `t`.
pub fn quasi_stationary_density<L: Landscape>(landscape: &L, t: f64, d: f64, grid: &SpatialGrid) -> Result<Vec<f64>> {
    let prof = NestedProfiles::new(landscape, t, d, grid)?;
    Ok(prof.quasi_stationary())
}

/// Quasi-stationary density at `t` normalised at `t0` and scaled by the
/// linear decay `1 − (t − t0)κ`.
pub fn quasi_stationary_density_decaying<L: Landscape>(
    landscape: &L,
    t0: f64,
    t: f64,
    d: f64,
    kappa: f64,
    grid: &SpatialGrid,
) -> Result<Vec<f64>> {
    let at_t0 = NestedProfiles::new(landscape, t0, d, grid)?;
    let at_t = NestedProfiles::new(landscape, t, d, grid)?;
    let ratio = at_t.ln_mass() - at_t0.ln_mass();
    let factor = (1.0 - (t - t0) * kappa) * exp(ratio);
    Ok(at_t.quasi_stationary().into_iter().map(|x| x * factor).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = SpatialGrid::new(1.5, 2).err();
        assert!(g.is_some());
        let g = SpatialGrid::new(1.5, 5).unwrap();
        assert_eq!(g.spacing, 0.5);
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.nodes().len(), 7);
    }

    #[test]
    fn symmetric_form_is_similar_to_generator() {
        // S⁻¹ A S must have off-diagonals exactly D/h² up to rounding.
        let g = SpatialGrid::new(1.5, 50).unwrap();
        let land = CoMoving { c1: ConstantC1(1.3) };
        let u = land.potential_nodes(&g, 0.0).unwrap();
        let d = 0.1;
        let a = generator(&u, d, g.spacing, Boundary::Dirichlet);
        let k = d / (g.spacing * g.spacing);
        for i in 0..g.n_points - 1 {
            let s = exp((u[i + 2] - u[i + 1]) / (2.0 * d));
            assert!((a.sup[i] / s - k).abs() < 1e-12 * k);
            assert!((a.sub[i] * s - k).abs() < 1e-12 * k);
        }
    }

    #[test]
    fn stationary_density_is_discrete_equilibrium() {
        // A·exp(−U/D) vanishes in the interior away from the absorbing ends.
        let g = SpatialGrid::new(1.5, 200).unwrap();
        let land = CoMoving { c1: ConstantC1(2.0) };
        let u = land.potential_nodes(&g, 0.0).unwrap();
        let d = 0.2;
        let a = generator(&u, d, g.spacing, Boundary::Reflecting);
        let p: Vec<f64> = u[1..=g.n_points].iter().map(|x| exp(-x / d)).collect();
        for i in 1..g.n_points - 1 {
            let r = a.sub[i - 1] * p[i - 1] + a.diag[i] * p[i] + a.sup[i] * p[i + 1];
            assert!(r.abs() < 1e-9 * (a.diag[i] * p[i]).abs());
        }
    }

    #[test]
    fn escape_clamp() {
        assert_eq!(escape_from_mass(1.0 + 1e-12).unwrap(), 0.0);
        assert!(escape_from_mass(1.0 + 1e-6).is_err());
        assert_eq!(escape_from_mass(0.75).unwrap(), 0.25);
    }
}
