use std::f64::consts::PI;

use tipping_core::fpe::*;
use tipping_core::Error;

const D: f64 = 0.06;
const RHO: f64 = 0.14;

fn headline() -> CoMoving<tipping_core::deterministic::ConnectingOrbit> {
    co_moving(RHO, 6.0).unwrap()
}

fn initial<L: Landscape>(land: &L, d: f64, grid: &SpatialGrid) -> Vec<f64> {
    quasi_stationary_density(land, -10.0, d, grid).unwrap()
}

fn l1(a: &[f64], b: &[f64], grid: &SpatialGrid) -> f64 {
    grid.spacing * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[test]
fn drift_vanishes_on_orbit_and_tends_to_frozen_form() {
    let land = headline();
    for t in [-10.0, -3.0, 0.0, 4.0, 10.0] {
        assert_eq!(effective_drift(&land.c1, 0.0, t).unwrap(), 0.0);
    }
    for t in [-10.0, 10.0] {
        for y in [-1.0, 0.5, 1.2] {
            let f = effective_drift(&land.c1, y, t).unwrap();
            assert!((f - (y * y - 2.0 * y)).abs() < 1.5e-2 * y.abs());
            assert!((land.drift(y, t).unwrap() - f).abs() < 1e-14);
        }
    }
    // Mid-ramp above the critical speed the orbit sits on a hill top.
    let fast = co_moving(0.16, 6.0).unwrap();
    let p = tipping_core::ramp::RampParameters::from_rho(0.16, 6.0).unwrap();
    let times: Vec<f64> = (0..=400).map(|i| -10.0 + 0.05 * i as f64).collect();
    let t = tipping_core::deterministic::c1_profile(&p, &times).unwrap().t_at_min;
    let h = 1e-4;
    let curvature =
        (fast.potential(h, t).unwrap() - 2.0 * fast.potential(0.0, t).unwrap() + fast.potential(-h, t).unwrap()) / (h * h);
    assert!(curvature < 0.0);
    assert!((curvature - C1Source::c1(&fast.c1, t).unwrap()).abs() < 1e-6);
}

#[test]
fn drift_is_minus_potential_gradient() {
    let land = headline();
    let h = 1e-5;
    for t in [-5.0, 0.0, 2.0] {
        for y in [-1.2, -0.3, 0.4, 1.1] {
            let num = -(land.potential(y + h, t).unwrap() - land.potential(y - h, t).unwrap()) / (2.0 * h);
            assert!((num - land.drift(y, t).unwrap()).abs() < 1e-8);
            let fz = Frozen { c1: ConstantC1(1.7) };
            let num = -(fz.potential(y + h, t).unwrap() - fz.potential(y - h, t).unwrap()) / (2.0 * h);
            assert!((num - fz.drift(y, t).unwrap()).abs() < 1e-8);
        }
    }
}

#[test]
fn inner_product_flat_and_symmetric() {
    let g = SpatialGrid::new(1.5, 200).unwrap();
    let w: Vec<f64> = g.points().iter().map(|y| (1.0 - y * y).max(0.0)).collect();
    let v: Vec<f64> = g.points().iter().map(|y| y.cos()).collect();
    let zero = vec![0.0; g.n_points];
    let plain = g.spacing * w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
    assert!((weighted_inner_product(&w, &v, &zero, &g) - plain).abs() < 1e-14);
    let lw: Vec<f64> = g.points().iter().map(|y| 40.0 * y * y * y).collect();
    assert_eq!(weighted_inner_product(&w, &v, &lw, &g), weighted_inner_product(&v, &w, &lw, &g));
}

#[test]
fn leading_mode_normalised() {
    let g = SpatialGrid::default();
    let s = instantaneous_spectrum(&headline(), 0.0, D, 1, &g).unwrap();
    let v = s.mode(0);
    assert!((weighted_inner_product(&v, &v, s.log_weight(), &g) - 1.0).abs() < 1e-10);
}

#[test]
fn flat_spectrum_is_dirichlet_laplacian() {
    let g = SpatialGrid::default();
    let s = instantaneous_spectrum(&Flat, 0.0, D, 5, &g).unwrap();
    for (k, gamma) in s.gammas.iter().enumerate() {
        let kk = (k + 1) as f64;
        let exact = -D * (kk * PI / 3.0).powi(2);
        assert!((gamma - exact).abs() < 5e-4 * exact.abs(), "k={kk}: {gamma} vs {exact}");
        assert!((gamma / (kk * kk) + 0.0658).abs() < 5e-5);
    }
}

#[test]
fn symmetric_operator_is_exactly_symmetric() {
    let g = SpatialGrid::new(1.5, 400).unwrap();
    let (diag, off) = symmetric_operator(&headline(), 0.0, D, &g).unwrap();
    assert_eq!(diag.len(), 400);
    // The stored form has a single off-diagonal, so H[i][i+1] == H[i+1][i] by construction.
    assert!(off.iter().all(|&x| x == off[0]));
}

#[test]
fn spectrum_ordering_and_mid_ramp_shift() {
    let g = SpatialGrid::default();
    let land = headline();
    let early = instantaneous_spectrum(&land, -10.0, D, 3, &g).unwrap();
    let mid = instantaneous_spectrum(&land, 0.0, D, 3, &g).unwrap();
    for s in [&early, &mid] {
        assert!(s.gammas.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.gammas.iter().all(|x| x.is_finite() && *x < 0.0));
    }
    assert!(mid.gammas[1] > early.gammas[1]);
}

#[test]
fn spectrum_lies_on_parabola() {
    let g = SpatialGrid::default();
    let s = instantaneous_spectrum(&headline(), -10.0, D, 20, &g).unwrap();
    let pts: Vec<(f64, f64)> = (5..=20).map(|k| ((k * k) as f64, s.gammas[k - 1])).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.99, "R² = {r2}");
}

#[test]
fn gram_matrix_is_identity() {
    let g = SpatialGrid::default();
    let land = headline();
    for t in [-10.0, 0.0, 1.0, 2.0] {
        let s = instantaneous_spectrum(&land, t, D, 5, &g).unwrap();
        let gram = s.gram();
        for (i, row) in gram.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((x - e).abs() < 1e-8, "t={t} ({i},{j}) {x}");
            }
        }
    }
}

#[test]
fn signs_positive_at_well_and_aligned_in_time() {
    let g = SpatialGrid::new(1.5, 800).unwrap();
    let land = headline();
    let a = instantaneous_spectrum(&land, 0.0, D, 3, &g).unwrap();
    assert_eq!(a.sign, SignConvention::WellPositive);
    let well = (0..g.n_points).min_by(|&i, &j| a.log_weight()[i].total_cmp(&a.log_weight()[j])).unwrap();
    for k in 0..3 {
        assert!(a.mode(k)[well] > 0.0);
    }
    let mut b = instantaneous_spectrum(&land, 0.01, D, 3, &g).unwrap();
    b.align_to(&a).unwrap();
    assert_eq!(b.sign, SignConvention::Aligned);
    for k in 0..3 {
        assert!(b.cross_product(k, &a, k) > 0.9);
    }
    // Spectra far apart in time are not comparable and must not be flipped silently.
    let mut far = instantaneous_spectrum(&Flat, 0.0, 0.5, 3, &g).unwrap();
    let err = far.align_to(&instantaneous_spectrum(&land, 0.0, 0.01, 3, &g).unwrap()).unwrap_err();
    assert!(matches!(err, Error::SignAlignment { .. }));
}

#[test]
fn frozen_ramp_has_no_coupling() {
    let g = SpatialGrid::default();
    let c = coupling_coefficients(&CoMoving { c1: ConstantC1(2.0) }, 0.0, 0.01, D, 3, &g).unwrap();
    assert!(c.iter().all(|x| x.abs() < 1e-8), "{c:?}");
}

#[test]
fn coupling_diagonal_is_weight_derivative() {
    // ⟨v_k, v_k⟩_t = 1 for all t, so ⟨v_k, v̇_k⟩ = −½ ∫ ψ_k² ∂_t(U/D).
    let g = SpatialGrid::default();
    let land = headline();
    let (t, dt) = (0.0, 0.01);
    let c = coupling_coefficients(&land, t, dt, D, 3, &g).unwrap();
    let s = instantaneous_spectrum(&land, t, D, 3, &g).unwrap();
    let up = land.potential_nodes(&g, t + dt).unwrap();
    let um = land.potential_nodes(&g, t - dt).unwrap();
    for k in 0..3 {
        let psi = s.psi(k);
        let expect: f64 = -0.5
            * g.spacing
            * psi.iter().enumerate().map(|(i, p)| p * p * (up[i + 1] - um[i + 1]) / (2.0 * dt * D)).sum::<f64>();
        let got = c[k * 3 + k];
        assert!((got - expect).abs() < 1e-4 * expect.abs().max(1e-3), "k={k}: {got} vs {expect}");
    }
}

#[test]
fn off_diagonal_coupling_is_second_order_in_rate() {
    // In the co-moving frame c1 → 2 adiabatically, so at fixed slow time ρt
    // the landscape changes at O(ρ²) and so does ⟨v₂, v̇₁⟩.
    let g = SpatialGrid::default();
    let tau = -0.1;
    let c = |rho: f64| coupling_coefficients(&co_moving(rho, 6.0).unwrap(), tau / rho, 0.01, D, 2, &g).unwrap()[2];
    let ratio = c(0.01) / c(0.005);
    assert!((ratio - 4.0).abs() < 1.2, "ratio {ratio}");
}

#[test]
fn uncoupled_single_mode_is_exponential() {
    let g = SpatialGrid::new(1.5, 400).unwrap();
    let opts = ModeOptions { t0: 0.0, t_end: 5.0, couple: false, ..ModeOptions::default() };
    let p0: Vec<f64> = g.points().iter().map(|y| (PI * (y + 1.5) / 3.0).sin() / 1.5 * PI / 4.0).collect();
    let ev = evolve_modes(&Flat, 0.2, 1, &g, &opts, &p0).unwrap();
    let gamma = ev.gammas[0][0];
    let a0 = ev.states[0].a[0];
    let a_end = ev.states.last().unwrap().a[0];
    assert!((a_end - a0 * (gamma * 5.0).exp()).abs() < 1e-9 * a0.abs());
}

#[test]
fn uncoupled_single_mode_follows_integrated_eigenvalue() {
    let g = SpatialGrid::new(1.5, 600).unwrap();
    let land = headline();
    let opts = ModeOptions { t0: -10.0, t_end: 2.0, couple: false, ..ModeOptions::default() };
    let ev = evolve_modes(&land, 0.1, 1, &g, &opts, &initial(&land, 0.1, &g)).unwrap();
    let mut integral = 0.0;
    for w in ev.gammas.windows(2) {
        integral += 0.5 * 0.01 * (w[0][0] + w[1][0]);
    }
    let a0 = ev.states[0].a[0];
    let a_end = ev.states.last().unwrap().a[0];
    assert!((a_end / a0 - integral.exp()).abs() < 1e-8, "{} vs {}", a_end / a0, integral.exp());
}

#[test]
fn initial_density_is_nearly_the_leading_mode() {
    let g = SpatialGrid::default();
    let land = headline();
    let opts = ModeOptions { t0: -10.0, t_end: -9.98, ..ModeOptions::default() };
    let ev = evolve_modes(&land, D, 3, &g, &opts, &initial(&land, D, &g)).unwrap();
    let a = &ev.states[0].a;
    assert!(a[0] > 0.0);
    assert!(a[1].abs() < 1e-3 && a[2].abs() < 1e-3, "{a:?}");
}

#[test]
fn reflecting_ends_conserve_mass() {
    let g = SpatialGrid::default();
    let land = headline();
    let opts = FpeOptions { boundary: Boundary::Reflecting, ..FpeOptions::default() };
    let sol = solve_fpe_reference(&land, D, &g, &opts, &initial(&land, D, &g)).unwrap();
    assert!((sol.final_mass - sol.initial_mass).abs() < 1e-8);
}

#[test]
fn absorbing_mass_never_increases() {
    let g = SpatialGrid::new(1.5, 1000).unwrap();
    let land = headline();
    let opts = FpeOptions { snapshot_times: vec![-10.0, 0.0, 10.0], ..FpeOptions::default() };
    let sol = solve_fpe_reference(&land, D, &g, &opts, &initial(&land, D, &g)).unwrap();
    assert!(sol.warnings.is_empty());
    let masses: Vec<f64> = sol.snapshots.iter().map(|s| g.integrate(&s.density)).collect();
    assert!(masses.windows(2).all(|w| w[1] <= w[0]));
    assert!(sol.escaped > 0.0 && sol.escaped < 1.0);
}

#[test]
fn weak_noise_barely_escapes() {
    let g = SpatialGrid::default();
    let land = co_moving(0.08, 6.0).unwrap();
    let sol = solve_fpe_reference(&land, 0.01, &g, &FpeOptions::default(), &initial(&land, 0.01, &g)).unwrap();
    assert!(sol.escaped < 1e-4, "{}", sol.escaped);
}

#[test]
fn quasi_stationary_density_properties() {
    let g = SpatialGrid::default();
    let land = headline();
    let p = quasi_stationary_density(&land, -10.0, D, &g).unwrap();
    assert!((g.integrate(&p) - 1.0).abs() < 1e-10);
    assert!(p.iter().all(|x| *x >= 0.0));
    // The last interior value sits one spacing from the absorbing end, where P_* = 0.
    assert!(p[g.n_points - 1] < 1e-3 * p.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn frozen_frame_density_peaks_behind_orbit() {
    let g = SpatialGrid::default();
    let land = frozen(RHO, 6.0).unwrap();
    let p = quasi_stationary_density(&land, 0.0, D, &g).unwrap();
    let peak = (0..g.n_points).max_by(|&i, &j| p[i].total_cmp(&p[j])).unwrap();
    let y = g.point(peak);
    let c1 = C1Source::c1(&land.c1, 0.0).unwrap();
    assert!(y < 0.0);
    assert!((y - (c1 / 2.0 - 1.0)).abs() < 0.02, "{y} vs {}", c1 / 2.0 - 1.0);
}

#[test]
fn decaying_density_scales_total_mass() {
    let g = SpatialGrid::new(1.5, 500).unwrap();
    let land = CoMoving { c1: ConstantC1(2.0) };
    let p = quasi_stationary_density_decaying(&land, -10.0, -5.0, D, 0.01, &g).unwrap();
    assert!((g.integrate(&p) - 0.95).abs() < 1e-12);
}

#[test]
fn grid_resolution_check() {
    let land = co_moving(0.1, 6.0).unwrap();
    let r = check_resolution(&land, 0.0, 0.1, 1, &SpatialGrid::default()).unwrap();
    assert!(r.converged, "{r:?}");
    // Second-order scheme: the refinement shift drops about fourfold per halving.
    let coarse = check_resolution(&land, 0.0, 0.1, 3, &SpatialGrid::new(1.5, 499).unwrap()).unwrap();
    let fine = check_resolution(&land, 0.0, 0.1, 3, &SpatialGrid::new(1.5, 999).unwrap()).unwrap();
    let q = (coarse.gamma_n - coarse.refined) / (fine.gamma_n - fine.refined);
    assert!((q - 4.0).abs() < 0.4, "{q}");
    assert!(!coarse.converged);
}

#[test]
fn three_modes_track_reference_escape() {
    let g = SpatialGrid::default();
    let land = headline();
    let p0 = initial(&land, D, &g);
    let reference = solve_fpe_reference(&land, D, &g, &FpeOptions::default(), &p0).unwrap();
    let pm = mode_escape_probability(&land, D, 3, &g, &ModeOptions::default(), &p0).unwrap();
    assert!((pm - reference.escaped).abs() <= 0.05, "P_M {pm} vs reference {}", reference.escaped);
}

#[test]
fn density_snapshots_three_modes_beat_one() {
    let g = SpatialGrid::default();
    let land = headline();
    let p0 = initial(&land, D, &g);
    let times = vec![0.0, 1.0, 2.0];
    let reference = solve_fpe_reference(
        &land,
        D,
        &g,
        &FpeOptions { t_end: 2.0, snapshot_times: times.clone(), ..FpeOptions::default() },
        &p0,
    )
    .unwrap();
    let opts = ModeOptions { t_end: 2.0, snapshot_times: times, ..ModeOptions::default() };
    let one = evolve_modes(&land, D, 1, &g, &opts, &p0).unwrap();
    let three = evolve_modes(&land, D, 3, &g, &opts, &p0).unwrap();
    let d1 = l1(&one.snapshots[0].density, &reference.snapshots[0].density, &g);
    let d3 = l1(&three.snapshots[0].density, &reference.snapshots[0].density, &g);
    assert!(d1 > d3, "one {d1} three {d3}");
    // The single mode carries too heavy a tail to the exit: more outflow at t = 0.
    let f1 = boundary_flux(&one.snapshots[0].density, D, &g);
    let f3 = boundary_flux(&three.snapshots[0].density, D, &g);
    assert!(f1 > f3, "flux one {f1} three {f3}");
}

#[test]
fn boundary_flux_of_sine() {
    let g = SpatialGrid::new(1.5, 999).unwrap();
    let p: Vec<f64> = g.points().iter().map(|y| (PI * (y + 1.5) / 3.0).sin()).collect();
    assert!((boundary_flux(&p, 0.1, &g) - 0.1 * PI / 3.0).abs() < 1e-5);
}

#[test]
fn three_mode_escape_grid_converged() {
    let land = headline();
    let run = |n_points: usize| {
        let g = SpatialGrid::new(1.5, n_points).unwrap();
        mode_escape_probability(&land, D, 3, &g, &ModeOptions::default(), &initial(&land, D, &g)).unwrap()
    };
    let (a, b) = (run(2000), run(4000));
    assert!((a - b).abs() < 1e-3, "{a} vs {b}");
}
