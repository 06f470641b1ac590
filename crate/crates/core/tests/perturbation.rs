use tipping_core::fpe::{co_moving, CoMoving, Flat, SpatialGrid};
use tipping_core::monte_carlo::{simulate_escape, SimulationConfig};
use tipping_core::perturbation::*;
use tipping_core::ramp::{kramers_rate, QuadraticFold};
use tipping_core::Error;

fn simpson(f: &[f64], h: f64) -> f64 {
    assert!(f.len() % 2 == 1);
    let n = f.len() - 1;
    let mut s = f[0] + f[n];
    for (i, x) in f.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * x;
    }
    s * h / 3.0
}

#[test]
fn flat_landscape_closed_forms() {
    let g = SpatialGrid::default();
    let tab = nested_integrals(&Flat, 0.0, 0.09, &g).unwrap();
    assert_eq!(tab.a, -1.5);
    for (v, e) in [(tab.p.value(), 1.0), (tab.p2.value(), 3.0), (tab.p12.value(), 4.5), (tab.p212.value(), 4.5), (tab.p1212.value(), 3.375)] {
        assert!((v - e).abs() < 1e-10, "{v} vs {e}");
    }
    assert!((probability_flux(&Flat, 0.0, 0.09, &g).unwrap() - 0.02).abs() < 1e-12);
    for d in [0.05, 0.1, 0.2] {
        let gamma = leading_eigenvalue_formula(&Flat, 0.0, d, &g).unwrap();
        assert!((gamma + 3.0 * d / 2.25).abs() < 1e-12);
    }
}

#[test]
fn table_entries_positive_with_positive_ratios() {
    let g = SpatialGrid::default();
    let land = co_moving(0.14, 6.0).unwrap();
    for t in [-10.0, 0.0, 1.0, 10.0] {
        let tab = nested_integrals(&land, t, 0.06, &g).unwrap();
        for v in [tab.p, tab.p2, tab.p12, tab.p212, tab.p1212] {
            assert!(v.mantissa > 0.0 && v.ln().is_finite());
        }
    }
}

#[test]
fn convention_identity_at_random_samples() {
    // ∫_{−δ}^{δ} p·p₂ dy = p₁₂(−δ), with an independent Simpson rule.
    let g = SpatialGrid::new(1.5, 1999).unwrap();
    let samples = [(-7.3, 0.06, 0.14), (0.0, 0.06, 0.14), (1.7, 0.17, 0.05), (-2.2, 0.11, 0.1), (4.4, 0.08, 0.03)];
    for (t, d, rho) in samples {
        let land = co_moving(rho, 6.0).unwrap();
        let prof = NestedProfiles::new(&land, t, d, &g).unwrap();
        let lhs = simpson(&prof.p_times_p2_scaled(), g.spacing);
        let tab = prof.table();
        let rel = (lhs / tab.p12.mantissa - 1.0).abs();
        assert!(rel < 1e-8, "t={t} D={d} rho={rho}: {rel}");
    }
}

#[test]
fn table_grid_converged() {
    let land = co_moving(0.1, 6.0).unwrap();
    let coarse = nested_integrals(&land, 0.0, 0.1, &SpatialGrid::new(1.5, 2000).unwrap()).unwrap();
    let fine = nested_integrals(&land, 0.0, 0.1, &SpatialGrid::new(1.5, 4001).unwrap()).unwrap();
    for (a, b) in [
        (coarse.p2, fine.p2),
        (coarse.p12, fine.p12),
        (coarse.p212, fine.p212),
        (coarse.p1212, fine.p1212),
    ] {
        let rel = (a.ln() - b.ln()).abs();
        assert!(rel < 1e-6, "{rel}");
    }
}

#[test]
fn large_barriers_stay_finite() {
    let g = SpatialGrid::default();
    let land = CoMoving { c1: tipping_core::fpe::ConstantC1(2.0) };
    let tab = nested_integrals(&land, 0.0, 0.01, &g).unwrap();
    assert!(tab.p12.ln() > 100.0 && tab.p12.ln().is_finite());
    let gamma = leading_eigenvalue_formula(&land, 0.0, 0.01, &g).unwrap();
    assert!(gamma < 0.0);
    // Far too little noise: the offsets no longer cover the range.
    let err = nested_integrals(&land, 0.0, 0.002, &g).unwrap_err();
    assert!(matches!(err, Error::Overflow(_)));
}

#[test]
fn formula_matches_eigensolver() {
    let g = SpatialGrid::default();
    let cases = [(0.14, 0.06, -10.0, 0.20), (0.12, 0.1, 0.0, 0.25)];
    for (rho, d, t, tol) in cases {
        let land = co_moving(rho, 6.0).unwrap();
        let f = leading_eigenvalue_formula(&land, t, d, &g).unwrap();
        let e = tipping_core::fpe::instantaneous_spectrum(&land, t, d, 1, &g).unwrap().gammas[0];
        assert!(f < 0.0);
        assert!((f / e - 1.0).abs() < tol, "rho={rho} D={d} t={t}: {f} vs {e}");
    }
}

#[test]
fn flux_against_kramers_and_mid_ramp() {
    let g = SpatialGrid::default();
    let d = 0.06;
    let land = co_moving(0.14, 6.0).unwrap();
    let j = probability_flux(&land, -10.0, d, &g).unwrap();
    // Laplace estimate with the exit on the slope at y = δ below the barrier top:
    // J ≈ U'(δ)·√(U''(0)/2πD)·exp(−(U(δ) − U(0))/D).
    let c1 = tipping_core::fpe::C1Source::c1(&land.c1, -10.0).unwrap();
    let delta = 1.5;
    let u = c1 * delta * delta / 2.0 - delta.powi(3) / 3.0;
    let slope = delta * delta - c1 * delta;
    let laplace = -slope * (c1 / (2.0 * std::f64::consts::PI * d)).sqrt() * (-u / d).exp();
    assert!(j > 0.5 * laplace && j < 2.0 * laplace, "J {j} strip estimate {laplace}");
    // The full-line rate climbs the whole barrier 4/3 and is smaller by exp((4/3 − U(δ))/D).
    let kappa = kramers_rate(&QuadraticFold, d).unwrap();
    let lift = ((4.0 / 3.0 - u) / d).exp();
    assert!(j > 0.1 * kappa * lift && j < 10.0 * kappa * lift, "J {j} kappa {kappa} lift {lift}");
    assert!(probability_flux(&land, 0.0, d, &g).unwrap() > j);
}

#[test]
fn wrong_sign_is_reported() {
    // A steep well pinned against the exit makes the first-order formula break down.
    struct Cliff;
    impl tipping_core::fpe::Landscape for Cliff {
        fn potential(&self, y: f64, _t: f64) -> tipping_core::Result<f64> {
            Ok(-40.0 * y)
        }
        fn drift(&self, _y: f64, _t: f64) -> tipping_core::Result<f64> {
            Ok(40.0)
        }
    }
    let g = SpatialGrid::new(1.5, 400).unwrap();
    match leading_eigenvalue_formula(&Cliff, 0.0, 0.5, &g) {
        Ok(gamma) => assert!(gamma < 0.0),
        Err(e) => assert!(matches!(e, Error::WrongSign { .. })),
    }
}

#[test]
fn closed_form_probabilities_from_profiles() {
    let t: Vec<f64> = (0..=2000).map(|i| -10.0 + 0.01 * i as f64).collect();
    let zero = RateProfile { t: t.clone(), gamma1: vec![0.0; t.len()], flux: vec![0.0; t.len()] };
    assert_eq!(zero.escape_eigen(), 0.0);
    assert_eq!(zero.escape_flux(), 0.0);
    let c = 0.03;
    let constant = RateProfile { t: t.clone(), gamma1: vec![-1e-4 * 0.4; t.len()], flux: vec![c; t.len()] };
    assert!((constant.escape_flux() - (1.0 - (-c * 20.0f64).exp())).abs() < 1e-12);
    let small = 1e-4 * 0.4 * 20.0;
    assert!((constant.escape_eigen() - small).abs() < 1e-4);
}

#[test]
fn closed_form_probabilities_against_monte_carlo() {
    let g = SpatialGrid::default();
    let w = TimeWindow::default();
    let land = co_moving(0.08, 6.0).unwrap();
    let pp = escape_probability_eigen(&land, 0.1, &g, &w).unwrap();
    let pj = escape_probability_flux(&land, 0.1, &g, &w).unwrap();
    let cfg = SimulationConfig { n_paths: 10_000, seed: 7, ..SimulationConfig::default() };
    let mc = simulate_escape(0.08, 0.1, &cfg).unwrap().p_hat;
    assert!((pp - mc).abs() <= 0.05, "P_P {pp} MC {mc}");
    assert!((pj - mc).abs() <= 0.05, "P_J {pj} MC {mc}");
}

#[test]
fn eigenvalue_negative_over_validity_region() {
    let g = SpatialGrid::new(1.5, 1000).unwrap();
    for rho in [0.01, 0.05, 0.1, 0.14] {
        let land = co_moving(rho, 6.0).unwrap();
        for d in [0.05, 0.1, 0.15, 0.2] {
            let prof = rate_profile(&land, d, &g, &TimeWindow { n_time: 81, ..TimeWindow::default() }).unwrap();
            assert!(prof.gamma1.iter().all(|x| *x < 0.0), "rho={rho} D={d}");
        }
    }
}

#[test]
fn eigen_estimate_dominates_flux_estimate() {
    let g = SpatialGrid::new(1.5, 1000).unwrap();
    let w = TimeWindow { n_time: 401, ..TimeWindow::default() };
    for rho in [0.02, 0.06, 0.1, 0.14] {
        let land = co_moving(rho, 6.0).unwrap();
        for d in [0.05, 0.1, 0.15, 0.2] {
            let prof = rate_profile(&land, d, &g, &w).unwrap();
            let (pp, pj) = (prof.escape_eigen(), prof.escape_flux());
            if pp < 0.5 && pj < 0.5 {
                assert!(pp >= pj - 1e-12, "rho={rho} D={d}: {pp} < {pj}");
            }
        }
    }
}

#[test]
fn estimates_increase_with_noise() {
    let g = SpatialGrid::default();
    let land = co_moving(0.1, 6.0).unwrap();
    let w = TimeWindow::default();
    let mut last = (0.0, 0.0);
    for i in 0..=6 {
        let d = 0.05 + 0.025 * i as f64;
        let prof = rate_profile(&land, d, &g, &w).unwrap();
        let now = (prof.escape_eigen(), prof.escape_flux());
        assert!(now.0 >= last.0 && now.1 >= last.1, "D={d}: {now:?} after {last:?}");
        last = now;
    }
}

#[test]
fn profile_and_direct_estimates_agree() {
    let g = SpatialGrid::new(1.5, 800).unwrap();
    let land = co_moving(0.06, 6.0).unwrap();
    let w = TimeWindow { n_time: 201, ..TimeWindow::default() };
    let prof = rate_profile(&land, 0.12, &g, &w).unwrap();
    assert_eq!(prof.escape_eigen(), escape_probability_eigen(&land, 0.12, &g, &w).unwrap());
    assert_eq!(prof.escape_flux(), escape_probability_flux(&land, 0.12, &g, &w).unwrap());
    assert!(escape_probability_flux(&land, 0.12, &g, &TimeWindow { n_time: 1, ..w }).is_err());
}
