use proptest::prelude::*;
use tipctl::parallel::{escape_estimate, thread_pool};
use tipctl::sweep::*;
use tipping_core::fpe::SpatialGrid;
use tipping_core::monte_carlo::{simulate_escape, EscapeMethod, SimulationConfig};
use tipping_core::perturbation::TimeWindow;

fn light_config(paths: u64) -> SweepConfig {
    SweepConfig {
        sim: SimulationConfig { n_paths: paths, seed: 11, ..SimulationConfig::default() },
        grid: SpatialGrid::new(1.5, 300).unwrap(),
        window: TimeWindow { n_time: 201, ..TimeWindow::default() },
        ..SweepConfig::default()
    }
}

#[test]
fn parallel_estimate_independent_of_threads() {
    let cfg = SimulationConfig { n_paths: 1000, seed: 5, ..SimulationConfig::default() };
    let serial = simulate_escape(0.14, 0.1, &cfg).unwrap();
    for threads in [1, 2, 3] {
        let pool = thread_pool(Some(threads)).unwrap();
        let est = escape_estimate(&pool, 0.14, 0.1, &cfg, EscapeMethod::Threshold).unwrap();
        assert_eq!(est, serial);
    }
}

#[test]
fn cell_order_and_threads_do_not_matter() {
    let grid = SweepGrid::new(vec![0.06, 0.1, 0.15], vec![0.08, 0.12], vec![Method::Mc, Method::Pj, Method::Pp]).unwrap();
    let cfg = light_config(300);
    let a = run_sweep(&grid, &cfg, &thread_pool(Some(1)).unwrap());
    let mut cells = grid.cells();
    cells.reverse();
    cells.swap(0, 3);
    let b = run_cells(&grid, &cfg, &thread_pool(Some(3)).unwrap(), &cells);
    assert_eq!(a, b);
}

#[test]
fn outside_validity_flags_only_single_mode_methods() {
    let grid = SweepGrid::new(vec![0.14, 0.15], vec![0.1], vec![Method::M1, Method::M3, Method::Pp, Method::Pj]).unwrap();
    let cfg = SweepConfig {
        grid: SpatialGrid::new(1.5, 200).unwrap(),
        window: TimeWindow { n_time: 101, ..TimeWindow::default() },
        mode_refresh_dt: 0.02,
        ..light_config(10)
    };
    let r = run_sweep(&grid, &cfg, &thread_pool(Some(1)).unwrap());
    for (&(i, _, m), v) in &r.cells {
        let expect = i == 1 && matches!(m, Method::M1 | Method::Pp);
        assert_eq!(v.outside_validity, expect, "{m} at rho={}", r.rho_values[i]);
        if let Ok(p) = v.p {
            assert!((0.0..=1.0).contains(&p));
        }
        let flagged = r.rows(m).iter().filter(|row| row.flag == OUTSIDE_VALIDITY).count();
        assert_eq!(flagged, if m.has_validity_limit() { 1 } else { 0 });
    }
}

#[test]
fn failed_cells_are_recorded_in_place() {
    // ρ = 0 has no ramp and no connecting orbit to co-move with; Monte-Carlo still runs.
    let grid = SweepGrid::new(vec![0.0, 0.1], vec![0.1], vec![Method::Mc, Method::Pj]).unwrap();
    let r = run_sweep(&grid, &light_config(100), &thread_pool(Some(1)).unwrap());
    assert_eq!(r.cells.len(), 4);
    assert!(r.get(1, 0, Method::Pj).unwrap().p.is_ok());
    assert!(r.get(0, 0, Method::Mc).unwrap().p.is_ok());
    if let Err(msg) = &r.get(0, 0, Method::Pj).unwrap().p {
        let row = &r.rows(Method::Pj)[0];
        assert!(row.p.is_none() && row.flag.contains(msg.as_str()));
        assert!(error_map(&r, Method::Pj, Method::Mc).is_err());
    }
}

#[test]
fn error_map_of_reference_is_zero() {
    let grid = SweepGrid::new(vec![0.05, 0.1], vec![0.1, 0.15], vec![Method::Mc, Method::Pj]).unwrap();
    let r = run_sweep(&grid, &light_config(200), &thread_pool(None).unwrap());
    let zero = error_map(&r, Method::Mc, Method::Mc).unwrap();
    assert!(zero.values().all(|e| *e == 0.0));
    let e = error_map(&r, Method::Pj, Method::Mc).unwrap();
    for (&(i, j), v) in &e {
        let p = r.get(i, j, Method::Pj).unwrap().value().unwrap();
        let q = r.get(i, j, Method::Mc).unwrap().value().unwrap();
        assert_eq!(*v, 100.0 * (p - q));
    }
    let missing = SweepGrid::new(vec![0.05], vec![0.1], vec![Method::Pj]).unwrap();
    let r = run_sweep(&missing, &light_config(10), &thread_pool(None).unwrap());
    assert!(matches!(error_map(&r, Method::Pj, Method::Mc), Err(tipctl::Error::MissingCell { .. })));
}

#[test]
fn headline_cell() {
    let grid = SweepGrid::new(vec![1.0 / 6.0], vec![0.2], vec![Method::Mc]).unwrap();
    let cfg = SweepConfig { sim: SimulationConfig { n_paths: 10_000, seed: 1, ..SimulationConfig::default() }, ..SweepConfig::default() };
    let r = run_sweep(&grid, &cfg, &thread_pool(None).unwrap());
    let p = r.get(0, 0, Method::Mc).unwrap().value().unwrap();
    assert!((p - 0.70).abs() <= 0.03, "{p}");
}

#[test]
fn slow_weak_cell_rarely_escapes() {
    // x0 = -1 is past the hilltop at t0 for this slow ramp, so start on the orbit.
    let grid = SweepGrid::new(vec![0.01], vec![0.05], Method::ALL.to_vec()).unwrap();
    let sim = SimulationConfig { n_paths: 10_000, seed: 2, ..SimulationConfig::default() };
    let cfg = SweepConfig { sim, orbit_start: true, ..SweepConfig::default() };
    let r = run_sweep(&grid, &cfg, &thread_pool(None).unwrap());
    for m in Method::ALL {
        let p = r.get(0, 0, m).unwrap().value().unwrap();
        assert!(p < 0.01, "{m}: {p}");
    }
    let fixed = run_sweep(&SweepGrid::new(vec![0.01], vec![0.05], vec![Method::Mc]).unwrap(), &SweepConfig { sim, ..SweepConfig::default() }, &thread_pool(None).unwrap());
    assert!(fixed.get(0, 0, Method::Mc).unwrap().value().unwrap() > 0.5);
}

#[test]
fn smoothing_reduces_monte_carlo_noise() {
    let grid = SweepGrid::new(stepped(0.04, 0.12, 0.02).unwrap(), stepped(0.08, 0.2, 0.03).unwrap(), vec![Method::Mc]).unwrap();
    let r = run_sweep(&grid, &light_config(400), &thread_pool(None).unwrap());
    let raw = r.matrix(Method::Mc).unwrap();
    let smooth = smooth_grid(&raw, DEFAULT_BANDWIDTH).unwrap();
    assert!(total_variation(&smooth) < total_variation(&raw));
}

#[test]
fn smoothing_rejects_bad_bandwidth() {
    assert!(smooth_grid(&[vec![1.0]], -1.0).is_err());
    assert!(smooth_grid(&[vec![1.0]], f64::NAN).is_err());
}

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-1.0..1.0f64, c), r))
}

proptest! {
    #[test]
    fn zero_bandwidth_is_identity(m in matrix()) {
        prop_assert_eq!(smooth_grid(&m, 0.0).unwrap(), m);
    }

    #[test]
    fn constant_maps_unchanged(v in -5.0..5.0f64, r in 1usize..6, c in 1usize..6, bw in 0.1..3.0f64) {
        let m = vec![vec![v; c]; r];
        let s = smooth_grid(&m, bw).unwrap();
        for row in &s {
            for x in row {
                prop_assert!((x - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smoothing_stays_in_range(m in matrix(), bw in 0.1..3.0f64) {
        let lo = m.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        let hi = m.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        for x in smooth_grid(&m, bw).unwrap().iter().flatten() {
            prop_assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
        }
    }
}
