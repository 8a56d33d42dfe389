use std::f64::consts::PI;

use memdiff_core::dynamics::{integrate, Classification, IntegrateOptions};
use memdiff_core::eigen::principal_eigenpair;
use memdiff_core::gamma0::compute_coefficients;
use memdiff_core::steady::solve_near_bifurcation;
use memdiff_core::{Expr, Grid1D, ModelSpec};

fn fixture(n: usize, r: f64, d: f64) -> (Grid1D, ModelSpec) {
    let m = Expr::Sum { terms: vec![Expr::Cos { k: 1.0, amp: 1.0 }, Expr::constant(-0.2)] };
    (Grid1D::new(n, 1.0).unwrap(), ModelSpec::logistic(m, r, r, d, 1.0).unwrap())
}

#[test]
fn undelayed_run_relaxes_to_the_steady_state() {
    let (g, m) = fixture(64, -1.0, 0.5);
    let e = principal_eigenpair(&g, &m).unwrap();
    let c = compute_coefficients(&g, &m, &e).unwrap();
    let lam = e.lambda1 * 1.3;
    let st = solve_near_bifurcation(&g, &m, &e, &c, lam, &Default::default()).unwrap();
    let init = &st.u_star * 1.5;
    let opts = IntegrateOptions { reference: Some(st.u_star.clone()), ..Default::default() };
    let tr = integrate(&g, &m, lam, 0.0, &init, 400.0, &opts).unwrap();
    let dist = (&tr.final_state - &st.u_star).amax();
    assert!(dist < 1e-4, "distance {dist:e}");
    assert_eq!(tr.classification, Classification::ConvergedToSteady);
}

#[test]
fn mass_defect_is_second_order_in_dt() {
    let (g, m) = fixture(32, 0.0, 0.8);
    let init = g.sample(|x| 0.4 + 0.2 * (PI * x).cos());
    let defect = |dt: f64| {
        let opts = IntegrateOptions { dt: Some(dt), audit_mass: true, ..Default::default() };
        integrate(&g, &m, 4.0, 0.5, &init, 1.0, &opts).unwrap().mass_defect.unwrap()
    };
    let (a, b, c) = (defect(1.0 / 32.0), defect(1.0 / 64.0), defect(1.0 / 128.0));
    let s1 = (a / b).log2();
    let s2 = (b / c).log2();
    assert!((s1 - 2.0).abs() < 0.3 && (s2 - 2.0).abs() < 0.3, "slopes {s1} {s2} ({a:e} {b:e} {c:e})");
}

#[test]
fn step_not_dividing_the_delay_is_served_by_the_history() {
    let (g, m) = fixture(32, 0.0, 10.0);
    let init = g.sample(|x| 0.05 + 0.01 * (PI * x).cos());
    let opts = IntegrateOptions { dt: Some(0.05), ..Default::default() };
    let tr = integrate(&g, &m, 5.0, 5.0, &init, 50.0, &opts).unwrap();
    assert_eq!(tr.steps, 1000);
}

#[test]
fn snapshots_land_on_requested_times() {
    let (g, m) = fixture(32, 0.0, 1.0);
    let init = g.sample(|x| 0.3 + 0.1 * (PI * x).cos());
    let opts = IntegrateOptions { dt: Some(0.1), snapshot_times: vec![2.0, 0.0, 1.05], ..Default::default() };
    let tr = integrate(&g, &m, 5.0, 1.0, &init, 3.0, &opts).unwrap();
    let times: Vec<f64> = tr.snapshots.iter().map(|s| s.0).collect();
    assert_eq!(times.len(), 3);
    assert_eq!(times[0], 0.0);
    assert!((times[1] - 1.1).abs() < 1e-12);
    assert!((times[2] - 2.0).abs() < 1e-12);
    assert_eq!(tr.snapshots[0].1, init);
}

#[test]
fn reruns_are_bitwise_identical() {
    let (g, m) = fixture(32, 0.0, 10.0);
    let init = g.sample(|x| 0.05 + 0.01 * (PI * x).cos());
    let opts = IntegrateOptions { audit_mass: true, ..Default::default() };
    let a = integrate(&g, &m, 5.0, 3.0, &init, 30.0, &opts).unwrap();
    let b = integrate(&g, &m, 5.0, 3.0, &init, 30.0, &opts).unwrap();
    assert_eq!(a.final_state, b.final_state);
    assert_eq!(a.probes, b.probes);
    assert_eq!(a.mass_defect.map(f64::to_bits), b.mass_defect.map(f64::to_bits));
}

#[test]
fn invalid_inputs_are_rejected() {
    let (g, m) = fixture(16, 0.0, 1.0);
    let init = g.sample(|_| 0.1);
    assert!(integrate(&g, &m, 1.0, -1.0, &init, 1.0, &Default::default()).is_err());
    assert!(integrate(&g, &m, 1.0, 1.0, &init, 0.0, &Default::default()).is_err());
    let short = init.rows(0, 5).into_owned();
    assert!(integrate(&g, &m, 1.0, 1.0, &short, 1.0, &Default::default()).is_err());
}
