use std::f64::consts::PI;

use memdiff_core::eigen::{principal_eigenpair, rayleigh_quotient};
use memdiff_core::gamma0::compute_coefficients;
use memdiff_core::gamma1::{balance, find_u1};
use memdiff_core::hopf::{crossing_data_raw, f_residual, hopf_condition};
use memdiff_core::tridiag::Tridiag;
use memdiff_core::{BuiltinModel, Expr, Field, Grid1D, ModelSpec};
use proptest::prelude::*;

fn logistic(amp: f64, k: f64, shift: f64, r0: f64, r1: f64, d: f64) -> ModelSpec {
    let m = Expr::Sum { terms: vec![Expr::Cos { k, amp }, Expr::constant(shift)] };
    ModelSpec::logistic(m, r0, r1, d, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kappa_splits_into_its_parts(
        amp in 0.5f64..2.0, k in 1u8..4, shift in -0.5f64..-0.05,
        r0 in -1.0f64..1.0, r1 in -1.0f64..1.0, d in 0.0f64..4.0,
    ) {
        let g = Grid1D::new(48, 1.0).unwrap();
        let m = logistic(amp, k as f64, shift, r0, r1, d);
        let e = principal_eigenpair(&g, &m).unwrap();
        let c = compute_coefficients(&g, &m, &e).unwrap();
        let sum = 2.0 * c.kappa0 + 2.0 * c.kappa1 + c.kappa2;
        prop_assert!((sum - c.kappa_direct).abs() <= 1e-10 * c.kappa_direct.abs().max(1e-8));
    }

    #[test]
    fn principal_eigenpair_minimises_the_rayleigh_quotient(
        amp in 0.5f64..2.0, shift in -0.5f64..-0.05, a in -1.0f64..1.0, b in -1.0f64..1.0,
    ) {
        let g = Grid1D::new(64, 1.0).unwrap();
        let m = logistic(amp, 1.0, shift, 0.0, 0.0, 0.0);
        let e = principal_eigenpair(&g, &m).unwrap();
        prop_assert!(e.phi1.min() > 0.0);
        prop_assert!((g.norm(&e.phi1) - 1.0).abs() < 1e-12);
        let trial = &e.phi1 + g.sample(|x| a * (2.0 * PI * x).cos() + b * (3.0 * PI * x).cos()) * 0.5;
        if let Ok(q) = rayleigh_quotient(&g, &m, &trial) {
            prop_assert!(q >= e.lambda1 * (1.0 - 1e-10));
        }
    }

    #[test]
    fn hopf_root_solves_f_and_ladder_is_uniform(
        k0 in -5.0f64..5.0, k1 in -5.0f64..5.0, k2 in -5.0f64..5.0, amp in 0.01f64..1.0, neg in any::<bool>(),
    ) {
        let kappa = 2.0 * k0 + 2.0 * k1 + k2;
        prop_assume!(kappa * (4.0 * k0 - kappa) > 0.0);
        let amp = if neg { -amp } else { amp };
        let h = crossing_data_raw(k0, kappa, amp, 4).unwrap();
        prop_assert!(hopf_condition(k0, kappa));
        prop_assert!(f_residual(k0, kappa, h.delta_star, h.theta_star).norm() < 1e-12);
        prop_assert!((h.delta_star + k0 * h.theta_star.sin()).abs() < 1e-12);
        prop_assert!((0.0..2.0 * PI).contains(&h.theta_star));
        prop_assert!(h.omega > 0.0);
        for w in h.sigma_ladder.windows(2) {
            prop_assert!(((w[1] - w[0]) * h.omega - 2.0 * PI).abs() < 1e-11);
        }
        prop_assert!(h.transversality.iter().all(|t| *t > 0.0));
    }

    #[test]
    fn tridiagonal_solve_matches_dense(
        diag in proptest::collection::vec(3.0f64..5.0, 12),
        off in proptest::collection::vec(-1.0f64..1.0, 22),
        rhs in proptest::collection::vec(-1.0f64..1.0, 12),
    ) {
        let t = Tridiag { sub: off[..11].to_vec(), diag, sup: off[11..].to_vec() };
        let b = Field::from_vec(rhs);
        let x = t.solve(&b).unwrap();
        let y = t.to_dense().lu().solve(&b).unwrap();
        prop_assert!((x - y).amax() < 1e-12);
    }

    #[test]
    fn balance_roots_are_roots(mean in 0.3f64..2.0, r in -1.0f64..-0.1) {
        let g = Grid1D::new(32, 1.0).unwrap();
        let m = Expr::Sum { terms: vec![Expr::constant(mean), Expr::Cos { k: 1.0, amp: 0.3 }] };
        let spec = ModelSpec::logistic(m, r / 2.0, r / 2.0, 0.0, 1.0).unwrap();
        // u (mean - u) + u^2 r = 0  =>  u = mean / (1 - r)
        let roots = find_u1(&g, &spec, (0.05, 3.0)).unwrap();
        prop_assert_eq!(roots.len(), 1);
        prop_assert!((roots[0] - mean / (1.0 - r)).abs() < 1e-10);
        prop_assert!(balance(&g, &spec, roots[0]).abs() < 1e-12);
    }
}

#[test]
fn saturating_model_eigenpair_is_a_rayleigh_critical_point() {
    let g = Grid1D::new(64, 1.0).unwrap();
    let b = BuiltinModel::SaturatingBistableBoundary {
        r: Expr::Sum { terms: vec![Expr::Cos { k: 1.0, amp: 1.0 }, Expr::constant(-0.2)] },
        k: 1.0,
        gamma: Expr::constant(0.5),
        a: 0.3,
    };
    let m = ModelSpec::builtin(b, 0.0, 0.0, 0.0, 1.0).unwrap();
    let e = principal_eigenpair(&g, &m).unwrap();
    let q = rayleigh_quotient(&g, &m, &e.phi1).unwrap();
    assert!((q - e.lambda1).abs() < 1e-9 * e.lambda1);
}
