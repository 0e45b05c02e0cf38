use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use ssvar::companion::{embed, extract, spectral_norm};
use ssvar::granger::gc_statistic;
use ssvar::prox::{project_l1_ball, prox_linf, shrink_spectrum};
use ssvar::ssd_admm::{is_block_toeplitz, solve_dh_first_column, toeplitz_complete, toeplitz_generators};
use ssvar::{build_lag_design, BivariateSeries, VarCoefficients};

fn coeffs(max_m: usize) -> impl Strategy<Value = VarCoefficients> {
    (1..=max_m).prop_flat_map(|m| {
        proptest::collection::vec(-2.0f64..2.0, 4 * m)
            .prop_map(move |v| VarCoefficients::from_matrix(DMatrix::from_row_slice(2, 2 * m, &v)).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn companion_round_trip_and_properties(a in coeffs(6), scale in -3.0f64..3.0) {
        let m = a.m_bar();
        prop_assert_eq!(&extract(&embed(&a)), &a);
        let lhs = embed(&a).matrix().norm_squared();
        prop_assert!((lhs - a.matrix().norm_squared() - 2.0 * (m as f64 - 1.0)).abs() < 1e-10);
        let b = VarCoefficients::from_matrix(a.matrix() * scale).unwrap();
        let diff = VarCoefficients::from_matrix(a.matrix() - b.matrix()).unwrap();
        let half = VarCoefficients::from_matrix(a.matrix() * 0.5).unwrap();
        let rhs = embed(&half).into_matrix() * 2.0 - embed(&b).into_matrix();
        prop_assert!((embed(&diff).into_matrix() - rhs).amax() < 1e-12);
        if m >= 2 {
            prop_assert!(spectral_norm(embed(&a).matrix()) >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn l1_projection_is_feasible_and_idempotent(v in proptest::collection::vec(-10.0f64..10.0, 1..40), r in 0.01f64..20.0) {
        let p = project_l1_ball(&v, r);
        let l1: f64 = p.iter().map(|x| x.abs()).sum();
        prop_assert!(l1 <= r * (1.0 + 1e-12) + 1e-12);
        let again = project_l1_ball(&p, r);
        for (a, b) in p.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (x, y) in v.iter().zip(&p) {
            prop_assert!(x * y >= 0.0 && y.abs() <= x.abs() + 1e-15);
        }
    }

    #[test]
    fn linf_prox_caps_the_peak(v in proptest::collection::vec(-10.0f64..10.0, 1..40), t in 0.0f64..30.0) {
        let p = prox_linf(&v, t);
        let peak = |w: &[f64]| w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(peak(&p) <= peak(&v) + 1e-12);
        let l1: f64 = v.iter().map(|x| x.abs()).sum();
        if t >= l1 {
            prop_assert!(peak(&p) < 1e-12);
        }
    }

    #[test]
    fn spectral_shrink_never_grows_the_norm(x in proptest::collection::vec(-3.0f64..3.0, 36), t in 0.0f64..5.0) {
        let m = DMatrix::from_row_slice(6, 6, &x);
        let s = shrink_spectrum(&m, t).unwrap();
        prop_assert!(spectral_norm(&s) <= spectral_norm(&m) + 1e-10);
    }

    #[test]
    fn gc_statistic_is_scale_invariant(
        ru in 0.1f64..100.0, extra in 0.0f64..50.0, s in 1e-3f64..1e3, p in 2usize..10, t in 30usize..300,
    ) {
        let pp = p / 2;
        let f1 = gc_statistic(ru + extra, ru, p, pp, t).unwrap();
        let f2 = gc_statistic((ru + extra) * s, ru * s, p, pp, t).unwrap();
        prop_assert!((f1 - f2).abs() <= 1e-9 * (1.0 + f1.abs()));
        prop_assert!(f1 >= 0.0);
    }

    #[test]
    fn lag_noise_matrix_is_block_toeplitz(
        m in 1usize..6, y in proptest::collection::vec(-5.0f64..5.0, 40), x in proptest::collection::vec(-5.0f64..5.0, 40),
    ) {
        let s = BivariateSeries::new(y.clone(), x.clone()).unwrap();
        let dh = build_lag_design(&s, m).unwrap().h().clone();
        prop_assert!(is_block_toeplitz(&dh));
        let (col, ry, rx) = toeplitz_generators(&dh);
        prop_assert_eq!(&ry[..], &y[m..39]);
        prop_assert_eq!(&rx[..], &x[m..39]);
        prop_assert_eq!(toeplitz_complete(&col, &ry, &rx, 40 - m).unwrap(), dh);
    }

    #[test]
    fn dh_column_solves_its_equation(
        m in 1usize..10, seed in proptest::collection::vec(-1.0f64..1.0, 4 * 10 + 2 * 10 + 6),
    ) {
        let a = DMatrix::from_fn(2, 2 * m, |i, j| seed[i * 2 * m + j]);
        prop_assume!(a.row(0).norm() > 0.1 && a.row(1).norm() > 0.1);
        let h = DVector::from_fn(2 * m, |i, _| seed[40 + i]);
        let v = |k: usize| DVector::from_vec(vec![seed[60 + 2 * k], seed[61 + 2 * k]]);
        let (yh, e, dy) = (v(0), v(1), v(2));
        let out = solve_dh_first_column(&a, &h, &yh, &e, &dy).unwrap();
        let rhs = &a * &h - &yh + &e + &dy;
        if !out.regularized {
            prop_assert!((&a * &out.dh - rhs).norm() < 1e-9);
        }
        // minimum norm: the solution lies in the row space of A
        let g = &a * a.transpose();
        if let Some(gi) = g.try_inverse() {
            let proj = a.transpose() * gi * &a * &out.dh;
            prop_assert!((proj - &out.dh).norm() < 1e-8 * (1.0 + out.dh.norm()));
        }
    }
}
