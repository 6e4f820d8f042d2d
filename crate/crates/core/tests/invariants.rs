//! Property tests for the operators and projections.

use approx::assert_relative_eq;
use cpr::experiments::empirical_quantile;
use cpr::fidelity::{FidelityBall, MeasurementMap, QuadraticMap};
use cpr::linalg::{frob_inner, l1_norm, lambda_min, Matrix, Vector};
use cpr::lowrank::project_psd;
use cpr::measurement::{apply_a, apply_a_adjoint, make_ensemble, PsiKind};
use cpr::postprocess::{project_k_sparse, relative_signal_error};
use cpr::sparse::soft_threshold;
use proptest::prelude::*;

fn matrix(d: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| Matrix::from_vec(d, d, v))
}

fn sym(d: usize) -> impl Strategy<Value = Matrix> {
    matrix(d).prop_map(|m| (&m + m.transpose()) * 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_identity(seed in 0u64..1000, x in matrix(6), v in prop::collection::vec(-1.0f64..1.0, 9)) {
        let ens = make_ensemble(6, 4, 9, seed, PsiKind::GaussianScaled).unwrap();
        let v = Vector::from_vec(v);
        let lhs = apply_a(&ens, &x).unwrap().dot(&v);
        let rhs = frob_inner(&x, &apply_a_adjoint(&ens, &v).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn psd_projection_is_idempotent(m in sym(5)) {
        let p = project_psd(&m).unwrap();
        prop_assert!(lambda_min(&p).unwrap() >= -1e-10);
        let pp = project_psd(&p).unwrap();
        prop_assert!((&pp - &p).norm() <= 1e-10 * (1.0 + p.norm()));
    }

    #[test]
    fn sparse_projection_is_idempotent(m in sym(8), k in 1usize..8) {
        let p = project_k_sparse(&m, k).unwrap();
        let rows = (0..8).filter(|&i| p.row(i).iter().any(|&v| v != 0.0)).count();
        prop_assert!(rows <= k);
        prop_assert_eq!(project_k_sparse(&p, k).unwrap(), p);
    }

    #[test]
    fn soft_threshold_shrinks(m in matrix(5), t in 0.0f64..1.0) {
        let s = soft_threshold(&m, t);
        prop_assert!(l1_norm(&s) <= l1_norm(&m) + 1e-12);
        prop_assert!((&s - &m).iter().all(|v| v.abs() <= t + 1e-12));
    }

    #[test]
    fn ball_projection_lands_inside(seed in 0u64..1000, x in sym(5), r in 0.0f64..0.5) {
        let ens = make_ensemble(5, 5, 8, seed, PsiKind::GaussianScaled).unwrap();
        let map = QuadraticMap::new(ens.w_stack.clone()).unwrap();
        let target = Vector::from_fn(8, |i, _| (i as f64 * 0.37).cos());
        let ball = FidelityBall::new(map, target, r);
        let p = ball.project(&x);
        prop_assert!(ball.residual(&p) <= r + 1e-8 * (1.0 + ball.target().norm()));
        let pp = ball.project(&p);
        prop_assert!((&pp - &p).norm() <= 1e-8 * (1.0 + p.norm()));
    }

    #[test]
    fn signal_error_ignores_global_sign(x in prop::collection::vec(-1.0f64..1.0, 6), s in prop::bool::ANY) {
        let x = Vector::from_vec(x);
        prop_assume!(x.norm() > 1e-3);
        let y = if s { -&x } else { x.clone() };
        prop_assert!(relative_signal_error(&y, &x).unwrap() <= 1e-15);
    }

    #[test]
    fn quantile_is_monotone(v in prop::collection::vec(0.0f64..10.0, 1..40), a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(empirical_quantile(&v, lo).unwrap() <= empirical_quantile(&v, hi).unwrap());
    }
}

#[test]
fn gram_spectrum_matches_dense_operator() {
    let ens = make_ensemble(4, 4, 6, 9, PsiKind::GaussianScaled).unwrap();
    let map = QuadraticMap::new(ens.w_stack.clone()).unwrap();
    // Columns of the dense 6 × 16 operator.
    let dense = Matrix::from_fn(6, 16, |i, c| {
        let mut e = Matrix::zeros(4, 4);
        e[(c % 4, c / 4)] = 1.0;
        map.apply(&e)[i]
    });
    let mut expected: Vec<f64> = (&dense * dense.transpose()).symmetric_eigenvalues().iter().copied().collect();
    let mut got: Vec<f64> = map.gram_eigenvalues().iter().copied().collect();
    expected.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&expected) {
        assert_relative_eq!(*a, *b, epsilon = 1e-10, max_relative = 1e-10);
    }
}
