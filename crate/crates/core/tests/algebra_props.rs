#![allow(clippy::needless_range_loop)]

mod common;

use proptest::prelude::*;
use quasilinear::algebra::{StructureConstants, DEFAULT_TOL};
use quasilinear::linalg::{max_abs, CMatrix, CVector, RVector, C64};
use quasilinear::oracle::{pauli_matrices, MatrixRep};

fn cvec() -> impl Strategy<Value = CVector> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3)
        .prop_map(|v| CVector::from_iterator(3, v.into_iter().map(|(r, i)| C64::new(r, i))))
}

fn rvec() -> impl Strategy<Value = RVector> {
    prop::collection::vec(-5.0..5.0f64, 3).prop_map(RVector::from_vec)
}

proptest! {
    #[test]
    fn dot_and_diamond_are_adjoint_slicings(u in cvec(), v in cvec(), phi in rvec()) {
        for sc in [StructureConstants::pauli(), StructureConstants::pauli().shift(&phi).unwrap()] {
            let lhs = sc.dot(&u).unwrap() * &v;
            let rhs = sc.diamond(&v).unwrap() * &u;
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + u.norm() * v.norm() * (1.0 + phi.norm())));
        }
    }

    #[test]
    fn shift_preserves_radius_and_constraints(phi in rvec()) {
        let sc = StructureConstants::pauli();
        let s = sc.shift(&phi).unwrap();
        let g0 = sc.gamma().unwrap();
        prop_assert!((s.gamma().unwrap() - g0).abs() <= 1e-10 * g0);
        prop_assert!((s.tau() - &phi * 2.0).norm() <= 1e-12 * (1.0 + phi.norm()));
        let r = s.residuals();
        prop_assert!(r.max() <= 1e-12 * (1.0 + phi.norm_squared()));
        let back = s.shift(&(-&phi)).unwrap();
        prop_assert!(max_abs(&(back.alpha() - sc.alpha())) <= 1e-12 * (1.0 + phi.norm_squared()));
    }

    #[test]
    fn shifted_oracle_matches_shifted_constants(phi in rvec()) {
        // X + φ with X the Pauli matrices obeys the shifted constants exactly
        let s = pauli_matrices();
        let shifted: Vec<CMatrix> = (0..3)
            .map(|k| &s[k] + CMatrix::identity(2, 2) * C64::new(phi[k], 0.0))
            .collect();
        let sc = StructureConstants::pauli().shift(&phi).unwrap();
        let d = 2;
        let id = CMatrix::identity(d, d);
        for j in 0..3 {
            for k in 0..3 {
                let mut r = &shifted[j] * &shifted[k] - &id * sc.alpha()[(j, k)];
                for l in 0..3 {
                    r -= &shifted[l] * sc.beta(j, k, l);
                }
                prop_assert!(max_abs(&r) <= 1e-12 * (1.0 + phi.norm_squared()));
            }
        }
    }
}

#[test]
fn pauli_products_match_matrix_oracle_exactly() {
    let rep = MatrixRep::pauli(&RVector::zeros(3)).unwrap();
    assert_eq!(rep.verify_structure(&StructureConstants::pauli()).unwrap(), 0.0);
    assert!(rep.linearly_independent());
}

#[test]
fn commutators_match_ccr_array() {
    let sc = StructureConstants::pauli();
    let s = pauli_matrices();
    for j in 0..3 {
        for k in 0..3 {
            let comm = &s[j] * &s[k] - &s[k] * &s[j];
            let mut want = CMatrix::zeros(2, 2);
            for l in 0..3 {
                want += &s[l] * C64::new(0.0, 2.0 * sc.theta(j, k, l));
            }
            assert_eq!(comm, want);
            // ccr_matrix at x = e_l picks the coefficient of σ_l
            for l in 0..3 {
                let k_l = sc.ccr_matrix(&common::e(l)).unwrap();
                assert_eq!(k_l[(j, k)], C64::new(0.0, 2.0 * sc.theta(j, k, l)));
            }
        }
    }
}

#[test]
fn norm_bound_dominates_operator_norms() {
    let sc = StructureConstants::pauli();
    let bound = sc.norm_bound().unwrap();
    for (k, s) in pauli_matrices().iter().enumerate() {
        let op_norm = s.clone().svd(false, false).singular_values.max();
        assert!(bound[k] >= op_norm);
    }
    let phi = RVector::from_vec(vec![0.5, -1.0, 2.0]);
    let shifted = sc.shift(&phi).unwrap();
    let bound = shifted.norm_bound().unwrap();
    for (k, s) in pauli_matrices().iter().enumerate() {
        let op = s + CMatrix::identity(2, 2) * C64::new(phi[k], 0.0);
        let op_norm = op.svd(false, false).singular_values.max();
        assert!(bound[k] + 1e-12 >= op_norm);
    }
    assert!(shifted.validate(DEFAULT_TOL).is_empty());
}
