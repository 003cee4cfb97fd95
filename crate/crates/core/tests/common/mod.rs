#![allow(dead_code)]

use quasilinear::dynamics::{synthesize, CoefficientSet, SystemSpec};
use quasilinear::linalg::{to_complex_vector, CVector, RMatrix, RVector};
use quasilinear::presets;
use quasilinear::StructureConstants;

pub fn e(i: usize) -> RVector {
    let mut v = RVector::zeros(3);
    v[i] = 1.0;
    v
}

pub fn ce(i: usize) -> CVector {
    to_complex_vector(&e(i))
}

/// Pauli plant with `M = [e₁ᵀ; e₂ᵀ; e₃ᵀ; 0]`, `E = 0`, `N = 0`.
pub fn fixed_point_spec() -> SystemSpec {
    let mut m = RMatrix::zeros(4, 3);
    for i in 0..3 {
        m[(i, i)] = 1.0;
    }
    SystemSpec::new(StructureConstants::pauli(), RVector::zeros(3), m, RVector::zeros(4)).unwrap()
}

pub fn seeded_coeffs(seed: u64) -> CoefficientSet {
    synthesize(&presets::random_pauli_plant(seed, 4, 1.0).unwrap()).unwrap()
}

pub fn two_outputs() -> RMatrix {
    RMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
}
