//! Seeded random Pauli plants used by sweeps, benches and the CLI.
//!
//! All draws come from a `ChaCha8` stream seeded explicitly, so a seed fully
//! determines the fixture on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::StructureConstants;
use crate::dynamics::SystemSpec;
use crate::error::Result;
use crate::linalg::{RMatrix, RVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

pub fn normal_vector(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> RVector {
    RVector::from_fn(len, |_, _| scale * standard_normal(rng))
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> RMatrix {
    // fill row by row so the draw order matches the row-major config layout
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| scale * standard_normal(rng))
        .collect();
    RMatrix::from_row_slice(rows, cols, &data)
}

/// Gaussian `rows × cols` matrix of rank at most `rank`, as a product of
/// Gaussian factors.
pub fn low_rank_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rank: usize) -> RMatrix {
    if rank == 0 {
        return RMatrix::zeros(rows, cols);
    }
    normal_matrix(rng, rows, rank, 1.0) * normal_matrix(rng, rank, cols, 1.0)
}

/// Pauli plant with standard normal `E` (scaled), `M` (`channels × 3`) and `N`.
pub fn random_pauli_plant(seed: u64, channels: usize, energy_scale: f64) -> Result<SystemSpec> {
    let mut r = rng(seed);
    let e = normal_vector(&mut r, 3, energy_scale);
    let m = normal_matrix(&mut r, channels, 3, 1.0);
    let n = normal_vector(&mut r, channels, 1.0);
    SystemSpec::new(StructureConstants::pauli(), e, m, n)
}

/// Uniform point in the unit ball of `ℝ³`, a valid Pauli Bloch vector.
pub fn bloch_vector(rng: &mut ChaCha8Rng) -> RVector {
    let v = normal_vector(rng, 3, 1.0);
    let radius = rand::Rng::random::<f64>(rng).cbrt();
    let norm = v.norm();
    if norm == 0.0 {
        return RVector::zeros(3);
    }
    v * (radius / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::numerical_rank;

    #[test]
    fn seeds_are_reproducible() {
        let a = random_pauli_plant(7, 4, 1.0).unwrap();
        let b = random_pauli_plant(7, 4, 1.0).unwrap();
        let c = random_pauli_plant(8, 4, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn low_rank_has_requested_rank() {
        let mut r = rng(1);
        for k in 0..=3 {
            assert_eq!(numerical_rank(&low_rank_matrix(&mut r, 4, 3, k)), k);
        }
    }

    #[test]
    fn bloch_vectors_lie_in_unit_ball() {
        let mut r = rng(2);
        for _ in 0..100 {
            assert!(bloch_vector(&mut r).norm() <= 1.0);
        }
    }
}
