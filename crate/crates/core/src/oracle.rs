//! Exact finite-dimensional reference: generators as explicit matrices and a
//! density matrix, evaluated by brute-force matrix arithmetic. Serves as
//! ground truth for the algebraic and moment computations at time zero.

use crate::algebra::StructureConstants;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, min_hermitian_eigenvalue, CMatrix, CVector, RVector, C64};
use crate::moments::{reduce_entire, EntireFn};

const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRep {
    generators: Vec<CMatrix>,
    rho: CMatrix,
}

/// Pauli matrices `σ₁, σ₂, σ₃`.
pub fn pauli_matrices() -> [CMatrix; 3] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

impl MatrixRep {
    /// Checks that the generators are Hermitian, `ρ` is a density matrix and
    /// `X_j X_k = α_{jk} I + Σ_ℓ β_{jkℓ} X_ℓ` holds to `1e-12`.
    pub fn new(sc: &StructureConstants, generators: Vec<CMatrix>, rho: CMatrix) -> Result<Self> {
        let dim = rho.nrows();
        if generators.len() != sc.n() || rho.ncols() != dim || generators.iter().any(|g| g.shape() != (dim, dim)) {
            return Err(Error::Dimension(format!(
                "{} generators for n = {}, all must be {dim}x{dim}",
                generators.len(),
                sc.n()
            )));
        }
        for g in &generators {
            let skew = max_abs(&(g - g.adjoint()));
            if skew > STRUCTURE_TOL {
                return Err(Error::Asymmetric(format!("generator not Hermitian (residual {skew:e})")));
            }
        }
        check_density(&rho)?;
        let rep = MatrixRep { generators, rho };
        let residual = rep.verify_structure(sc)?;
        if residual > STRUCTURE_TOL {
            return Err(Error::Config(format!(
                "generators do not satisfy the structure constants (residual {residual:e})"
            )));
        }
        Ok(rep)
    }

    /// Pauli representation with density `(I + r·σ)/2`, whose mean vector
    /// is the Bloch vector `r`, `|r| ≤ 1`.
    pub fn pauli(bloch: &RVector) -> Result<Self> {
        if bloch.len() != 3 {
            return Err(Error::Dimension(format!("Bloch vector has {} entries", bloch.len())));
        }
        let s = pauli_matrices();
        let mut rho = CMatrix::identity(2, 2);
        for k in 0..3 {
            rho += &s[k] * C64::new(bloch[k], 0.0);
        }
        rho *= C64::new(0.5, 0.0);
        MatrixRep::new(&StructureConstants::pauli(), s.to_vec(), rho)
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    /// `uᵀX = Σ_k u_k X_k`
    pub fn operator(&self, u: &CVector) -> CMatrix {
        let d = self.dim();
        self.generators
            .iter()
            .zip(u.iter())
            .fold(CMatrix::zeros(d, d), |acc, (g, &c)| acc + g * c)
    }

    /// `Tr(ρ Z)` for any square `Z`.
    pub fn expect_complex(&self, z: &CMatrix) -> C64 {
        (&self.rho * z).trace()
    }

    /// `Tr(ρ Z)` for Hermitian `Z`.
    pub fn expect(&self, observable: &CMatrix) -> Result<f64> {
        let skew = max_abs(&(observable - observable.adjoint()));
        if skew > STRUCTURE_TOL * (1.0 + max_abs(observable)) {
            return Err(Error::Asymmetric(format!("observable not Hermitian (residual {skew:e})")));
        }
        let v = self.expect_complex(observable);
        debug_assert!(v.im.abs() <= 1e-14 * (1.0 + max_abs(observable)));
        Ok(v.re)
    }

    /// Mean vector `E X_k = Tr(ρ X_k)`.
    pub fn mean(&self) -> RVector {
        RVector::from_iterator(self.generators.len(), self.generators.iter().map(|g| self.expect_complex(g).re))
    }

    /// Max entrywise residual of `X_j X_k − α_{jk} I − Σ_ℓ β_{jkℓ} X_ℓ`.
    pub fn verify_structure(&self, sc: &StructureConstants) -> Result<f64> {
        let n = sc.n();
        if self.generators.len() != n {
            return Err(Error::Dimension(format!("{} generators for n = {n}", self.generators.len())));
        }
        let d = self.dim();
        let id = CMatrix::identity(d, d);
        let mut worst = 0.0_f64;
        for j in 0..n {
            for k in 0..n {
                let mut r = &self.generators[j] * &self.generators[k] - &id * sc.alpha()[(j, k)];
                for l in 0..n {
                    r -= &self.generators[l] * sc.beta(j, k, l);
                }
                worst = worst.max(max_abs(&r));
            }
        }
        Ok(worst)
    }

    /// Whether `I, X₁, …, Xₙ` are linearly independent.
    pub fn linearly_independent(&self) -> bool {
        let d = self.dim();
        let n = self.generators.len();
        let mut stacked = CMatrix::zeros(d * d, n + 1);
        let id = CMatrix::identity(d, d);
        for (col, m) in std::iter::once(&id).chain(self.generators.iter()).enumerate() {
            for (i, z) in m.iter().enumerate() {
                stacked[(i, col)] = *z;
            }
        }
        let sv = stacked.svd(false, false).singular_values;
        let smax = sv.iter().copied().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s > 1e-12 * smax).count() == n + 1
    }

    /// `E(u_qᵀX ⋯ u₁ᵀX)` by explicit matrix products.
    pub fn initial_moment(&self, directions: &[CVector]) -> C64 {
        let d = self.dim();
        let prod = directions
            .iter()
            .fold(CMatrix::identity(d, d), |acc, u| self.operator(u) * acc);
        self.expect_complex(&prod)
    }

    /// `f(uᵀX)` evaluated without the bordered generator. For `d = 2` the
    /// traceless part `N` of `uᵀX = tI + N` satisfies `N² = s²I`, so
    /// `f(uᵀX) = ½(f(t+s) + f(t−s)) I + (f(t+s) − f(t−s))/(2s) N`.
    pub fn apply(&self, f: &EntireFn, u: &CVector) -> Result<CMatrix> {
        let op = self.operator(u);
        if self.dim() != 2 {
            return f.eval_matrix(&op);
        }
        let t = op.trace() / 2.0;
        let nmat = &op - CMatrix::identity(2, 2) * t;
        let s = (nmat[(0, 0)] * nmat[(0, 0)] + nmat[(0, 1)] * nmat[(1, 0)]).sqrt();
        let (even, odd) = if s.norm() < 1e-7 {
            (f.eval_scalar(t), derivative(f, t))
        } else {
            let (fp, fm) = (f.eval_scalar(t + s), f.eval_scalar(t - s));
            ((fp + fm) / 2.0, (fp - fm) / (s * 2.0))
        };
        Ok(CMatrix::identity(2, 2) * even + nmat * odd)
    }

    /// `‖f(uᵀX) − (c₀ I + Σ_ℓ c_ℓ X_ℓ)‖_max` with `(c₀, c)` from
    /// [`reduce_entire`].
    pub fn verify_reduction(&self, sc: &StructureConstants, f: &EntireFn, u: &CVector) -> Result<f64> {
        let exact = self.apply(f, u)?;
        let affine = reduce_entire(sc, f, u)?;
        let d = self.dim();
        let reduced = CMatrix::identity(d, d) * affine.c0() + self.operator(&affine.coefficients());
        Ok(max_abs(&(exact - reduced)))
    }
}

fn derivative(f: &EntireFn, z: C64) -> C64 {
    match f {
        EntireFn::Polynomial(c) => c
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, (k, &ck)| acc * z + ck * k as f64),
        EntireFn::Exponential(c) => c * (c * z).exp(),
    }
}

fn check_density(rho: &CMatrix) -> Result<()> {
    let skew = max_abs(&(rho - rho.adjoint()));
    if skew > STRUCTURE_TOL {
        return Err(Error::Asymmetric(format!("density matrix not Hermitian (residual {skew:e})")));
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > STRUCTURE_TOL {
        return Err(Error::Config(format!("density matrix trace {tr} != 1")));
    }
    let floor = min_hermitian_eigenvalue(rho);
    if floor < -STRUCTURE_TOL {
        return Err(Error::Config(format!("density matrix not PSD (min eigenvalue {floor:e})")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_complex_vector;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn e(i: usize) -> RVector {
        let mut v = RVector::zeros(3);
        v[i] = 1.0;
        v
    }

    fn ce(i: usize) -> CVector {
        to_complex_vector(&e(i))
    }

    #[test]
    fn expectations() {
        let mixed = MatrixRep::pauli(&RVector::zeros(3)).unwrap();
        let up = MatrixRep::pauli(&e(2)).unwrap();
        let s = pauli_matrices();
        for sk in &s {
            assert_eq!(mixed.expect(sk).unwrap(), 0.0);
        }
        assert_eq!(up.expect(&s[2]).unwrap(), 1.0);
        assert_eq!(up.expect(&(&s[0] * &s[0])).unwrap(), 1.0);
        assert_eq!(up.mean(), e(2));
        let not_herm = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(up.expect(&not_herm).is_err());
    }

    #[test]
    fn structure_residuals() {
        let rep = MatrixRep::pauli(&RVector::zeros(3)).unwrap();
        let sc = StructureConstants::pauli();
        assert_eq!(rep.verify_structure(&sc).unwrap(), 0.0);
        assert!(rep.linearly_independent());

        let mut alpha = sc.alpha().clone();
        alpha[(0, 0)] += c(0.25, 0.0);
        let perturbed = StructureConstants::new(alpha, sc.beta_array().to_vec()).unwrap();
        assert_eq!(rep.verify_structure(&perturbed).unwrap(), 0.25);

        let zero_beta = StructureConstants::new(sc.alpha().clone(), vec![c(0.0, 0.0); 27]).unwrap();
        assert_eq!(rep.verify_structure(&zero_beta).unwrap(), 1.0);
    }

    #[test]
    fn inconsistent_generators_rejected() {
        let sc = StructureConstants::pauli();
        let mut s = pauli_matrices().to_vec();
        s.swap(0, 1);
        assert!(MatrixRep::new(&sc, s, CMatrix::identity(2, 2) * c(0.5, 0.0)).is_err());
        assert!(MatrixRep::pauli(&(e(0) * 2.0)).is_err());
    }

    #[test]
    fn initial_moments() {
        let mixed = MatrixRep::pauli(&RVector::zeros(3)).unwrap();
        assert_eq!(mixed.initial_moment(&[ce(0)]), c(0.0, 0.0));
        let r = RVector::from_vec(vec![0.1, -0.2, 0.6]);
        let rep = MatrixRep::pauli(&r).unwrap();
        assert!((rep.initial_moment(&[ce(0), ce(0)]) - c(1.0, 0.0)).norm() < 1e-15);
        // σ₂σ₁ = −iσ₃
        assert!((rep.initial_moment(&[ce(0), ce(1)]) - c(0.0, -r[2])).norm() < 1e-15);
        assert_eq!(mixed.initial_moment(&[ce(0), ce(1)]), c(0.0, 0.0));
    }

    #[test]
    fn reductions_against_closed_forms() {
        let sc = StructureConstants::pauli();
        let rep = MatrixRep::pauli(&RVector::zeros(3)).unwrap();
        let u = ce(2) * c(std::f64::consts::PI, 0.0);
        assert!(rep.verify_reduction(&sc, &EntireFn::exp_i(), &u).unwrap() <= 1e-12);
        let cube = reduce_entire(&sc, &EntireFn::monomial(3), &ce(1)).unwrap();
        assert_eq!(cube.coefficients(), ce(1));
        assert!(rep.verify_reduction(&sc, &EntireFn::monomial(3), &ce(1)).unwrap() <= 1e-14);
        let one = EntireFn::Polynomial(vec![c(1.0, 0.0)]);
        assert_eq!(reduce_entire(&sc, &one, &ce(0)).unwrap().c0(), c(1.0, 0.0));
        assert!(rep.verify_reduction(&sc, &one, &ce(0)).unwrap() == 0.0);
    }

    #[test]
    fn apply_matches_exponential_of_small_direction() {
        let rep = MatrixRep::pauli(&RVector::zeros(3)).unwrap();
        let u = CVector::from_vec(vec![c(1e-9, 0.0), c(0.0, 0.0), c(-2e-9, 0.0)]);
        let f = EntireFn::exp_i();
        let got = rep.apply(&f, &u).unwrap();
        let want = f.eval_matrix(&rep.operator(&u)).unwrap();
        assert!(max_abs(&(got - want)) < 1e-15);
    }
}
