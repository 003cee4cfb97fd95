//! Structure constants of an algebra of system variables closed under
//! multiplication, `X Xᵀ = α + β·X`, and the purely algebraic constructions
//! built on them.
//!
//! `β` is stored densely in `(j, k, ℓ)` order. Three slicings appear in the
//! coefficient formulas and each has its own accessor:
//!
//! * [`StructureConstants::section`] `β_ℓ = (β_{jkℓ})_{jk}`
//! * [`StructureConstants::row_section`] `β_{j••} = (β_{jkℓ})_{kℓ}`
//! * [`StructureConstants::middle_section`] `β_{•k•} = (β_{jkℓ})_{jℓ}`

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, to_complex, CMatrix, CVector, RMatrix, RVector, C64};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    n: usize,
    /// Hermitian. Real for the constants of a physical plant; a shift by a
    /// real vector introduces the imaginary part `−Θ·φ`.
    alpha: CMatrix,
    beta: Vec<C64>,
}

impl StructureConstants {
    /// Builds constants from `α` and the flat `(j, k, ℓ)` array of `β`.
    ///
    /// Only shapes and finiteness are checked here; the algebraic constraints
    /// are reported by [`StructureConstants::validate`].
    pub fn new(alpha: CMatrix, beta: Vec<C64>) -> Result<Self> {
        let n = alpha.nrows();
        if n == 0 || alpha.ncols() != n {
            return Err(Error::Dimension(format!(
                "alpha must be a non-empty square matrix, got {}x{}",
                alpha.nrows(),
                alpha.ncols()
            )));
        }
        if beta.len() != n * n * n {
            return Err(Error::Dimension(format!(
                "beta must have n^3 = {} entries, got {}",
                n * n * n,
                beta.len()
            )));
        }
        let finite = alpha.iter().chain(beta.iter()).all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::NonFinite(0.0));
        }
        Ok(StructureConstants { n, alpha, beta })
    }

    pub fn from_real_alpha(alpha: RMatrix, beta: Vec<C64>) -> Result<Self> {
        Self::new(to_complex(&alpha), beta)
    }

    /// `α = I₃`, `β = iΘ` with `θ_{jkℓ}` the Levi-Civita symbol: the algebra of
    /// the Pauli matrices.
    pub fn pauli() -> Self {
        let mut beta = vec![C64::new(0.0, 0.0); 27];
        for (j, k, l, s) in [
            (0, 1, 2, 1.0),
            (1, 2, 0, 1.0),
            (2, 0, 1, 1.0),
            (0, 2, 1, -1.0),
            (2, 1, 0, -1.0),
            (1, 0, 2, -1.0),
        ] {
            beta[j * 9 + k * 3 + l] = C64::new(0.0, s);
        }
        StructureConstants {
            n: 3,
            alpha: CMatrix::identity(3, 3),
            beta,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> &CMatrix {
        &self.alpha
    }

    /// Largest `|Im α_{jk}|`.
    pub fn alpha_imag_norm(&self) -> f64 {
        self.alpha.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    /// `Re α`, failing if `α` carries an imaginary part above `1e-12`.
    pub fn real_alpha(&self) -> Result<RMatrix> {
        let im = self.alpha_imag_norm();
        if im > 1e-12 {
            return Err(Error::ComplexAlpha(im));
        }
        Ok(self.alpha.map(|z| z.re))
    }

    /// Flat `(j, k, ℓ)` storage.
    pub fn beta_array(&self) -> &[C64] {
        &self.beta
    }

    #[inline]
    pub fn beta(&self, j: usize, k: usize, l: usize) -> C64 {
        self.beta[(j * self.n + k) * self.n + l]
    }

    #[inline]
    pub fn theta(&self, j: usize, k: usize, l: usize) -> f64 {
        self.beta(j, k, l).im
    }

    /// `β_ℓ = (β_{jkℓ})_{jk}`
    pub fn section(&self, l: usize) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |j, k| self.beta(j, k, l))
    }

    /// `β_{j••} = (β_{jkℓ})_{kℓ}`
    pub fn row_section(&self, j: usize) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |k, l| self.beta(j, k, l))
    }

    /// `β_{•k•} = (β_{jkℓ})_{jℓ}`
    pub fn middle_section(&self, k: usize) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |j, l| self.beta(j, k, l))
    }

    /// `Θ_ℓ = Im β_ℓ`
    pub fn theta_section(&self, l: usize) -> RMatrix {
        RMatrix::from_fn(self.n, self.n, |j, k| self.theta(j, k, l))
    }

    /// `Θ_{j••} = Im β_{j••}`
    pub fn theta_row_section(&self, j: usize) -> RMatrix {
        RMatrix::from_fn(self.n, self.n, |k, l| self.theta(j, k, l))
    }

    /// `Re β_{j••}`
    pub fn re_beta_row_section(&self, j: usize) -> RMatrix {
        RMatrix::from_fn(self.n, self.n, |k, l| self.beta(j, k, l).re)
    }

    /// `τ_ℓ = Tr β_ℓ`, real for Hermitian sections.
    pub fn tau(&self) -> RVector {
        RVector::from_fn(self.n, |l, _| (0..self.n).map(|j| self.beta(j, j, l).re).sum())
    }

    /// `Tr α + |τ|²/4`
    pub fn radius_squared(&self) -> f64 {
        let tr: f64 = (0..self.n).map(|j| self.alpha[(j, j)].re).sum();
        tr + self.tau().norm_squared() / 4.0
    }

    /// `γ = √(Tr α + |τ|²/4)`
    pub fn gamma(&self) -> Result<f64> {
        let r2 = self.radius_squared();
        if r2 < 0.0 {
            return Err(Error::Inadmissible(r2));
        }
        Ok(r2.sqrt())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Dimension(format!(
                "vector of length {len} for {} system variables",
                self.n
            )));
        }
        Ok(())
    }

    /// `β·u = Σ_ℓ β_ℓ u_ℓ`
    pub fn dot(&self, u: &CVector) -> Result<CMatrix> {
        self.check_len(u.len())?;
        Ok(CMatrix::from_fn(self.n, self.n, |j, k| {
            (0..self.n).map(|l| self.beta(j, k, l) * u[l]).sum()
        }))
    }

    /// `β⋄u = [β₁u … βₙu]`, so `(β⋄u)_{jℓ} = Σ_k β_{jkℓ} u_k`.
    pub fn diamond(&self, u: &CVector) -> Result<CMatrix> {
        self.check_len(u.len())?;
        Ok(CMatrix::from_fn(self.n, self.n, |j, l| {
            (0..self.n).map(|k| self.beta(j, k, l) * u[k]).sum()
        }))
    }

    /// `β·x` for real `x`.
    pub fn dot_real(&self, x: &RVector) -> Result<CMatrix> {
        self.check_len(x.len())?;
        Ok(CMatrix::from_fn(self.n, self.n, |j, k| {
            (0..self.n).map(|l| self.beta(j, k, l) * x[l]).sum()
        }))
    }

    /// `Θ·x = Σ_ℓ Θ_ℓ x_ℓ`
    pub fn theta_dot(&self, x: &RVector) -> Result<RMatrix> {
        self.check_len(x.len())?;
        Ok(RMatrix::from_fn(self.n, self.n, |j, k| {
            (0..self.n).map(|l| self.theta(j, k, l) * x[l]).sum()
        }))
    }

    /// `Θ⋄x`, so `(Θ⋄x)_{jℓ} = Σ_k θ_{jkℓ} x_k`.
    pub fn theta_diamond(&self, x: &RVector) -> Result<RMatrix> {
        self.check_len(x.len())?;
        Ok(RMatrix::from_fn(self.n, self.n, |j, l| {
            (0..self.n).map(|k| self.theta(j, k, l) * x[k]).sum()
        }))
    }

    /// Max residual of each algebraic constraint: Hermitian `α`, Hermitian
    /// sections `β_ℓ`, and the two associativity identities obtained by
    /// expanding `(X_j X_k) X_s = X_j (X_k X_s)`:
    ///
    /// * constant part `Σ_ℓ (α_{ℓs} β_{jkℓ} − α_{jℓ} β_{ksℓ}) = 0`
    /// * coefficient of `X_r`
    ///   `α_{jk} δ_{sr} − α_{ks} δ_{jr} + Σ_ℓ (β_{jkℓ} β_{ℓsr} − β_{ksℓ} β_{jℓr}) = 0`
    pub fn residuals(&self) -> Residuals {
        let n = self.n;
        let a = &self.alpha;
        let alpha_hermitian = max_abs(&(a - a.adjoint()));
        let mut section_hermitian = 0.0_f64;
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let d = self.beta(j, k, l) - self.beta(k, j, l).conj();
                    section_hermitian = section_hermitian.max(d.norm());
                }
            }
        }
        let mut con1 = 0.0_f64;
        let mut con2 = 0.0_f64;
        for j in 0..n {
            for k in 0..n {
                for s in 0..n {
                    let c1: C64 = (0..n)
                        .map(|l| a[(l, s)] * self.beta(j, k, l) - a[(j, l)] * self.beta(k, s, l))
                        .sum();
                    con1 = con1.max(c1.norm());
                    for r in 0..n {
                        let mut c2: C64 = (0..n)
                            .map(|l| {
                                self.beta(j, k, l) * self.beta(l, s, r)
                                    - self.beta(k, s, l) * self.beta(j, l, r)
                            })
                            .sum();
                        if s == r {
                            c2 += a[(j, k)];
                        }
                        if j == r {
                            c2 -= a[(k, s)];
                        }
                        con2 = con2.max(c2.norm());
                    }
                }
            }
        }
        Residuals {
            alpha_hermitian,
            section_hermitian,
            con1,
            con2,
        }
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let r = self.residuals();
        let violations = [
            (Check::AlphaHermitian, r.alpha_hermitian),
            (Check::SectionHermitian, r.section_hermitian),
            (Check::Con1, r.con1),
            (Check::Con2, r.con2),
        ]
        .into_iter()
        .filter(|&(_, res)| res.is_nan() || res > tol)
        .map(|(check, residual)| Violation { check, residual })
        .collect();
        ValidationReport { violations }
    }

    /// Fails with [`Error::InvalidConstants`] unless the report is empty.
    pub fn ensure_valid(&self, tol: f64) -> Result<()> {
        let report = self.validate(tol);
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConstants(report))
        }
    }

    /// `XᵀRX = ⟨R, α⟩_F + Σ_ℓ ⟨R, β_ℓ⟩_F X_ℓ` for real symmetric `R`.
    pub fn reduce_quadratic(&self, r: &RMatrix) -> Result<OperatorVectorAffine> {
        if r.shape() != (self.n, self.n) {
            return Err(Error::Dimension(format!(
                "R is {}x{}, expected {n}x{n}",
                r.nrows(),
                r.ncols(),
                n = self.n
            )));
        }
        let skew = max_abs(&(r - r.transpose()));
        if skew > 1e-12 * (1.0 + max_abs(r)) {
            return Err(Error::Asymmetric(format!("R (residual {skew:e})")));
        }
        let n = self.n;
        let mut c0 = C64::new(0.0, 0.0);
        let mut lin = CVector::zeros(n);
        for j in 0..n {
            for k in 0..n {
                let w = r[(j, k)];
                if w == 0.0 {
                    continue;
                }
                c0 += self.alpha[(j, k)] * w;
                for l in 0..n {
                    lin[l] += self.beta(j, k, l) * w;
                }
            }
        }
        Ok(OperatorVectorAffine::scalar(c0, lin))
    }

    /// Upper bounds `½|τ_k| + γ` on the operator norms of the variables.
    pub fn norm_bound(&self) -> Result<RVector> {
        let gamma = self.gamma()?;
        Ok(self.tau().map(|t| 0.5 * t.abs() + gamma))
    }

    /// Constants of the shifted variables `X + φ`:
    /// `α̃ = α − β·φ − φφᵀ`, `β̃_{jkℓ} = β_{jkℓ} + φ_k δ_{jℓ} + φ_j δ_{kℓ}`.
    pub fn shift(&self, phi: &RVector) -> Result<StructureConstants> {
        self.check_len(phi.len())?;
        let n = self.n;
        let alpha = &self.alpha - self.dot_real(phi)? - to_complex(&(phi * phi.transpose()));
        let mut beta = self.beta.clone();
        for j in 0..n {
            for k in 0..n {
                beta[(j * n + k) * n + j] += phi[k];
                beta[(j * n + k) * n + k] += phi[j];
            }
        }
        StructureConstants::new(alpha, beta)
    }

    /// Commutator array `[X_j, X_k]` evaluated at `X = x`:
    /// `2i(Im α + Θ·x)`, a purely imaginary antisymmetric (hence Hermitian)
    /// matrix.
    pub fn ccr_matrix(&self, x: &RVector) -> Result<CMatrix> {
        let t = self.theta_dot(x)?;
        Ok(CMatrix::from_fn(self.n, self.n, |j, k| {
            C64::new(0.0, 2.0 * (self.alpha[(j, k)].im + t[(j, k)]))
        }))
    }
}

/// Max absolute residual of each constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub alpha_hermitian: f64,
    pub section_hermitian: f64,
    pub con1: f64,
    pub con2: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.alpha_hermitian
            .max(self.section_hermitian)
            .max(self.con1)
            .max(self.con2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    AlphaHermitian,
    SectionHermitian,
    Con1,
    Con2,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::AlphaHermitian => "alpha_hermitian",
            Check::SectionHermitian => "section_hermitian",
            Check::Con1 => "con1",
            Check::Con2 => "con2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub check: Check,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn residual(&self, check: Check) -> Option<f64> {
        self.violations
            .iter()
            .find(|v| v.check == check)
            .map(|v| v.residual)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}={:e}", v.check.name(), v.residual)?;
        }
        Ok(())
    }
}

/// Vector of operators `c + L X`, one row per component.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorVectorAffine {
    pub constant: CVector,
    pub linear: CMatrix,
}

impl OperatorVectorAffine {
    /// Single operator `c₀ I + Σ_ℓ c_ℓ X_ℓ`.
    pub fn scalar(c0: C64, linear: CVector) -> Self {
        let n = linear.len();
        OperatorVectorAffine {
            constant: CVector::from_element(1, c0),
            linear: CMatrix::from_iterator(1, n, linear.iter().copied()),
        }
    }

    pub fn len(&self) -> usize {
        self.constant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constant.is_empty()
    }

    /// Constant of the first component.
    pub fn c0(&self) -> C64 {
        self.constant[0]
    }

    /// Linear coefficients of the first component.
    pub fn coefficients(&self) -> CVector {
        self.linear.row(0).transpose()
    }

    /// Expectation given the mean vector: `c + L μ`.
    pub fn expect(&self, mu: &RVector) -> CVector {
        &self.constant + &self.linear * crate::linalg::to_complex_vector(mu)
    }
}
