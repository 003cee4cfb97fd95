//! Statistics of the system variables computed from the mean alone:
//! reduction of entire functions of `uᵀX` to affine forms, the
//! quasi-characteristic function, multi-point moments and two-point
//! covariances.
//!
//! The reduction rests on the bordered generator
//! `G(u) = [[0, uᵀ], [αu, β⋄u]]`: right multiplication of `c₀ + cᵀX` by `uᵀX`
//! maps the row `[c₀, cᵀ]` to `[c₀, cᵀ] G(u)`, hence
//! `f(uᵀX) = [1, 0ᵀ] f(G(u)) [1; X]`.

use crate::algebra::{OperatorVectorAffine, StructureConstants};
use crate::dynamics::{covariance_of_mean, invariant_mean, CoefficientSet, MeanPath};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{expm, expm_and_psi, to_complex, to_complex_vector, CMatrix, CVector, RVector, C64};

const SERIES_FLOOR: f64 = 1e-14;
const SERIES_CAP: usize = 200;

/// An entire function with a matrix evaluator.
#[derive(Debug, Clone, PartialEq)]
pub enum EntireFn {
    /// `Σ_k c_k z^k`
    Polynomial(Vec<C64>),
    /// `e^{cz}`
    Exponential(C64),
}

impl EntireFn {
    pub fn identity() -> Self {
        EntireFn::Polynomial(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
    }

    pub fn monomial(k: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); k + 1];
        c[k] = C64::new(1.0, 0.0);
        EntireFn::Polynomial(c)
    }

    /// `e^{iz}`
    pub fn exp_i() -> Self {
        EntireFn::Exponential(C64::new(0.0, 1.0))
    }

    /// Taylor coefficients; for the exponential the series is truncated once
    /// terms fall below `1e-14` or after 200 terms.
    pub fn coefficients(&self) -> Vec<C64> {
        match self {
            EntireFn::Polynomial(c) => c.clone(),
            EntireFn::Exponential(c) => {
                let mut out = vec![C64::new(1.0, 0.0)];
                let mut term = C64::new(1.0, 0.0);
                for k in 1..SERIES_CAP {
                    term = term * c / k as f64;
                    if term.norm() < SERIES_FLOOR && k as f64 > c.norm() {
                        break;
                    }
                    out.push(term);
                }
                out
            }
        }
    }

    pub fn has_real_coefficients(&self) -> bool {
        match self {
            EntireFn::Polynomial(c) => c.iter().all(|z| z.im == 0.0),
            EntireFn::Exponential(c) => c.im == 0.0,
        }
    }

    pub fn eval_scalar(&self, z: C64) -> C64 {
        match self {
            EntireFn::Polynomial(c) => c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &ck| acc * z + ck),
            EntireFn::Exponential(c) => (c * z).exp(),
        }
    }

    /// Horner evaluation for polynomials, Padé exponential otherwise.
    pub fn eval_matrix(&self, m: &CMatrix) -> Result<CMatrix> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::NotSquare { rows: n, cols: m.ncols() });
        }
        match self {
            EntireFn::Polynomial(c) => {
                let id = CMatrix::identity(n, n);
                Ok(c.iter()
                    .rev()
                    .fold(CMatrix::zeros(n, n), |acc, &ck| acc * m + &id * ck))
            }
            EntireFn::Exponential(c) => expm(&(m * *c)),
        }
    }
}

/// `G(u) = [[0, uᵀ], [αu, β⋄u]]` of size `n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGenerator {
    matrix: CMatrix,
}

impl AugmentedGenerator {
    pub fn new(sc: &StructureConstants, u: &CVector) -> Result<Self> {
        let n = sc.n();
        let diamond = sc.diamond(u)?;
        let au = sc.alpha() * u;
        let mut g = CMatrix::zeros(n + 1, n + 1);
        for k in 0..n {
            g[(0, k + 1)] = u[k];
            g[(k + 1, 0)] = au[k];
        }
        g.view_mut((1, 1), (n, n)).copy_from(&diamond);
        Ok(AugmentedGenerator { matrix: g })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// First row of `f(G)`.
    pub fn reduce(&self, f: &EntireFn) -> Result<CVector> {
        Ok(f.eval_matrix(&self.matrix)?.row(0).transpose())
    }
}

fn first_row_affine(row: &CVector) -> OperatorVectorAffine {
    let n = row.len() - 1;
    OperatorVectorAffine::scalar(row[0], row.rows(1, n).into_owned())
}

/// `f(uᵀX) = c₀ + cᵀX`.
pub fn reduce_entire(sc: &StructureConstants, f: &EntireFn, u: &CVector) -> Result<OperatorVectorAffine> {
    Ok(first_row_affine(&AugmentedGenerator::new(sc, u)?.reduce(f)?))
}

/// `E f(uᵀX)` in any state with mean `μ`.
pub fn expect_entire(sc: &StructureConstants, f: &EntireFn, u: &CVector, mu: &RVector) -> Result<C64> {
    let row = AugmentedGenerator::new(sc, u)?.reduce(f)?;
    if mu.len() + 1 != row.len() {
        return Err(Error::Dimension(format!("mean has {} entries, n = {}", mu.len(), row.len() - 1)));
    }
    Ok(row[0] + row.rows(1, mu.len()).iter().zip(mu.iter()).map(|(c, m)| c * m).sum::<C64>())
}

/// Quasi-characteristic function `Φ(u) = E e^{iuᵀX}` from the mean vector.
pub fn qcf(sc: &StructureConstants, mu: &RVector, u: &RVector) -> Result<C64> {
    expect_entire(sc, &EntireFn::exp_i(), &to_complex_vector(u), mu)
}

pub fn qcf_grid(sc: &StructureConstants, mu: &RVector, us: &[RVector], exec: Execution) -> Result<Vec<C64>> {
    exec.try_map(us, |u| qcf(sc, mu, u))
}

/// Infinite-horizon growth rate `lim (1/T) ∫₀ᵀ E Σ_k f_k(u_kᵀX(t)) dt`,
/// equal to `Σ_k E_∞ f_k(u_kᵀX)` in the invariant state.
pub fn growth_rate(coeffs: &CoefficientSet, terms: &[(EntireFn, RVector)]) -> Result<f64> {
    let mu = invariant_mean(coeffs)?;
    let sc = coeffs.constants();
    let mut total = C64::new(0.0, 0.0);
    for (f, u) in terms {
        total += expect_entire(sc, f, &to_complex_vector(u), &mu)?;
    }
    Ok(total.re)
}

/// Times `t₁ ≤ … ≤ t_q` and directions `u₁, …, u_q` of the moment
/// `E(u_qᵀX(t_q) ⋯ u₁ᵀX(t₁))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentQuery {
    pub times: Vec<f64>,
    pub directions: Vec<CVector>,
}

impl MomentQuery {
    pub fn new(times: Vec<f64>, directions: Vec<CVector>) -> Result<Self> {
        if times.len() != directions.len() {
            return Err(Error::Dimension(format!(
                "{} times for {} directions",
                times.len(),
                directions.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Grid("non-finite moment time".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::TimeOrder);
        }
        Ok(MomentQuery { times, directions })
    }

    pub fn from_real(times: Vec<f64>, directions: &[RVector]) -> Result<Self> {
        Self::new(times, directions.iter().map(to_complex_vector).collect())
    }

    pub fn order(&self) -> usize {
        self.times.len()
    }
}

/// Multi-point moment by forward recurrence on
/// `ℓ_k = E X(t_k) u_{k−1}ᵀX(t_{k−1}) ⋯ u₁ᵀX(t₁)`:
///
/// ```text
/// ℓ₁ = μ(t₁)
/// ℓ_k = (e^{ΔA} β⋄u_{k−1} + Ψ(Δ) b u_{k−1}ᵀ) ℓ_{k−1} + M_{k−2} e^{ΔA} α u_{k−1}
/// M_k = u_kᵀ ℓ_k,  M₀ = 1
/// ```
///
/// with `Δ = t_k − t_{k−1}`. Cost is `O(q n³)`.
pub fn multi_moment(coeffs: &CoefficientSet, mean: &dyn MeanPath, query: &MomentQuery) -> Result<C64> {
    let q = query.order();
    let one = C64::new(1.0, 0.0);
    if q == 0 {
        return Ok(one);
    }
    let sc = coeffs.constants();
    let n = sc.n();
    if query.directions.iter().any(|u| u.len() != n) {
        return Err(Error::Dimension(format!("moment directions must have {n} entries")));
    }
    if query.times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::TimeOrder);
    }
    let b = to_complex_vector(&coeffs.b);
    let mut ell = to_complex_vector(&mean.mean(query.times[0])?);
    let mut m_prev = one;
    let mut m_cur = ell.dot(&query.directions[0]);
    for k in 1..q {
        let dt = query.times[k] - query.times[k - 1];
        let u = &query.directions[k - 1];
        let (e, psi) = expm_and_psi(&coeffs.a, dt)?;
        let (e, psi) = (to_complex(&e), to_complex(&psi));
        let step = &e * (sc.diamond(u)? * &ell + sc.alpha() * u * m_prev) + psi * &b * u.dot(&ell);
        ell = step;
        m_prev = m_cur;
        m_cur = ell.dot(&query.directions[k]);
    }
    Ok(m_cur)
}

pub fn multi_moment_batch(
    coeffs: &CoefficientSet,
    mean: &dyn MeanPath,
    queries: &[MomentQuery],
    exec: Execution,
) -> Result<Vec<C64>> {
    exec.try_map(queries, |q| multi_moment(coeffs, mean, q))
}

/// Two-point second moments `E X(t) X(s)ᵀ = e^{(t−s)A}(α + β·μ(s)) + Ψ(t−s) b μ(s)ᵀ`
/// for `t ≥ s`.
pub fn two_point_moment(coeffs: &CoefficientSet, mean: &dyn MeanPath, s: f64, t: f64) -> Result<CMatrix> {
    if t < s {
        return Err(Error::TimeOrder);
    }
    let sc = coeffs.constants();
    let mu = mean.mean(s)?;
    let (e, psi) = expm_and_psi(&coeffs.a, t - s)?;
    let second = sc.alpha() + sc.dot_real(&mu)?;
    Ok(to_complex(&e) * second + to_complex(&(psi * &coeffs.b * mu.transpose())))
}

/// `cov(X(t), X(s)) = e^{(t−s)A}(α + β·μ(s) − μ(s)μ(s)ᵀ)` for `t ≥ s`.
pub fn two_point_cov(coeffs: &CoefficientSet, mean: &dyn MeanPath, s: f64, t: f64) -> Result<CMatrix> {
    if t < s {
        return Err(Error::TimeOrder);
    }
    let mu = mean.mean(s)?;
    let e = crate::linalg::expm(&(&coeffs.a * (t - s)))?;
    Ok(to_complex(&e) * covariance_of_mean(coeffs.constants(), &mu)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{synthesize, ClosedFormMean, ConstantMean, SystemSpec};
    use crate::linalg::{max_abs, RMatrix};

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

    fn fixture() -> CoefficientSet {
        let m = RMatrix::from_row_slice(4, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, -0.3, 0.5, 0.0, 1.0, 0.0, 0.4, 0.1]);
        let spec = SystemSpec::new(
            StructureConstants::pauli(),
            RVector::from_vec(vec![0.3, -0.2, 0.5]),
            m,
            RVector::from_vec(vec![0.1, 0.0, -0.2, 0.3]),
        )
        .unwrap();
        synthesize(&spec).unwrap()
    }

    #[test]
    fn identity_function_reduces_to_u() {
        let sc = StructureConstants::pauli();
        let u = CVector::from_vec(vec![c(0.3, 0.0), c(-1.0, 0.5), c(2.0, 0.0)]);
        let r = reduce_entire(&sc, &EntireFn::identity(), &u).unwrap();
        assert_eq!(r.c0(), c(0.0, 0.0));
        assert_eq!(r.coefficients(), u);
    }

    #[test]
    fn pauli_square_and_exponential() {
        let sc = StructureConstants::pauli();
        let r = reduce_entire(&sc, &EntireFn::monomial(2), &ce(0)).unwrap();
        assert_eq!(r.c0(), c(1.0, 0.0));
        assert_eq!(r.coefficients(), CVector::zeros(3));

        let u = ce(2) * c(std::f64::consts::PI, 0.0);
        let r = reduce_entire(&sc, &EntireFn::exp_i(), &u).unwrap();
        assert!((r.c0() - c(-1.0, 0.0)).norm() < 1e-14);
        assert!(r.coefficients().norm() < 1e-14);
    }

    #[test]
    fn entire_fn_series_matches_evaluator() {
        let f = EntireFn::exp_i();
        let z = c(0.7, -0.2);
        let series: C64 = f.coefficients().iter().rev().fold(c(0.0, 0.0), |acc, &ck| acc * z + ck);
        assert!((series - f.eval_scalar(z)).norm() < 1e-14);
        assert!(!f.has_real_coefficients());
        assert!(EntireFn::monomial(3).has_real_coefficients());
    }

    #[test]
    fn qcf_examples() {
        let sc = StructureConstants::pauli();
        assert_eq!(qcf(&sc, &e(2), &RVector::zeros(3)).unwrap(), c(1.0, 0.0));
        for s in [0.3, 1.0, 2.5] {
            let phi = qcf(&sc, &e(2), &(e(2) * s)).unwrap();
            assert!((phi - c(s.cos(), s.sin())).norm() < 1e-13);
        }
        let u = RVector::from_vec(vec![0.4, -1.1, 0.7]);
        let phi = qcf(&sc, &RVector::zeros(3), &u).unwrap();
        assert!((phi - c(u.norm().cos(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn first_and_equal_time_second_moments() {
        let coeffs = fixture();
        let sc = coeffs.constants();
        let mean = ClosedFormMean::new(&coeffs, 0.0, RVector::from_vec(vec![0.1, 0.5, -0.3])).unwrap();
        let u1 = CVector::from_vec(vec![c(0.2, 0.0), c(1.0, 0.0), c(-0.4, 0.0)]);
        let u2 = CVector::from_vec(vec![c(-0.7, 0.0), c(0.3, 0.0), c(0.9, 0.0)]);
        let t = 0.8;
        let mu = to_complex_vector(&mean.mean(t).unwrap());
        let m1 = multi_moment(&coeffs, &mean, &MomentQuery::new(vec![t], vec![u1.clone()]).unwrap()).unwrap();
        assert_eq!(m1, mu.dot(&u1));
        let m2 = multi_moment(&coeffs, &mean, &MomentQuery::new(vec![t, t], vec![u1.clone(), u2.clone()]).unwrap()).unwrap();
        let want = (sc.alpha() + sc.dot(&mu).unwrap()).transpose() * &u2;
        assert!((m2 - want.dot(&u1)).norm() < 1e-13);
    }

    #[test]
    fn pauli_cube_reduces_to_mean() {
        let coeffs = fixture();
        let mean = ClosedFormMean::new(&coeffs, 0.0, RVector::from_vec(vec![0.6, 0.0, 0.8])).unwrap();
        let t = 1.3;
        let q = MomentQuery::new(vec![t; 3], vec![ce(0); 3]).unwrap();
        let m3 = multi_moment(&coeffs, &mean, &q).unwrap();
        assert!((m3 - c(mean.mean(t).unwrap()[0], 0.0)).norm() < 1e-13);
    }

    #[test]
    fn decreasing_times_rejected() {
        assert!(matches!(
            MomentQuery::new(vec![1.0, 0.5], vec![ce(0), ce(1)]),
            Err(Error::TimeOrder)
        ));
        let coeffs = fixture();
        let mean = ConstantMean(RVector::zeros(3));
        assert!(matches!(two_point_cov(&coeffs, &mean, 1.0, 0.5), Err(Error::TimeOrder)));
    }

    #[test]
    fn two_point_cov_at_equal_times() {
        let coeffs = fixture();
        let mean = ClosedFormMean::new(&coeffs, 0.0, RVector::from_vec(vec![0.0, 0.3, 0.3])).unwrap();
        let s = 0.4;
        let got = two_point_cov(&coeffs, &mean, s, s).unwrap();
        let want = covariance_of_mean(coeffs.constants(), &mean.mean(s).unwrap()).unwrap();
        assert!(max_abs(&(got - want)) < 1e-14);
    }

    #[test]
    fn two_point_cov_derivative() {
        let coeffs = fixture();
        let mean = ClosedFormMean::new(&coeffs, 0.0, RVector::from_vec(vec![0.2, 0.3, -0.1])).unwrap();
        let s = 0.5;
        let h = 1e-4;
        let at = |dt: f64| two_point_cov(&coeffs, &mean, s, s + dt).unwrap();
        // one-sided second-order difference
        let fd = (at(h) * c(4.0, 0.0) - at(0.0) * c(3.0, 0.0) - at(2.0 * h)) / c(2.0 * h, 0.0);
        let want = to_complex(&coeffs.a) * two_point_cov(&coeffs, &mean, s, s).unwrap();
        assert!(max_abs(&(fd - want)) < 1e-6);
    }

    #[test]
    fn growth_rate_examples() {
        let coeffs = fixture();
        let one = EntireFn::Polynomial(vec![c(1.0, 0.0)]);
        let r = growth_rate(&coeffs, &[(one.clone(), e(0)), (one, e(1))]).unwrap();
        assert!((r - 2.0).abs() < 1e-14);
        let sq: Vec<_> = (0..3).map(|i| (EntireFn::monomial(2), e(i))).collect();
        assert!((growth_rate(&coeffs, &sq).unwrap() - 3.0).abs() < 1e-12);
    }
}
