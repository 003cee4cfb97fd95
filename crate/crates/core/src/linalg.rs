//! Dense numerical kernels shared by the moment, invariant-state and
//! observer computations: matrix exponential, the propagator integral
//! `Ψ(t) = ∫₀ᵗ e^{sA} ds`, Lyapunov and Riccati solvers, Hurwitz tests and
//! explicit ODE integrators.

use nalgebra::linalg::Schur;
use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;
pub type CVector = DVector<C64>;
pub type RVector = DVector<f64>;

const SCHUR_MAX_ITER: usize = 10_000;

pub fn to_complex(a: &RMatrix) -> CMatrix {
    a.map(|x| C64::new(x, 0.0))
}

pub fn to_complex_vector(v: &RVector) -> CVector {
    v.map(|x| C64::new(x, 0.0))
}

pub fn real_part(a: &CMatrix) -> RMatrix {
    a.map(|z| z.re)
}

pub fn imag_part(a: &CMatrix) -> RMatrix {
    a.map(|z| z.im)
}

/// `(A + Aᵀ)/2`
pub fn symmetrize(a: &RMatrix) -> RMatrix {
    (a + a.transpose()) * 0.5
}

/// `(A + A*)/2`
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn max_abs<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.modulus()))
}

fn one_norm<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn ensure_square<T>(a: &DMatrix<T>) -> Result<()>
where
    T: nalgebra::Scalar,
{
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

/// Smallest eigenvalue of the Hermitian part of `a`.
pub fn min_hermitian_eigenvalue(a: &CMatrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    hermitian_part(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn min_symmetric_eigenvalue(a: &RMatrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    symmetrize(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error bounds for the diagonal Padé approximants in 1-norm.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant of degree 3, 5, 7, 9 or 13 chosen from the 1-norm.
pub fn expm<T>(a: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    ensure_square(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::NonFinite(0.0));
    }
    let low: [(f64, &[f64]); 4] = [
        (THETA3, &PADE3),
        (THETA5, &PADE5),
        (THETA7, &PADE7),
        (THETA9, &PADE9),
    ];
    for (theta, coeffs) in low {
        if norm <= theta {
            return pade_low(a, coeffs);
        }
    }
    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let scaled = a * T::from_real(2f64.powi(-s));
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_solve<T>(u: DMatrix<T>, v: DMatrix<T>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let p = &v + &u;
    let q = v - u;
    q.lu().solve(&p).ok_or(Error::Singular("matrix exponential"))
}

fn pade_low<T>(a: &DMatrix<T>, b: &[f64]) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.nrows();
    let a2 = a * a;
    let c = |x: f64| T::from_real(x);
    // even powers I, A², A⁴, ...
    let mut even = vec![DMatrix::<T>::identity(n, n), a2.clone()];
    while 2 * even.len() < b.len() {
        let next = even.last().unwrap() * &a2;
        even.push(next);
    }
    let mut u_inner = DMatrix::<T>::zeros(n, n);
    let mut v = DMatrix::<T>::zeros(n, n);
    for (k, &coef) in b.iter().enumerate() {
        if k % 2 == 0 {
            v += &even[k / 2] * c(coef);
        } else {
            u_inner += &even[k / 2] * c(coef);
        }
    }
    pade_solve(a * u_inner, v)
}

fn pade13<T>(a: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.nrows();
    let b = PADE13;
    let c = |x: f64| T::from_real(x);
    let id = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let w1 = &a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]);
    let w2 = &a6 * &w1 + &a6 * c(b[7]) + &a4 * c(b[5]) + &a2 * c(b[3]) + &id * c(b[1]);
    let u = a * w2;
    let z1 = &a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]);
    let v = &a6 * &z1 + &a6 * c(b[6]) + &a4 * c(b[4]) + &a2 * c(b[2]) + &id * c(b[0]);
    pade_solve(u, v)
}

/// `Ψ(t) = ∫₀ᵗ e^{sA} ds`, the entire function `(e^{tz} − 1)/z` of `A`.
///
/// Computed from the exponential of the block matrix `[[tA, tI], [0, 0]]`,
/// whose upper-right block is `Ψ(t)`. Valid for singular `A`.
pub fn psi(a: &RMatrix, t: f64) -> Result<RMatrix> {
    Ok(expm_and_psi(a, t)?.1)
}

/// `(e^{tA}, Ψ(t))` from a single block exponential.
pub fn expm_and_psi(a: &RMatrix, t: f64) -> Result<(RMatrix, RMatrix)> {
    ensure_square(a)?;
    let n = a.nrows();
    let mut block = RMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(a * t));
    block
        .view_mut((0, n), (n, n))
        .copy_from(&(RMatrix::identity(n, n) * t));
    let e = expm(&block)?;
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
    ))
}

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub hurwitz: bool,
    /// Largest real part over the spectrum.
    pub abscissa: f64,
}

pub fn eigenvalues(a: &RMatrix) -> Result<Vec<C64>> {
    ensure_square(a)?;
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or(Error::Eigen)?;
    let ev: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen);
    }
    Ok(ev)
}

pub fn is_hurwitz(a: &RMatrix) -> Result<Stability> {
    let abscissa = eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Stability {
        hurwitz: abscissa < 0.0,
        abscissa,
    })
}

// ---------------------------------------------------------------------------
// Lyapunov equation
// ---------------------------------------------------------------------------

/// Solves `AΓ + ΓAᵀ + Q = 0` for Hurwitz real `A` and Hermitian `Q`.
///
/// Complex Schur form `A = U T U*` reduces the equation to the triangular
/// system `T Y + Y T* = −U* Q U`, solved entrywise by back substitution.
pub fn solve_lyapunov(a: &RMatrix, q: &CMatrix) -> Result<CMatrix> {
    ensure_square(a)?;
    let n = a.nrows();
    if q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Lyapunov: A is {n}x{n}, Q is {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let skew = max_abs(&(q - q.adjoint()));
    if skew > 1e-10 * (1.0 + max_abs(q)) {
        return Err(Error::Asymmetric(format!(
            "Lyapunov right-hand side is not Hermitian (residual {skew:e})"
        )));
    }
    let stab = is_hurwitz(a)?;
    if !stab.hurwitz {
        return Err(Error::NotHurwitz(stab.abscissa));
    }
    let schur =
        Schur::try_new(to_complex(a), f64::EPSILON, SCHUR_MAX_ITER).ok_or(Error::Eigen)?;
    let (u, t) = schur.unpack();
    let qt = u.adjoint() * q * &u;
    let mut y = CMatrix::zeros(n, n);
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let mut acc = -qt[(i, j)];
            for k in i + 1..n {
                acc -= t[(i, k)] * y[(k, j)];
            }
            for k in j + 1..n {
                acc -= y[(i, k)] * t[(j, k)].conj();
            }
            y[(i, j)] = acc / (t[(i, i)] + t[(j, j)].conj());
        }
    }
    Ok(hermitian_part(&(&u * y * u.adjoint())))
}

/// Real-valued convenience wrapper around [`solve_lyapunov`].
pub fn solve_lyapunov_real(a: &RMatrix, q: &RMatrix) -> Result<RMatrix> {
    Ok(symmetrize(&real_part(&solve_lyapunov(a, &to_complex(q))?)))
}

// ---------------------------------------------------------------------------
// Algebraic Riccati equation (filtering form)
// ---------------------------------------------------------------------------

/// Data of the filtering ARE
/// `AP + PAᵀ + Σ − (PCᵀ + G)F⁻¹(CP + Gᵀ) = 0` with cross term `G = B Dᵀ`.
#[derive(Debug, Clone)]
pub struct AreData {
    pub a: RMatrix,
    pub c: RMatrix,
    pub sigma: RMatrix,
    pub cross: RMatrix,
    pub f: RMatrix,
    f_inv: RMatrix,
}

impl AreData {
    pub fn new(a: &RMatrix, c: &RMatrix, sigma: &RMatrix, b: &RMatrix, d: &RMatrix, f: &RMatrix) -> Result<Self> {
        ensure_square(a)?;
        let n = a.nrows();
        let r = c.nrows();
        let dims_ok = c.ncols() == n
            && sigma.shape() == (n, n)
            && b.nrows() == n
            && d.shape() == (r, b.ncols())
            && f.shape() == (r, r);
        if !dims_ok {
            return Err(Error::Dimension(format!(
                "ARE: A {:?}, C {:?}, Sigma {:?}, B {:?}, D {:?}, F {:?}",
                a.shape(),
                c.shape(),
                sigma.shape(),
                b.shape(),
                d.shape(),
                f.shape()
            )));
        }
        if max_abs(&(sigma - sigma.transpose())) > 1e-10 * (1.0 + max_abs(sigma)) {
            return Err(Error::Asymmetric("ARE noise matrix Sigma".into()));
        }
        let chol = symmetrize(f)
            .cholesky()
            .ok_or_else(|| Error::DesignInfeasible("F is not positive definite".into()))?;
        Ok(AreData {
            a: a.clone(),
            c: c.clone(),
            sigma: symmetrize(sigma),
            cross: b * d.transpose(),
            f: symmetrize(f),
            f_inv: symmetrize(&chol.inverse()),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `K = (PCᵀ + G)F⁻¹`
    pub fn gain(&self, p: &RMatrix) -> RMatrix {
        (p * self.c.transpose() + &self.cross) * &self.f_inv
    }

    pub fn residual(&self, p: &RMatrix) -> RMatrix {
        let l = p * self.c.transpose() + &self.cross;
        &self.a * p + p * self.a.transpose() + &self.sigma - &l * &self.f_inv * l.transpose()
    }

    /// Frobenius norm of the residual relative to the size of its terms.
    pub fn scaled_residual(&self, p: &RMatrix) -> f64 {
        let l = p * self.c.transpose() + &self.cross;
        let quad = (&l * &self.f_inv * l.transpose()).norm();
        let scale = 1.0 + self.sigma.norm() + 2.0 * self.a.norm() * p.norm() + quad;
        self.residual(p).norm() / scale
    }

    /// Right-hand side constant of the Lyapunov step for a fixed gain,
    /// `Σ − KGᵀ − GKᵀ + KFKᵀ`.
    fn gain_noise(&self, k: &RMatrix) -> RMatrix {
        let kg = k * self.cross.transpose();
        symmetrize(&(&self.sigma - &kg - kg.transpose() + k * &self.f * k.transpose()))
    }
}

/// Result of [`solve_are`].
#[derive(Debug, Clone)]
pub struct AreSolution {
    pub p: RMatrix,
    pub gain: RMatrix,
    pub closed_loop_abscissa: f64,
    pub scaled_residual: f64,
    /// Relative Frobenius gap between the two independent solver paths.
    pub method_gap: f64,
}

const ARE_AGREEMENT: f64 = 1e-6;

/// Stabilising solution of the filtering ARE, computed by the Hamiltonian
/// invariant-subspace method and by Newton–Kleinman iteration and
/// cross-checked.
pub fn solve_are(
    a: &RMatrix,
    c: &RMatrix,
    sigma: &RMatrix,
    b: &RMatrix,
    d: &RMatrix,
    f: &RMatrix,
) -> Result<AreSolution> {
    let data = AreData::new(a, c, sigma, b, d, f)?;
    let p_sub = are_invariant_subspace(&data)?;
    let p_newton = are_newton_kleinman(&data)?;
    let method_gap = (&p_sub - &p_newton).norm() / (1.0 + p_newton.norm());
    if method_gap > ARE_AGREEMENT {
        return Err(Error::DesignInfeasible(format!(
            "invariant-subspace and Newton-Kleinman solutions disagree (gap {method_gap:e})"
        )));
    }
    let p = p_newton;
    let gain = data.gain(&p);
    let closed = &data.a - &gain * &data.c;
    let stab = is_hurwitz(&closed)?;
    if !stab.hurwitz {
        return Err(Error::DesignInfeasible(format!(
            "closed loop A - KC not Hurwitz (abscissa {:e})",
            stab.abscissa
        )));
    }
    let floor = min_symmetric_eigenvalue(&p);
    if floor < -1e-8 * (1.0 + p.norm()) {
        return Err(Error::DesignInfeasible(format!(
            "Riccati solution not positive semi-definite (min eigenvalue {floor:e})"
        )));
    }
    Ok(AreSolution {
        scaled_residual: data.scaled_residual(&p),
        p,
        gain,
        closed_loop_abscissa: stab.abscissa,
        method_gap,
    })
}

/// Stable invariant subspace of the Hamiltonian matrix via the matrix sign
/// function (Newton iteration with determinant scaling).
pub fn are_invariant_subspace(data: &AreData) -> Result<RMatrix> {
    let n = data.n();
    let gf = &data.cross * &data.f_inv;
    let a_mod = &data.a - &gf * &data.c;
    let q_mod = symmetrize(&(&data.sigma - &gf * data.cross.transpose()));
    let r = symmetrize(&(data.c.transpose() * &data.f_inv * &data.c));

    // Dual control form: A_cᵀX + XA_c − XRX + Q = 0 with A_c = Ãᵀ.
    let mut h = RMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_mod.transpose());
    h.view_mut((0, n), (n, n)).copy_from(&(-&r));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q_mod));
    h.view_mut((n, n), (n, n)).copy_from(&(-&a_mod));

    let w = matrix_sign(&h)?;
    let id = RMatrix::identity(n, n);
    let mut lhs = RMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + &id));
    let mut rhs = RMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + &id)));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&(-w.view((n, 0), (n, n))));

    let qr = lhs.qr();
    let qt_rhs = qr.q().transpose() * rhs;
    let x = qr
        .r()
        .solve_upper_triangular(&qt_rhs)
        .ok_or_else(|| Error::DesignInfeasible("stable subspace is not a graph".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DesignInfeasible("stable subspace is not a graph".into()));
    }
    Ok(symmetrize(&x))
}

fn matrix_sign(h: &RMatrix) -> Result<RMatrix> {
    let dim = h.nrows() as f64;
    let mut z = h.clone();
    let mut scale = true;
    for _ in 0..200 {
        let lu = z.clone().lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::DesignInfeasible("Hamiltonian has imaginary-axis eigenvalues".into()))?;
        let c = if scale {
            let u = z.clone().lu().u();
            let logdet: f64 = u.diagonal().iter().map(|d| d.abs().ln()).sum();
            let c = (-logdet / dim).exp();
            if c.is_finite() && c > 0.0 { c } else { 1.0 }
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        let change = one_norm(&(&next - &z));
        let size = one_norm(&next);
        z = next;
        if !size.is_finite() {
            break;
        }
        if change <= 1e-2 * size {
            scale = false;
        }
        if change <= 1e-13 * size {
            return Ok(z);
        }
    }
    Err(Error::DesignInfeasible(
        "matrix sign iteration did not converge".into(),
    ))
}

/// Newton–Kleinman iteration on the gain, seeded with `K = 0` when `A` is
/// Hurwitz and with a Bass stabilising gain otherwise.
pub fn are_newton_kleinman(data: &AreData) -> Result<RMatrix> {
    let n = data.n();
    let r = data.c.nrows();
    let mut k = if is_hurwitz(&data.a)?.hurwitz {
        RMatrix::zeros(n, r)
    } else {
        bass_gain(&data.a, &data.c)?
    };
    let mut p_prev: Option<RMatrix> = None;
    for _ in 0..200 {
        let closed = &data.a - &k * &data.c;
        let p = solve_lyapunov_real(&closed, &data.gain_noise(&k)).map_err(|e| match e {
            Error::NotHurwitz(x) => Error::DesignInfeasible(format!(
                "Newton-Kleinman iterate lost stability (abscissa {x:e})"
            )),
            other => other,
        })?;
        k = data.gain(&p);
        if let Some(prev) = &p_prev {
            if (&p - prev).norm() <= 1e-14 * (1.0 + p.norm()) {
                return Ok(p);
            }
        }
        p_prev = Some(p);
    }
    match p_prev {
        Some(p) if data.scaled_residual(&p) < 1e-10 => Ok(p),
        _ => Err(Error::DesignInfeasible(
            "Newton-Kleinman iteration did not converge".into(),
        )),
    }
}

/// Gain `K` with `A − KC` Hurwitz (Bass's method on the dual pair).
fn bass_gain(a: &RMatrix, c: &RMatrix) -> Result<RMatrix> {
    let n = a.nrows();
    let shift = a.norm() + 1.0;
    let am = -(a.transpose() + RMatrix::identity(n, n) * shift);
    let z = solve_lyapunov_real(&am, &(c.transpose() * c * 2.0))?;
    let chol = z.cholesky().ok_or_else(|| {
        Error::DesignInfeasible("(A, C) is not observable; cannot seed Newton-Kleinman".into())
    })?;
    let k = chol.solve(&c.transpose());
    if !is_hurwitz(&(a - &k * c))?.hurwitz {
        return Err(Error::DesignInfeasible("failed to find a stabilising seed gain".into()));
    }
    Ok(k)
}

// ---------------------------------------------------------------------------
// ODE integration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// Classical fourth-order Runge–Kutta with at most this step.
    Fixed(f64),
    /// Dormand–Prince 5(4) with error control.
    Adaptive { abs_tol: f64, rel_tol: f64 },
}

type Projection<'a> = Box<dyn Fn(&mut RVector) + 'a>;

/// Initial value problem `ẏ = f(t, y)` sampled on an output grid.
pub struct OdeProblem<'a, F> {
    pub rhs: F,
    pub initial: RVector,
    /// Output times; the first entry is the initial time and the last the
    /// horizon.
    pub grid: Vec<f64>,
    pub policy: StepPolicy,
    /// Applied to the state after every accepted step (for example to
    /// re-symmetrise covariance matrices).
    pub projection: Option<Projection<'a>>,
}

impl<'a, F> OdeProblem<'a, F>
where
    F: Fn(f64, &RVector) -> RVector,
{
    pub fn new(rhs: F, t0: f64, initial: RVector, horizon: f64, policy: StepPolicy) -> Self {
        OdeProblem {
            rhs,
            initial,
            grid: vec![t0, horizon],
            policy,
            projection: None,
        }
    }

    pub fn sampled_at(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_projection(mut self, p: impl Fn(&mut RVector) + 'a) -> Self {
        self.projection = Some(Box::new(p));
        self
    }

    pub fn dimension(&self) -> usize {
        self.initial.len()
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<RVector>,
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Grid("empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Grid("non-finite time".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Uniform grid `t0, t0 + step, …` ending exactly at `horizon`.
pub fn uniform_grid(t0: f64, horizon: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || horizon.is_nan() || horizon < t0 {
        return Err(Error::Grid(format!(
            "need step > 0 and horizon >= t0 (t0 {t0}, horizon {horizon}, step {step})"
        )));
    }
    let n = ((horizon - t0) / step - 1e-9).ceil().max(0.0) as usize;
    let mut g: Vec<f64> = (0..n).map(|i| t0 + i as f64 * step).collect();
    g.push(horizon);
    if g.len() > 1 && g[g.len() - 2] >= horizon {
        g.remove(g.len() - 2);
    }
    Ok(g)
}

pub fn integrate<F>(problem: &OdeProblem<'_, F>) -> Result<Trajectory>
where
    F: Fn(f64, &RVector) -> RVector,
{
    check_grid(&problem.grid)?;
    let mut y = problem.initial.clone();
    if let Some(p) = &problem.projection {
        p(&mut y);
    }
    let mut times = vec![problem.grid[0]];
    let mut states = vec![y.clone()];
    let mut h_adapt: Option<f64> = None;
    for w in problem.grid.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        match problem.policy {
            StepPolicy::Fixed(h) => {
                if h.is_nan() || h <= 0.0 {
                    return Err(Error::Grid(format!("step must be positive, got {h}")));
                }
                let steps = ((tb - ta) / h - 1e-9).ceil().max(1.0) as usize;
                let dt = (tb - ta) / steps as f64;
                for i in 0..steps {
                    let t = ta + i as f64 * dt;
                    y = rk4_step(&problem.rhs, t, &y, dt);
                    if let Some(p) = &problem.projection {
                        p(&mut y);
                    }
                    if y.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite(t + dt));
                    }
                }
            }
            StepPolicy::Adaptive { abs_tol, rel_tol } => {
                let h0 = h_adapt.unwrap_or((tb - ta) * 0.01);
                let (y_new, h_next) = dopri_segment(problem, ta, tb, y, h0, abs_tol, rel_tol)?;
                y = y_new;
                h_adapt = Some(h_next);
            }
        }
        times.push(tb);
        states.push(y.clone());
    }
    Ok(Trajectory { times, states })
}

fn rk4_step<F>(f: &F, t: f64, y: &RVector, h: f64) -> RVector
where
    F: Fn(f64, &RVector) -> RVector,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dopri_segment<F>(
    problem: &OdeProblem<'_, F>,
    ta: f64,
    tb: f64,
    mut y: RVector,
    h0: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(RVector, f64)>
where
    F: Fn(f64, &RVector) -> RVector,
{
    let f = &problem.rhs;
    let mut t = ta;
    let mut h = h0.min(tb - ta).max(f64::MIN_POSITIVE);
    let mut h_keep = h;
    while t < tb {
        let last = t + h >= tb;
        let step = if last { tb - t } else { h };
        if step < 1e-13 * t.abs().max(1.0) {
            return Err(Error::Stiffness(t));
        }
        let mut k: Vec<RVector> = Vec::with_capacity(7);
        for s in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if DP_A[s][j] != 0.0 {
                    ys += kj * (step * DP_A[s][j]);
                }
            }
            k.push(f(t + DP_C[s] * step, &ys));
        }
        let mut y5 = y.clone();
        let mut y4 = y.clone();
        for s in 0..7 {
            y5 += &k[s] * (step * DP_B5[s]);
            y4 += &k[s] * (step * DP_B4[s]);
        }
        let dim = y.len().max(1) as f64;
        let err = (y5
            .iter()
            .zip(y4.iter())
            .zip(y.iter())
            .map(|((a, b), c)| {
                let sc = abs_tol + rel_tol * a.abs().max(c.abs());
                ((a - b) / sc).powi(2)
            })
            .sum::<f64>()
            / dim)
            .sqrt();
        if !err.is_finite() {
            return Err(Error::NonFinite(t));
        }
        if err <= 1.0 {
            t = if last { tb } else { t + step };
            y = y5;
            if let Some(p) = &problem.projection {
                p(&mut y);
            }
            if !last {
                h_keep = step;
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = step * factor;
        if err <= 1.0 && last {
            break;
        }
    }
    Ok((y, h_keep))
}

// ---------------------------------------------------------------------------
// Packing helpers for matrix-valued ODE states
// ---------------------------------------------------------------------------

pub(crate) fn pack_real(m: &RMatrix) -> RVector {
    RVector::from_iterator(m.len(), m.iter().copied())
}

pub(crate) fn unpack_real(v: &[f64], n: usize) -> RMatrix {
    RMatrix::from_column_slice(n, n, &v[..n * n])
}

pub(crate) fn pack_complex(m: &CMatrix) -> RVector {
    let n2 = m.len();
    let mut v = RVector::zeros(2 * n2);
    for (i, z) in m.iter().enumerate() {
        v[i] = z.re;
        v[n2 + i] = z.im;
    }
    v
}

pub(crate) fn unpack_complex(v: &[f64], n: usize) -> CMatrix {
    let n2 = n * n;
    CMatrix::from_iterator(n, n, (0..n2).map(|i| C64::new(v[i], v[n2 + i])))
}
