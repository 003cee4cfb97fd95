//! Quasilinear plant: coefficient synthesis from the energy and coupling
//! parameters, first and second moment flows, invariant state, spectral
//! density and the stability analysis of Pauli plants.

use crate::algebra::{StructureConstants, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{
    expm, hermitian_part, integrate, is_hurwitz, max_abs, min_hermitian_eigenvalue, pack_complex,
    solve_lyapunov, to_complex, unpack_complex, CMatrix, OdeProblem, RMatrix,
    RVector, StepPolicy, C64,
};

/// Plant with Hamiltonian `EᵀX` and coupling operators `MX + N` to `m`
/// field channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    sc: StructureConstants,
    e: RVector,
    m: RMatrix,
    nvec: RVector,
}

impl SystemSpec {
    /// Checks shapes, that `m` is even and positive, that `α` is real, and
    /// validates the constants at [`DEFAULT_TOL`].
    pub fn new(sc: StructureConstants, e: RVector, m: RMatrix, nvec: RVector) -> Result<Self> {
        let n = sc.n();
        if e.len() != n || m.ncols() != n || nvec.len() != m.nrows() {
            return Err(Error::Dimension(format!(
                "n = {n}: E has {} entries, M is {}x{}, N has {} entries",
                e.len(),
                m.nrows(),
                m.ncols(),
                nvec.len()
            )));
        }
        let channels = m.nrows();
        if channels == 0 || !channels.is_multiple_of(2) {
            return Err(Error::OddChannels(channels));
        }
        sc.real_alpha()?;
        sc.ensure_valid(DEFAULT_TOL)?;
        Ok(SystemSpec { sc, e, m, nvec })
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.sc
    }

    pub fn energy(&self) -> &RVector {
        &self.e
    }

    pub fn coupling(&self) -> &RMatrix {
        &self.m
    }

    pub fn offset(&self) -> &RVector {
        &self.nvec
    }

    pub fn n(&self) -> usize {
        self.sc.n()
    }

    pub fn channels(&self) -> usize {
        self.m.nrows()
    }
}

/// `J = [[0, I], [−I, 0]]` with `m/2`-blocks.
pub fn j_matrix(m: usize) -> RMatrix {
    let h = m / 2;
    RMatrix::from_fn(m, m, |i, k| {
        if k == i + h && i < h {
            1.0
        } else if i == k + h && k < h {
            -1.0
        } else {
            0.0
        }
    })
}

/// Drift `AX + b`, dispersion `B(X) = 2(Θ·X)Mᵀ` and Ito matrix `Ω = I + iJ`.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub a: RMatrix,
    pub b: RVector,
    pub j: RMatrix,
    pub omega: CMatrix,
    spec: SystemSpec,
    /// `Θ_j MᵀΩM Θ_k` at index `j·n + k`.
    couplings: Vec<CMatrix>,
}

pub fn synthesize(spec: &SystemSpec) -> Result<CoefficientSet> {
    let sc = spec.constants();
    let n = sc.n();
    let m = spec.coupling();
    let mt = m.transpose();
    let j = j_matrix(spec.channels());
    let alpha = sc.real_alpha()?;

    let drive = spec.energy() + &mt * &j * spec.offset();
    let mut a = sc.theta_diamond(&drive)? * 2.0;
    let mtjm = &mt * &j * m;
    let mut b = RVector::zeros(n);
    let thetas: Vec<RMatrix> = (0..n).map(|l| sc.theta_section(l)).collect();
    for (l, theta_l) in thetas.iter().enumerate() {
        let inner = m * sc.theta_row_section(l) + &j * m * sc.re_beta_row_section(l);
        a += theta_l * &mt * inner * 2.0;
        b += theta_l * &mtjm * alpha.column(l) * 2.0;
    }

    let omega = CMatrix::from_fn(j.nrows(), j.ncols(), |r, c| {
        C64::new(if r == c { 1.0 } else { 0.0 }, j[(r, c)])
    });
    let mt_omega_m = to_complex(&mt) * &omega * to_complex(m);
    let thetas_c: Vec<CMatrix> = thetas.iter().map(to_complex).collect();
    let mut couplings = Vec::with_capacity(n * n);
    for tj in &thetas_c {
        let left = tj * &mt_omega_m;
        for tk in &thetas_c {
            couplings.push(&left * tk);
        }
    }
    Ok(CoefficientSet {
        a,
        b,
        j,
        omega,
        spec: spec.clone(),
        couplings,
    })
}

impl CoefficientSet {
    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn constants(&self) -> &StructureConstants {
        self.spec.constants()
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `B(x) = 2(Θ·x)Mᵀ`, linear in `x`.
    pub fn dispersion(&self, x: &RVector) -> Result<RMatrix> {
        Ok(self.constants().theta_dot(x)? * self.spec.coupling().transpose() * 2.0)
    }

    /// `V(μ) = −4 Σ_{jk} (α_{jk} + Σ_ℓ β_{jkℓ} μ_ℓ) Θ_j MᵀΩM Θ_k`, the
    /// expected diffusion `E B(X) Ω B(X)ᵀ` at mean `μ`.
    pub fn diffusion(&self, mu: &RVector) -> Result<CMatrix> {
        let sc = self.constants();
        let n = self.n();
        let xi = sc.alpha() + sc.dot_real(mu)?;
        let mut v = CMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let w = xi[(j, k)];
                if w != C64::new(0.0, 0.0) {
                    v += &self.couplings[j * n + k] * w;
                }
            }
        }
        Ok(v * C64::new(-4.0, 0.0))
    }

    pub fn drift(&self, x: &RVector) -> RVector {
        &self.a * x + &self.b
    }
}

/// Mean vector along a trajectory.
pub trait MeanPath: Sync {
    fn mean(&self, t: f64) -> Result<RVector>;
}

impl<F> MeanPath for F
where
    F: Fn(f64) -> RVector + Sync,
{
    fn mean(&self, t: f64) -> Result<RVector> {
        Ok(self(t))
    }
}

/// `μ(t) = e^{(t−t₀)A} μ₀ + Ψ(t − t₀) b`, evaluated as the exponential of the
/// affine generator `[[A, b], [0, 0]]` applied to `[μ₀; 1]`.
#[derive(Debug, Clone)]
pub struct ClosedFormMean {
    generator: RMatrix,
    t0: f64,
    mu0: RVector,
}

impl ClosedFormMean {
    pub fn new(coeffs: &CoefficientSet, t0: f64, mu0: RVector) -> Result<Self> {
        let n = coeffs.n();
        if mu0.len() != n {
            return Err(Error::Dimension(format!("mu0 has {} entries, n = {n}", mu0.len())));
        }
        let mut generator = RMatrix::zeros(n + 1, n + 1);
        generator.view_mut((0, 0), (n, n)).copy_from(&coeffs.a);
        generator.view_mut((0, n), (n, 1)).copy_from(&coeffs.b);
        Ok(ClosedFormMean { generator, t0, mu0 })
    }
}

impl MeanPath for ClosedFormMean {
    fn mean(&self, t: f64) -> Result<RVector> {
        let n = self.mu0.len();
        let e = expm(&(&self.generator * (t - self.t0)))?;
        Ok(e.view((0, 0), (n, n)) * &self.mu0 + e.view((0, n), (n, 1)).column(0))
    }
}

/// Constant mean, e.g. the invariant `μ∞`.
#[derive(Debug, Clone)]
pub struct ConstantMean(pub RVector);

impl MeanPath for ConstantMean {
    fn mean(&self, _t: f64) -> Result<RVector> {
        Ok(self.0.clone())
    }
}

/// Moments at time `t`: mean and quantum covariance matrix
/// `cov = E(X − μ)(X − μ)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub t: f64,
    pub mu: RVector,
    pub cov: CMatrix,
}

impl MomentState {
    /// `cov = α + β·μ − μμᵀ`, the covariance of any state with mean `μ`.
    pub fn from_mean(sc: &StructureConstants, t: f64, mu: RVector) -> Result<Self> {
        let cov = covariance_of_mean(sc, &mu)?;
        Ok(MomentState { t, mu, cov })
    }

    pub fn admissibility(&self, sc: &StructureConstants) -> Result<Admissibility> {
        let consistency = max_abs(&(&self.cov - covariance_of_mean(sc, &self.mu)?));
        Ok(Admissibility {
            min_eigenvalue: min_hermitian_eigenvalue(&self.cov),
            hermitian_residual: max_abs(&(&self.cov - self.cov.adjoint())),
            consistency,
        })
    }
}

pub fn covariance_of_mean(sc: &StructureConstants, mu: &RVector) -> Result<CMatrix> {
    Ok(sc.alpha() + sc.dot_real(mu)? - to_complex(&(mu * mu.transpose())))
}

/// Diagnostics for an initial moment state. Arbitrary initial states are
/// permitted; these numbers only flag states no density operator produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub min_eigenvalue: f64,
    pub hermitian_residual: f64,
    /// Distance of `cov` from `α + β·μ − μμᵀ`.
    pub consistency: f64,
}

impl Admissibility {
    pub fn warnings(&self, scale: f64) -> Vec<String> {
        let tol = 1e-10 * (1.0 + scale);
        let mut w = Vec::new();
        if self.min_eigenvalue < -tol {
            w.push(format!("initial covariance not PSD (min eigenvalue {:e})", self.min_eigenvalue));
        }
        if self.hermitian_residual > tol {
            w.push(format!("initial covariance not Hermitian (residual {:e})", self.hermitian_residual));
        }
        if self.consistency > tol {
            w.push(format!(
                "initial covariance inconsistent with its mean (residual {:e})",
                self.consistency
            ));
        }
        w
    }
}

/// Mean samples on `grid` from the closed form, starting at `grid[0]`.
pub fn mean_trajectory(coeffs: &CoefficientSet, mu0: &RVector, grid: &[f64]) -> Result<Vec<RVector>> {
    crate::linalg::check_grid(grid)?;
    let path = ClosedFormMean::new(coeffs, grid[0], mu0.clone())?;
    grid.iter().map(|&t| path.mean(t)).collect()
}

/// Mean samples on `grid` by numerical integration of `μ̇ = Aμ + b`.
pub fn mean_trajectory_integrated(
    coeffs: &CoefficientSet,
    mu0: &RVector,
    grid: &[f64],
    policy: StepPolicy,
) -> Result<Vec<RVector>> {
    crate::linalg::check_grid(grid)?;
    let rhs = |_t: f64, y: &RVector| coeffs.drift(y);
    let prob = OdeProblem::new(rhs, grid[0], mu0.clone(), *grid.last().unwrap(), policy)
        .sampled_at(grid.to_vec());
    Ok(integrate(&prob)?.states)
}

/// Integrates `cov̇ = A cov + cov Aᵀ + V(μ(t))` from `state0` with the mean
/// following the closed form from `state0.mu`. The covariance is projected
/// onto Hermitian matrices after each step.
pub fn covariance_trajectory(
    coeffs: &CoefficientSet,
    state0: &MomentState,
    grid: &[f64],
    policy: StepPolicy,
) -> Result<Vec<MomentState>> {
    crate::linalg::check_grid(grid)?;
    let n = coeffs.n();
    if state0.cov.shape() != (n, n) {
        return Err(Error::Dimension(format!("cov is {:?}, n = {n}", state0.cov.shape())));
    }
    let mean = ClosedFormMean::new(coeffs, state0.t, state0.mu.clone())?;
    let a = to_complex(&coeffs.a);
    let at = a.transpose();
    let failure = std::cell::RefCell::new(None);
    let rhs = |t: f64, y: &RVector| {
        let cov = unpack_complex(y.as_slice(), n);
        let v = match mean.mean(t).and_then(|mu| coeffs.diffusion(&mu)) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                CMatrix::zeros(n, n)
            }
        };
        pack_complex(&(&a * &cov + &cov * &at + v))
    };
    let prob = OdeProblem::new(rhs, grid[0], pack_complex(&state0.cov), *grid.last().unwrap(), policy)
        .sampled_at(grid.to_vec())
        .with_projection(move |y: &mut RVector| {
            let h = hermitian_part(&unpack_complex(y.as_slice(), n));
            *y = pack_complex(&h);
        });
    let traj = integrate(&prob)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    traj.times
        .iter()
        .zip(traj.states.iter())
        .map(|(&t, y)| {
            Ok(MomentState {
                t,
                mu: mean.mean(t)?,
                cov: unpack_complex(y.as_slice(), n),
            })
        })
        .collect()
}

/// `μ∞ = −A⁻¹b` by a linear solve, failing if `A` is not Hurwitz.
pub fn invariant_mean(coeffs: &CoefficientSet) -> Result<RVector> {
    let stab = is_hurwitz(&coeffs.a)?;
    if !stab.hurwitz {
        return Err(Error::NotHurwitz(stab.abscissa));
    }
    coeffs
        .a
        .clone()
        .lu()
        .solve(&(-&coeffs.b))
        .ok_or(Error::Singular("invariant mean"))
}

/// Invariant moments: `μ∞ = −A⁻¹b`, `Υ = V(μ∞)`, `Γ` from the Lyapunov
/// equation `AΓ + ΓAᵀ + Υ = 0`, and the algebraic form
/// `α + β·μ∞ − μ∞μ∞ᵀ` for comparison.
#[derive(Debug, Clone)]
pub struct InvariantState {
    pub mu: RVector,
    pub gamma: CMatrix,
    pub gamma_algebraic: CMatrix,
    pub upsilon: CMatrix,
    /// `max |Γ − Γ_algebraic|`
    pub consistency: f64,
    pub abscissa: f64,
}

pub fn invariant_state(coeffs: &CoefficientSet) -> Result<InvariantState> {
    let stab = is_hurwitz(&coeffs.a)?;
    let mu = invariant_mean(coeffs)?;
    let upsilon = hermitian_part(&coeffs.diffusion(&mu)?);
    let gamma = solve_lyapunov(&coeffs.a, &upsilon)?;
    let gamma_algebraic = covariance_of_mean(coeffs.constants(), &mu)?;
    let consistency = max_abs(&(&gamma - &gamma_algebraic));
    Ok(InvariantState {
        mu,
        gamma,
        gamma_algebraic,
        upsilon,
        consistency,
        abscissa: stab.abscissa,
    })
}

fn resolvent(a: &RMatrix, omega: f64) -> Result<CMatrix> {
    let n = a.nrows();
    let m = CMatrix::identity(n, n) * C64::new(0.0, omega) - to_complex(a);
    m.lu()
        .try_inverse()
        .ok_or(Error::Singular("resolvent (i omega I - A)"))
}

/// `S(ω) = (iωI − A)⁻¹ Υ (iωI − A)⁻*`, the Fourier transform of the
/// stationary covariance function. Equal to `−(iωI − A)⁻¹Υ(iωI + Aᵀ)⁻¹`.
pub fn spectral_density(a: &RMatrix, upsilon: &CMatrix, omega: f64) -> Result<CMatrix> {
    let r = resolvent(a, omega)?;
    Ok(hermitian_part(&(&r * upsilon * r.adjoint())))
}

/// Resolvent-difference form `(iωI − A)⁻¹Γ − Γ(iωI + Aᵀ)⁻¹` of the spectral
/// density, computed from `Γ` rather than `Υ`.
pub fn spectral_density_from_covariance(a: &RMatrix, gamma: &CMatrix, omega: f64) -> Result<CMatrix> {
    let r = resolvent(a, omega)?;
    let n = a.nrows();
    let right = (CMatrix::identity(n, n) * C64::new(0.0, omega) + to_complex(&a.transpose()))
        .lu()
        .try_inverse()
        .ok_or(Error::Singular("resolvent (i omega I + A^T)"))?;
    Ok(&r * gamma - gamma * right)
}

pub fn spectral_density_grid(
    a: &RMatrix,
    upsilon: &CMatrix,
    omegas: &[f64],
    exec: Execution,
) -> Result<Vec<CMatrix>> {
    exec.try_map(omegas, |&w| spectral_density(a, upsilon, w))
}

/// Stability data of a Pauli plant:
/// `Λ = ‖M‖²_F I₃ − MᵀM`, with `A + Aᵀ = −4Λ`.
#[derive(Debug, Clone)]
pub struct PauliStability {
    pub lambda: RMatrix,
    /// Eigenvalues of `Λ`, ascending.
    pub spectrum: [f64; 3],
    pub rank: usize,
    /// `rank M ≥ 2`, which makes `Λ ≻ 0` and hence `A` Hurwitz.
    pub hurwitz_guarantee: bool,
}

pub fn pauli_stability(m: &RMatrix) -> Result<PauliStability> {
    if m.ncols() != 3 {
        return Err(Error::Dimension(format!("M must have 3 columns, got {}", m.ncols())));
    }
    let mtm = m.transpose() * m;
    let lambda = RMatrix::identity(3, 3) * m.norm_squared() - &mtm;
    let mut ev: Vec<f64> = lambda.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let rank = numerical_rank(m);
    Ok(PauliStability {
        lambda,
        spectrum: [ev[0], ev[1], ev[2]],
        rank,
        hurwitz_guarantee: rank >= 2,
    })
}

pub fn numerical_rank(m: &RMatrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = smax * f64::EPSILON * m.nrows().max(m.ncols()) as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Stability data and Hurwitz test of `A` for each coupling matrix of a
/// Pauli plant with energy `E` and offset `N`.
pub fn pauli_stability_sweep(
    e: &RVector,
    ms: &[RMatrix],
    nvec: &RVector,
    exec: Execution,
) -> Result<Vec<(PauliStability, crate::linalg::Stability)>> {
    exec.try_map(ms, |m| {
        let spec = SystemSpec::new(StructureConstants::pauli(), e.clone(), m.clone(), nvec.clone())?;
        let coeffs = synthesize(&spec)?;
        Ok((pauli_stability(m)?, is_hurwitz(&coeffs.a)?))
    })
}
