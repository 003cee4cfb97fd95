//! Mean-square optimal Luenberger observer driven by a nondemolition
//! measurement `Z = D Y` of the output fields.
//!
//! Everything here lives at the level of the deterministic moment equations:
//! the error covariance `P` of the observer for a given gain, the optimal
//! gain and its Riccati flow, and the steady-state design.

use crate::algebra::StructureConstants;
use crate::dynamics::{numerical_rank, CoefficientSet, MeanPath};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{
    check_grid, integrate, is_hurwitz, max_abs, pack_real, solve_are, symmetrize, unpack_real,
    CMatrix, OdeProblem, RMatrix, RVector, StepPolicy, C64,
};

const COMMUTATION_TOL: f64 = 1e-12;

/// `Z = D Y` with `F = DDᵀ ≻ 0`, `DJDᵀ = 0`, `C = 2DJM`, `d = 2DJN`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSpec {
    pub d: RMatrix,
    pub f: RMatrix,
    pub c: RMatrix,
    pub offset: RVector,
    f_inv: RMatrix,
}

impl MeasurementSpec {
    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn f_inv(&self) -> &RMatrix {
        &self.f_inv
    }
}

pub fn build_measurement(coeffs: &CoefficientSet, d: &RMatrix) -> Result<MeasurementSpec> {
    let spec = coeffs.spec();
    let m = spec.channels();
    if d.ncols() != m || d.nrows() == 0 {
        return Err(Error::Dimension(format!("D is {}x{}, expected r x {m}", d.nrows(), d.ncols())));
    }
    let djd = d * &coeffs.j * d.transpose();
    let comm = max_abs(&djd);
    if comm > COMMUTATION_TOL {
        return Err(Error::NonCommuting(comm));
    }
    let rank = numerical_rank(d);
    if rank < d.nrows() {
        return Err(Error::RankDeficient(format!("rank {rank} for {} rows", d.nrows())));
    }
    if 2 * d.nrows() > m {
        return Err(Error::Dimension(format!("r = {} exceeds m/2 = {}", d.nrows(), m / 2)));
    }
    let f = d * d.transpose();
    let f_inv = symmetrize(
        &f.clone()
            .cholesky()
            .ok_or_else(|| Error::RankDeficient("D D^T is not positive definite".into()))?
            .inverse(),
    );
    let dj = d * &coeffs.j;
    Ok(MeasurementSpec {
        c: &dj * spec.coupling() * 2.0,
        offset: &dj * spec.offset() * 2.0,
        d: d.clone(),
        f,
        f_inv,
    })
}

/// `Σ(μ) = −4 Σ_{jk} Θ_j Mᵀ(α_{jk} I + Σ_ℓ μ_ℓ(Re β_{jkℓ} I − θ_{jkℓ} J)) M Θ_k`,
/// the real part of the diffusion matrix `V(μ)` assembled from the real
/// data directly.
pub fn sigma_of_mu(coeffs: &CoefficientSet, mu: &RVector) -> Result<RMatrix> {
    let sc = coeffs.constants();
    let n = sc.n();
    if mu.len() != n {
        return Err(Error::Dimension(format!("mean has {} entries, n = {n}", mu.len())));
    }
    let m = coeffs.spec().coupling();
    let mtm = m.transpose() * m;
    let mtjm = m.transpose() * &coeffs.j * m;
    let alpha = sc.real_alpha()?;
    let thetas: Vec<RMatrix> = (0..n).map(|l| sc.theta_section(l)).collect();
    let mut sigma = RMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let mut sym = alpha[(j, k)];
            let mut skew = 0.0;
            for l in 0..n {
                sym += mu[l] * sc.beta(j, k, l).re;
                skew += mu[l] * sc.theta(j, k, l);
            }
            if sym == 0.0 && skew == 0.0 {
                continue;
            }
            let middle = &mtm * sym - &mtjm * skew;
            sigma += &thetas[j] * middle * &thetas[k];
        }
    }
    Ok(symmetrize(&(sigma * -4.0)))
}

/// `P(0) = Re cov X(0) = α + Re β·μ₀ − μ₀μ₀ᵀ`.
pub fn initial_error_cov(sc: &StructureConstants, mu0: &RVector) -> Result<RMatrix> {
    let alpha = sc.real_alpha()?;
    let reb = sc.dot_real(mu0)?.map(|z| z.re);
    Ok(symmetrize(&(alpha + reb - mu0 * mu0.transpose())))
}

/// `G = P + iΘ·μ`, the full error covariance; its imaginary part does not
/// depend on the gain.
pub fn error_covariance_complex(sc: &StructureConstants, p: &RMatrix, mu: &RVector) -> Result<CMatrix> {
    let t = sc.theta_dot(mu)?;
    Ok(CMatrix::from_fn(p.nrows(), p.ncols(), |i, k| C64::new(p[(i, k)], t[(i, k)])))
}

/// Right-hand side of the error-covariance equation for gain `K`:
/// `(A−KC)P + P(A−KC)ᵀ + Σ(μ) − K D B(μ)ᵀ − B(μ) Dᵀ Kᵀ + K F Kᵀ`.
pub fn error_cov_rhs(
    coeffs: &CoefficientSet,
    meas: &MeasurementSpec,
    k: &RMatrix,
    p: &RMatrix,
    mu: &RVector,
) -> Result<RMatrix> {
    let closed = &coeffs.a - k * &meas.c;
    let bd = coeffs.dispersion(mu)? * meas.d.transpose();
    let kbd = k * bd.transpose();
    Ok(&closed * p + p * closed.transpose() + sigma_of_mu(coeffs, mu)? - &kbd - kbd.transpose()
        + k * &meas.f * k.transpose())
}

/// `K* = (PCᵀ + B(μ)Dᵀ)F⁻¹`
pub fn optimal_gain(
    coeffs: &CoefficientSet,
    meas: &MeasurementSpec,
    p: &RMatrix,
    mu: &RVector,
) -> Result<RMatrix> {
    let cross = coeffs.dispersion(mu)? * meas.d.transpose();
    Ok((p * meas.c.transpose() + cross) * meas.f_inv())
}

/// `AP + PAᵀ + Σ(μ) − (PCᵀ + B(μ)Dᵀ)F⁻¹(CP + D B(μ)ᵀ)`
pub fn riccati_rhs(coeffs: &CoefficientSet, meas: &MeasurementSpec, p: &RMatrix, mu: &RVector) -> Result<RMatrix> {
    let l = p * meas.c.transpose() + coeffs.dispersion(mu)? * meas.d.transpose();
    Ok(&coeffs.a * p + p * coeffs.a.transpose() + sigma_of_mu(coeffs, mu)? - &l * meas.f_inv() * l.transpose())
}

fn check_p0(p0: &RMatrix, n: usize) -> Result<()> {
    if p0.shape() != (n, n) {
        return Err(Error::Dimension(format!("P0 is {:?}, n = {n}", p0.shape())));
    }
    if max_abs(&(p0 - p0.transpose())) > 1e-12 * (1.0 + max_abs(p0)) {
        return Err(Error::Asymmetric("P0".into()));
    }
    Ok(())
}

fn integrate_matrix_flow<F>(n: usize, p0: &RMatrix, grid: &[f64], policy: StepPolicy, rhs: F) -> Result<Vec<RMatrix>>
where
    F: Fn(f64, &RMatrix) -> Result<RMatrix>,
{
    check_grid(grid)?;
    let failure = std::cell::RefCell::new(None);
    let ode_rhs = |t: f64, y: &RVector| {
        let p = unpack_real(y.as_slice(), n);
        match rhs(t, &p) {
            Ok(dp) => pack_real(&dp),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                RVector::zeros(n * n)
            }
        }
    };
    let prob = OdeProblem::new(ode_rhs, grid[0], pack_real(p0), *grid.last().unwrap(), policy)
        .sampled_at(grid.to_vec())
        .with_projection(move |y: &mut RVector| {
            *y = pack_real(&symmetrize(&unpack_real(y.as_slice(), n)));
        });
    let traj = integrate(&prob)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(traj.states.iter().map(|y| unpack_real(y.as_slice(), n)).collect())
}

/// Error covariance `P(t)` of the observer with gain `K(t)`, sampled on
/// `grid`.
pub fn error_cov_trajectory(
    coeffs: &CoefficientSet,
    meas: &MeasurementSpec,
    gain: &(dyn Fn(f64) -> RMatrix + Sync),
    p0: &RMatrix,
    mean: &dyn MeanPath,
    grid: &[f64],
    policy: StepPolicy,
) -> Result<Vec<RMatrix>> {
    let n = coeffs.n();
    check_p0(p0, n)?;
    integrate_matrix_flow(n, p0, grid, policy, |t, p| {
        let k = gain(t);
        if k.shape() != (n, meas.outputs()) {
            return Err(Error::Dimension(format!("gain is {:?}, expected {n}x{}", k.shape(), meas.outputs())));
        }
        error_cov_rhs(coeffs, meas, &k, p, &mean.mean(t)?)
    })
}

/// Error covariances for several constant gains sharing `P0` and the mean.
#[allow(clippy::too_many_arguments)]
pub fn fixed_gain_sweep(
    coeffs: &CoefficientSet,
    meas: &MeasurementSpec,
    gains: &[RMatrix],
    p0: &RMatrix,
    mean: &dyn MeanPath,
    grid: &[f64],
    policy: StepPolicy,
    exec: Execution,
) -> Result<Vec<Vec<RMatrix>>> {
    exec.try_map(gains, |k| {
        let k = k.clone();
        error_cov_trajectory(coeffs, meas, &move |_t| k.clone(), p0, mean, grid, policy)
    })
}

#[derive(Debug, Clone)]
pub struct RiccatiTrajectory {
    pub times: Vec<f64>,
    pub p: Vec<RMatrix>,
    pub gain: Vec<RMatrix>,
}

/// Riccati flow of the optimal error covariance, with `K*(t)` recorded at
/// each sample.
pub fn riccati_trajectory(
    coeffs: &CoefficientSet,
    meas: &MeasurementSpec,
    p0: &RMatrix,
    mean: &dyn MeanPath,
    grid: &[f64],
    policy: StepPolicy,
) -> Result<RiccatiTrajectory> {
    let n = coeffs.n();
    check_p0(p0, n)?;
    let p = integrate_matrix_flow(n, p0, grid, policy, |t, p| riccati_rhs(coeffs, meas, p, &mean.mean(t)?))?;
    let gain = grid
        .iter()
        .zip(&p)
        .map(|(&t, pt)| optimal_gain(coeffs, meas, pt, &mean.mean(t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(RiccatiTrajectory {
        times: grid.to_vec(),
        p,
        gain,
    })
}

/// Steady-state observer from the stabilising solution of the filtering ARE
/// at the invariant mean.
#[derive(Debug, Clone)]
pub struct SteadyDesign {
    pub mu: RVector,
    pub p: RMatrix,
    pub gain: RMatrix,
    pub closed_loop_abscissa: f64,
    pub scaled_residual: f64,
    pub method_gap: f64,
}

pub fn steady_design(coeffs: &CoefficientSet, meas: &MeasurementSpec) -> Result<SteadyDesign> {
    let mu = crate::dynamics::invariant_mean(coeffs)?;
    let sigma = sigma_of_mu(coeffs, &mu)?;
    let b = coeffs.dispersion(&mu)?;
    let sol = solve_are(&coeffs.a, &meas.c, &sigma, &b, &meas.d, &meas.f)?;
    Ok(SteadyDesign {
        mu,
        p: sol.p,
        gain: sol.gain,
        closed_loop_abscissa: sol.closed_loop_abscissa,
        scaled_residual: sol.scaled_residual,
        method_gap: sol.method_gap,
    })
}

/// Coefficients of the observer `dξ = ((A − KC)ξ + b − Kd) dt + K dZ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverCoefficients {
    pub drift: RMatrix,
    pub offset: RVector,
    pub input: RMatrix,
}

impl ObserverCoefficients {
    pub fn closed_loop_abscissa(&self) -> Result<f64> {
        Ok(is_hurwitz(&self.drift)?.abscissa)
    }
}

pub fn observer_ode_coefficients(
    coeffs: &CoefficientSet,
    meas: &MeasurementSpec,
    k: &RMatrix,
) -> Result<ObserverCoefficients> {
    if k.shape() != (coeffs.n(), meas.outputs()) {
        return Err(Error::Dimension(format!(
            "gain is {:?}, expected {}x{}",
            k.shape(),
            coeffs.n(),
            meas.outputs()
        )));
    }
    Ok(ObserverCoefficients {
        drift: &coeffs.a - k * &meas.c,
        offset: &coeffs.b - k * &meas.offset,
        input: k.clone(),
    })
}
