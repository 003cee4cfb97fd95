//! The five pipelines. Each returns its artifacts in memory; writing them is
//! the caller's job, which keeps the pipelines testable without a
//! filesystem.

use quasilinear::algebra::{Check, DEFAULT_TOL};
use quasilinear::dynamics::{
    covariance_trajectory, invariant_state, spectral_density_grid, synthesize, ClosedFormMean, MeanPath, MomentState,
};
use quasilinear::filter::{
    build_measurement, error_cov_trajectory, initial_error_cov, observer_ode_coefficients, riccati_trajectory,
    steady_design,
};
use quasilinear::linalg::{is_hurwitz, min_hermitian_eigenvalue, RVector, C64};
use quasilinear::moments::{expect_entire, multi_moment, qcf_grid, MomentQuery};
use quasilinear::{Error, Execution, Result};

use crate::output::{complex_cells, float, matrix_columns, real_cells, Artifacts, Summary, Table};
use crate::scenario::{matrix, GainMode, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Simulate,
    Invariant,
    Moments,
    Filter,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    /// Forces the steady-state design in `filter`.
    pub steady: bool,
}

pub fn run(scenario: &Scenario, command: Command, opts: Options) -> Result<Artifacts> {
    match command {
        Command::Validate => validate(scenario, opts),
        Command::Simulate => simulate(scenario, opts),
        Command::Invariant => invariant(scenario, opts),
        Command::Moments => moments(scenario, opts),
        Command::Filter => filter(scenario, opts),
    }
}

/// Residual report. When any check exceeds the tolerance the report is still
/// produced and the artifacts carry an `INVALID_CONSTANTS` failure.
pub fn validate(scenario: &Scenario, opts: Options) -> Result<Artifacts> {
    let sc = scenario.structure_constants()?;
    let report = sc.validate(DEFAULT_TOL);
    let r = sc.residuals();
    let mut s = Summary::default();
    s.text("n", sc.n().to_string());
    s.float("tolerance", DEFAULT_TOL);
    s.float("alpha_hermitian", r.alpha_hermitian);
    s.float("section_hermitian", r.section_hermitian);
    s.float("con1", r.con1);
    s.float("con2", r.con2);
    s.text("violations", report.violations.len().to_string());
    s.text(
        "violated",
        [Check::AlphaHermitian, Check::SectionHermitian, Check::Con1, Check::Con2]
            .into_iter()
            .filter(|&c| report.residual(c).is_some())
            .map(Check::name)
            .collect::<Vec<_>>()
            .join(";"),
    );
    if report.is_empty() {
        let tau = sc.tau();
        for (i, t) in tau.iter().enumerate() {
            s.float(format!("tau_{}", i + 1), *t);
        }
        if let Ok(g) = sc.gamma() {
            s.float("gamma", g);
        }
        if scenario.plant.is_some() {
            let spec = scenario.system(opts.seed)?;
            s.text("channels", spec.channels().to_string());
        }
    }
    let mut out = Artifacts::default();
    out.summary(&s);
    if !report.is_empty() {
        out.failure = Some(Error::InvalidConstants(report));
    }
    Ok(out)
}

pub fn simulate(scenario: &Scenario, opts: Options) -> Result<Artifacts> {
    let coeffs = synthesize(&scenario.system(opts.seed)?)?;
    let sc = coeffs.constants();
    let n = coeffs.n();
    let grid_cfg = scenario.grid()?;
    let grid = grid_cfg.times()?;
    let state0 = MomentState::from_mean(sc, 0.0, scenario.initial_mean(n)?)?;
    let states = covariance_trajectory(&coeffs, &state0, &grid, grid_cfg.policy()?)?;
    let centre = sc.tau() * 0.5;
    let gamma = sc.gamma().ok();

    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("mu_{i}")));
    header.extend(matrix_columns("cov_re", n, n));
    header.extend(matrix_columns("cov_im", n, n));
    header.extend(["ball_distance".into(), "cov_min_eigenvalue".into()]);
    let mut t = Table::new(header);
    let mut max_excess = f64::NEG_INFINITY;
    for st in &states {
        let dist = (&st.mu - &centre).norm();
        if let Some(g) = gamma {
            max_excess = max_excess.max(dist - g);
        }
        let mut row = vec![float(st.t)];
        row.extend(st.mu.iter().map(|&x| float(x)));
        row.extend(complex_cells(&st.cov, |z| z.re));
        row.extend(complex_cells(&st.cov, |z| z.im));
        row.push(float(dist));
        row.push(float(min_hermitian_eigenvalue(&st.cov)));
        t.push(row);
    }
    let mut s = Summary::default();
    s.text("samples", t.len().to_string());
    if let Some(g) = gamma {
        s.float("gamma", g);
        s.float("max_ball_excess", max_excess);
    }
    let stab = is_hurwitz(&coeffs.a)?;
    s.text("hurwitz", stab.hurwitz.to_string());
    s.float("abscissa", stab.abscissa);
    s.real_matrix("a", &coeffs.a);
    for (i, x) in coeffs.b.iter().enumerate() {
        s.float(format!("b_{}", i + 1), *x);
    }
    let mut out = Artifacts::default();
    out.table("trajectory.csv", &t);
    out.summary(&s);
    Ok(out)
}

pub fn invariant(scenario: &Scenario, opts: Options) -> Result<Artifacts> {
    let coeffs = synthesize(&scenario.system(opts.seed)?)?;
    let sc = coeffs.constants();
    let n = coeffs.n();
    let inv = invariant_state(&coeffs)?;
    let cfg = &scenario.invariant;

    let mut s = Summary::default();
    s.float("abscissa", inv.abscissa);
    for (i, x) in inv.mu.iter().enumerate() {
        s.float(format!("mu_inf_{}", i + 1), *x);
    }
    s.complex_matrix("gamma", &inv.gamma);
    s.float("gamma_consistency", inv.consistency);

    let samples = |count: usize, radius: f64| -> Result<Vec<f64>> {
        if count < 2 || radius.is_nan() || radius <= 0.0 {
            return Err(Error::Config("sample grids need at least 2 points and a positive range".into()));
        }
        Ok((0..count).map(|i| -radius + 2.0 * radius * i as f64 / (count - 1) as f64).collect())
    };

    let radii = samples(cfg.qcf_points, cfg.qcf_radius)?;
    let mut dirs = Vec::with_capacity(n * radii.len());
    for axis in 0..n {
        for &r in &radii {
            let mut u = RVector::zeros(n);
            u[axis] = r;
            dirs.push(u);
        }
    }
    let phis = qcf_grid(sc, &inv.mu, &dirs, Execution::Parallel)?;
    let mut q = Table::new(vec!["axis".into(), "s".into(), "qcf_re".into(), "qcf_im".into()]);
    for (k, phi) in phis.iter().enumerate() {
        let axis = k / radii.len();
        q.push(vec![(axis + 1).to_string(), float(radii[k % radii.len()]), float(phi.re), float(phi.im)]);
    }

    let omegas = samples(cfg.omega_points, cfg.omega_max)?;
    let dens = spectral_density_grid(&coeffs.a, &inv.upsilon, &omegas, Execution::Parallel)?;
    let mut header = vec!["omega".to_string()];
    header.extend(matrix_columns("s_re", n, n));
    header.extend(matrix_columns("s_im", n, n));
    header.push("min_eigenvalue".into());
    let mut d = Table::new(header);
    for (w, sm) in omegas.iter().zip(&dens) {
        let mut row = vec![float(*w)];
        row.extend(complex_cells(sm, |z| z.re));
        row.extend(complex_cells(sm, |z| z.im));
        row.push(float(min_hermitian_eigenvalue(sm)));
        d.push(row);
    }
    let mut out = Artifacts::default();
    out.table("qcf.csv", &q);
    out.table("spectral_density.csv", &d);
    out.summary(&s);
    Ok(out)
}

pub fn moments(scenario: &Scenario, opts: Options) -> Result<Artifacts> {
    let coeffs = synthesize(&scenario.system(opts.seed)?)?;
    let sc = coeffs.constants();
    let n = coeffs.n();
    let mean = ClosedFormMean::new(&coeffs, 0.0, scenario.initial_mean(n)?)?;
    let mut multi = Table::new(vec!["query".into(), "order".into(), "re".into(), "im".into()]);
    let mut functionals = Table::new(vec![
        "query".into(),
        "function".into(),
        "t".into(),
        "re".into(),
        "im".into(),
    ]);
    for (idx, cfg) in scenario.moments.iter().enumerate() {
        let dirs = cfg.complex_directions()?;
        if cfg.times.iter().any(|&t| t < 0.0) {
            return Err(Error::Grid(format!("query {}: moment times start at 0", idx + 1)));
        }
        let value: C64 = match cfg.entire_fn()? {
            Some(f) => {
                if cfg.times.len() != 1 || dirs.len() != 1 {
                    return Err(Error::Config(format!("query {}: functionals take one time and one direction", idx + 1)));
                }
                if dirs[0].len() != n {
                    return Err(Error::Dimension(format!("query {}: direction must have {n} entries", idx + 1)));
                }
                let v = expect_entire(sc, &f, &dirs[0], &mean.mean(cfg.times[0])?)?;
                functionals.push(vec![
                    (idx + 1).to_string(),
                    cfg.function.clone().unwrap_or_default(),
                    float(cfg.times[0]),
                    float(v.re),
                    float(v.im),
                ]);
                continue;
            }
            None => multi_moment(&coeffs, &mean, &MomentQuery::new(cfg.times.clone(), dirs)?)?,
        };
        multi.push(vec![(idx + 1).to_string(), cfg.times.len().to_string(), float(value.re), float(value.im)]);
    }
    let mut out = Artifacts::default();
    out.table("moments.csv", &multi);
    if !functionals.is_empty() {
        out.table("functionals.csv", &functionals);
    }
    Ok(out)
}

pub fn filter(scenario: &Scenario, opts: Options) -> Result<Artifacts> {
    let coeffs = synthesize(&scenario.system(opts.seed)?)?;
    let n = coeffs.n();
    let mcfg = scenario
        .measurement
        .as_ref()
        .ok_or_else(|| Error::Config("`filter` needs [measurement]".into()))?;
    let meas = build_measurement(&coeffs, &matrix(&mcfg.d, "measurement.d")?)?;
    let r = meas.outputs();
    let mode = if opts.steady { GainMode::Steady } else { mcfg.gain };
    let mut s = Summary::default();
    let mut out = Artifacts::default();

    if mode == GainMode::Steady {
        let design = steady_design(&coeffs, &meas)?;
        s.text("mode", "steady");
        s.float("closed_loop_abscissa", design.closed_loop_abscissa);
        s.float("are_scaled_residual", design.scaled_residual);
        s.float("method_gap", design.method_gap);
        for (i, x) in design.mu.iter().enumerate() {
            s.float(format!("mu_inf_{}", i + 1), *x);
        }
        s.real_matrix("p_inf", &design.p);
        s.real_matrix("k_inf", &design.gain);
        s.float("trace_p_inf", design.p.trace());
        out.summary(&s);
        return Ok(out);
    }

    let grid_cfg = scenario.grid()?;
    let grid = grid_cfg.times()?;
    let policy = grid_cfg.policy()?;
    let mu0 = scenario.initial_mean(n)?;
    let mean = ClosedFormMean::new(&coeffs, 0.0, mu0.clone())?;
    let p0 = initial_error_cov(coeffs.constants(), &mu0)?;
    let (ps, ks) = match mode {
        GainMode::Optimal => {
            let traj = riccati_trajectory(&coeffs, &meas, &p0, &mean, &grid, policy)?;
            (traj.p, traj.gain)
        }
        _ => {
            let k = matrix(mcfg.k.as_deref().unwrap_or_default(), "measurement.k")?;
            if k.shape() != (n, r) {
                return Err(Error::Dimension(format!("gain is {:?}, expected {n}x{r}", k.shape())));
            }
            let kk = k.clone();
            let ps = error_cov_trajectory(&coeffs, &meas, &move |_t| kk.clone(), &p0, &mean, &grid, policy)?;
            let ks = vec![k; ps.len()];
            (ps, ks)
        }
    };
    let mut header = vec!["t".to_string()];
    header.extend(matrix_columns("p", n, n));
    header.extend(matrix_columns("k", n, r));
    header.push("trace_p".into());
    let mut t = Table::new(header);
    for ((time, p), k) in grid.iter().zip(&ps).zip(&ks) {
        let mut row = vec![float(*time)];
        row.extend(real_cells(p));
        row.extend(real_cells(k));
        row.push(float(p.trace()));
        t.push(row);
    }
    let last_k = ks.last().expect("grid is non-empty");
    let observer = observer_ode_coefficients(&coeffs, &meas, last_k)?;
    s.text("mode", if mode == GainMode::Optimal { "optimal" } else { "fixed" });
    s.float("closed_loop_abscissa", observer.closed_loop_abscissa()?);
    s.float("final_trace_p", ps.last().expect("grid is non-empty").trace());
    out.table("filter.csv", &t);
    out.summary(&s);
    Ok(out)
}
