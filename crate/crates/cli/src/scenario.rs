//! Scenario files: one TOML document describing the constants, the plant,
//! the time grid and the optional measurement and moment queries.
//!
//! Matrices are written as arrays of rows. Unknown keys are rejected so a
//! typo never silently falls back to a default.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use quasilinear::config::ConstantsConfig;
use quasilinear::linalg::{CVector, RMatrix, RVector, StepPolicy, C64};
use quasilinear::moments::EntireFn;
use quasilinear::{presets, Error, Result, StructureConstants, SystemSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: Option<u64>,
    /// Output directory, relative to the scenario file.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub plant: Option<PlantConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Initial mean; zero when absent.
    #[serde(default)]
    pub initial_mean: Option<Vec<f64>>,
    #[serde(default)]
    pub invariant: InvariantConfig,
    #[serde(default)]
    pub measurement: Option<MeasurementConfig>,
    #[serde(default)]
    pub moments: Vec<MomentConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    #[serde(default)]
    pub energy: Option<Vec<f64>>,
    #[serde(default)]
    pub coupling: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
    /// Seeded random Pauli plant; excludes the explicit fields.
    #[serde(default)]
    pub random: Option<RandomPlant>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPlant {
    pub channels: usize,
    #[serde(default = "one")]
    pub energy_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    /// Output sampling interval.
    pub step: f64,
    /// Integrator step; defaults to `step / 10`.
    #[serde(default)]
    pub substep: Option<f64>,
}

impl GridConfig {
    pub fn times(&self) -> Result<Vec<f64>> {
        quasilinear::linalg::uniform_grid(0.0, self.horizon, self.step)
    }

    pub fn policy(&self) -> Result<StepPolicy> {
        let h = self.substep.unwrap_or(self.step / 10.0);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Grid(format!("integrator step {h} must be positive")));
        }
        Ok(StepPolicy::Fixed(h))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantConfig {
    /// Spectral density sampled on `omega_points` equispaced frequencies in
    /// `[−omega_max, omega_max]`.
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default = "default_points")]
    pub omega_points: usize,
    /// QCF sampled along each coordinate axis, `|u| ≤ qcf_radius`.
    #[serde(default = "default_qcf_radius")]
    pub qcf_radius: f64,
    #[serde(default = "default_points")]
    pub qcf_points: usize,
}

fn default_omega_max() -> f64 {
    20.0
}

fn default_points() -> usize {
    65
}

fn default_qcf_radius() -> f64 {
    std::f64::consts::PI
}

impl Default for InvariantConfig {
    fn default() -> Self {
        InvariantConfig {
            omega_max: default_omega_max(),
            omega_points: default_points(),
            qcf_radius: default_qcf_radius(),
            qcf_points: default_points(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    Optimal,
    Fixed,
    Steady,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub d: Vec<Vec<f64>>,
    pub gain: GainMode,
    /// Constant gain for `gain = "fixed"`.
    #[serde(default)]
    pub k: Option<Vec<Vec<f64>>>,
}

/// A moment query. Without `function` it is the multi-point moment
/// `E u_qᵀX(t_q) ⋯ u₁ᵀX(t₁)` with real directions `directions` and optional
/// imaginary parts `directions_im`. With `function` it is the single-time
/// functional `E f(uᵀX(t))`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentConfig {
    pub times: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    #[serde(default)]
    pub directions_im: Option<Vec<Vec<f64>>>,
    /// `"exp_i"` or `"power:<k>"`.
    #[serde(default)]
    pub function: Option<String>,
}

impl MomentConfig {
    pub fn complex_directions(&self) -> Result<Vec<CVector>> {
        let im = match &self.directions_im {
            Some(im) if im.len() != self.directions.len() => {
                return Err(Error::Config("`directions_im` must match `directions`".into()))
            }
            Some(im) => im.clone(),
            None => self.directions.iter().map(|d| vec![0.0; d.len()]).collect(),
        };
        self.directions
            .iter()
            .zip(&im)
            .map(|(re, im)| {
                if re.len() != im.len() {
                    return Err(Error::Config("direction and its imaginary part differ in length".into()));
                }
                Ok(CVector::from_iterator(re.len(), re.iter().zip(im).map(|(&r, &i)| C64::new(r, i))))
            })
            .collect()
    }

    pub fn entire_fn(&self) -> Result<Option<EntireFn>> {
        let Some(name) = &self.function else { return Ok(None) };
        if name == "exp_i" {
            return Ok(Some(EntireFn::exp_i()));
        }
        if let Some(k) = name.strip_prefix("power:") {
            let k: usize = k.parse().map_err(|_| Error::Config(format!("bad power in `{name}`")))?;
            return Ok(Some(EntireFn::monomial(k)));
        }
        Err(Error::Config(format!("unknown function `{name}`")))
    }
}

pub fn matrix(rows: &[Vec<f64>], name: &str) -> Result<RMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!("`{name}` has ragged rows")));
    }
    Ok(RMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))?;
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if let Some(m) = &self.measurement {
            match (m.gain, &m.k) {
                (GainMode::Fixed, None) => return Err(Error::Config("`gain = \"fixed\"` needs `k`".into())),
                (GainMode::Optimal | GainMode::Steady, Some(_)) => {
                    return Err(Error::Config("`k` is only read with `gain = \"fixed\"`".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn structure_constants(&self) -> Result<StructureConstants> {
        self.constants.build()
    }

    /// The plant, drawing a random one from `seed` when requested.
    pub fn system(&self, seed: Option<u64>) -> Result<SystemSpec> {
        let sc = self.structure_constants()?;
        let plant = self.plant.as_ref().ok_or_else(|| Error::Config("missing [plant]".into()))?;
        if let Some(r) = &plant.random {
            if plant.energy.is_some() || plant.coupling.is_some() || plant.offset.is_some() {
                return Err(Error::Config("`plant.random` excludes explicit E, M, N".into()));
            }
            if sc != StructureConstants::pauli() {
                return Err(Error::Config("`plant.random` draws Pauli plants only".into()));
            }
            let seed = seed.or(self.seed).ok_or_else(|| Error::Config("`plant.random` needs a seed".into()))?;
            return presets::random_pauli_plant(seed, r.channels, r.energy_scale);
        }
        let n = sc.n();
        let e = RVector::from_vec(plant.energy.clone().unwrap_or_else(|| vec![0.0; n]));
        let m = matrix(
            plant.coupling.as_deref().ok_or_else(|| Error::Config("missing `plant.coupling`".into()))?,
            "plant.coupling",
        )?;
        let nvec = RVector::from_vec(plant.offset.clone().unwrap_or_else(|| vec![0.0; m.nrows()]));
        SystemSpec::new(sc, e, m, nvec)
    }

    pub fn initial_mean(&self, n: usize) -> Result<RVector> {
        match &self.initial_mean {
            None => Ok(RVector::zeros(n)),
            Some(v) if v.len() == n => Ok(RVector::from_vec(v.clone())),
            Some(v) => Err(Error::Dimension(format!("initial_mean has {} entries, n = {n}", v.len()))),
        }
    }

    pub fn grid(&self) -> Result<&GridConfig> {
        self.grid.as_ref().ok_or_else(|| Error::Config("missing [grid]".into()))
    }
}
