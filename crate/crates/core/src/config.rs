//! Text serialization of structure constants.
//!
//! Matrices are row-major flat arrays; `β` is flattened in `(j, k, ℓ)`
//! order. Floats are written in shortest round-trip form, so decimal
//! literals survive a save/load cycle exactly.

use serde::{Deserialize, Serialize};

use crate::algebra::StructureConstants;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha_im: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta_re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta_im: Vec<f64>,
}

impl ConstantsConfig {
    pub fn build(&self) -> Result<StructureConstants> {
        if let Some(p) = &self.preset {
            if self.n.is_some() || !self.alpha.is_empty() || !self.beta_re.is_empty() || !self.beta_im.is_empty() {
                return Err(Error::Config("`preset` excludes explicit constants".into()));
            }
            return match p.as_str() {
                "pauli" => Ok(StructureConstants::pauli()),
                other => Err(Error::Config(format!("unknown constants preset `{other}`"))),
            };
        }
        let n = self.n.ok_or_else(|| Error::Config("constants need `n` or `preset`".into()))?;
        let n2 = n * n;
        let n3 = n2 * n;
        let field = |name: &str, v: &[f64], len: usize| -> Result<Vec<f64>> {
            match v.len() {
                0 => Ok(vec![0.0; len]),
                l if l == len => Ok(v.to_vec()),
                l => Err(Error::Config(format!("`{name}` has {l} entries, expected {len}"))),
            }
        };
        if self.alpha.len() != n2 {
            return Err(Error::Config(format!("`alpha` has {} entries, expected {n2}", self.alpha.len())));
        }
        let alpha_im = field("alpha_im", &self.alpha_im, n2)?;
        let beta_re = field("beta_re", &self.beta_re, n3)?;
        let beta_im = field("beta_im", &self.beta_im, n3)?;
        let alpha = CMatrix::from_fn(n, n, |j, k| C64::new(self.alpha[j * n + k], alpha_im[j * n + k]));
        let beta = beta_re.iter().zip(&beta_im).map(|(&r, &i)| C64::new(r, i)).collect();
        StructureConstants::new(alpha, beta)
    }

    pub fn from_constants(sc: &StructureConstants) -> Self {
        let n = sc.n();
        let a = sc.alpha();
        let row_major = |f: &dyn Fn(C64) -> f64| -> Vec<f64> {
            (0..n).flat_map(|j| (0..n).map(move |k| (j, k))).map(|(j, k)| f(a[(j, k)])).collect()
        };
        let alpha_im = row_major(&|z| z.im);
        ConstantsConfig {
            preset: None,
            n: Some(n),
            alpha: row_major(&|z| z.re),
            alpha_im: if alpha_im.iter().all(|&x| x == 0.0) { Vec::new() } else { alpha_im },
            beta_re: sc.beta_array().iter().map(|z| z.re).collect(),
            beta_im: sc.beta_array().iter().map(|z| z.im).collect(),
        }
    }
}

pub fn constants_to_toml(sc: &StructureConstants) -> Result<String> {
    toml::to_string(&ConstantsConfig::from_constants(sc)).map_err(|e| Error::Config(e.to_string()))
}

pub fn constants_from_toml(text: &str) -> Result<StructureConstants> {
    let cfg: ConstantsConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_round_trip() {
        let sc = StructureConstants::pauli();
        let text = constants_to_toml(&sc).unwrap();
        assert_eq!(constants_from_toml(&text).unwrap(), sc);
    }

    #[test]
    fn decimal_literals_round_trip_exactly() {
        let text = "n = 1\nalpha = [0.1]\nbeta_re = [0.30000000000000004]\n";
        let sc = constants_from_toml(text).unwrap();
        assert_eq!(sc.alpha()[(0, 0)].re, 0.1);
        let again = constants_from_toml(&constants_to_toml(&sc).unwrap()).unwrap();
        assert_eq!(again, sc);
        assert!(constants_to_toml(&sc).unwrap().contains("0.30000000000000004"));
    }

    #[test]
    fn alpha_is_row_major() {
        let text = "n = 2\nalpha = [1.0, 2.0, 3.0, 4.0]\n";
        let sc = constants_from_toml(text).unwrap();
        assert_eq!(sc.alpha()[(0, 1)].re, 2.0);
        assert_eq!(sc.alpha()[(1, 0)].re, 3.0);
    }

    #[test]
    fn preset_and_errors() {
        assert_eq!(constants_from_toml("preset = \"pauli\"").unwrap(), StructureConstants::pauli());
        assert!(constants_from_toml("preset = \"su3\"").is_err());
        assert!(constants_from_toml("n = 2\nalpha = [1.0]").is_err());
        assert!(constants_from_toml("n = 1\nalpha = [1.0]\nbogus = 3").is_err());
    }

    #[test]
    fn shifted_constants_keep_imaginary_alpha() {
        let sc = StructureConstants::pauli().shift(&crate::linalg::RVector::from_vec(vec![0.5, 0.0, 0.0])).unwrap();
        let back = constants_from_toml(&constants_to_toml(&sc).unwrap()).unwrap();
        assert_eq!(back, sc);
    }
}
