use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FnTarget, Gaussian, GaussianMixture, Lorenz96, PredatorPrey, TargetDensity};
use crate::error::{Error, Result};

/// Serializable description of a built-in target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Constant density on a box.
    Uniform {
        #[serde(rename = "box")]
        bounds: Vec<[f64; 2]>,
    },
    Gaussian {
        /// Row-major covariance rows.
        covariance: Vec<Vec<f64>>,
        /// Per-dimension `[lo, hi]`.
        #[serde(rename = "box")]
        bounds: Vec<[f64; 2]>,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
        #[serde(rename = "box")]
        bounds: Vec<[f64; 2]>,
    },
    PredatorPrey {
        #[serde(default = "default_pp_sigma")]
        sigma: f64,
        /// Interleaved `(P, Q)` observations; synthetic from `data_seed` when absent.
        #[serde(default)]
        data: Option<Vec<f64>>,
        #[serde(default)]
        data_seed: u64,
    },
    Lorenz96 {
        #[serde(default = "default_l96_d")]
        d: usize,
        #[serde(default = "default_l96_sigma")]
        sigma: f64,
        #[serde(default = "default_l96_t")]
        t_final: f64,
        #[serde(default)]
        data: Option<Vec<f64>>,
        #[serde(default)]
        data_seed: u64,
    },
}

fn default_pp_sigma() -> f64 {
    std::f64::consts::SQRT_2
}
fn default_l96_d() -> usize {
    40
}
fn default_l96_sigma() -> f64 {
    0.1
}
fn default_l96_t() -> f64 {
    0.1
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn boxes(b: &[[f64; 2]]) -> Vec<(f64, f64)> {
    b.iter().map(|p| (p[0], p[1])).collect()
}

impl TargetSpec {
    pub fn build(&self) -> Result<Box<dyn TargetDensity>> {
        Ok(match self {
            TargetSpec::Uniform { bounds } => {
                if bounds.is_empty() || bounds.iter().any(|p| !(p[0] < p[1])) {
                    return Err(Error::InvalidArgument("uniform box needs lo < hi in every dimension".into()));
                }
                Box::new(FnTarget::new("uniform", boxes(bounds), |_: &[f64]| 0.0))
            }
            TargetSpec::Gaussian { covariance, bounds } => {
                Box::new(Gaussian::new(matrix(covariance)?, boxes(bounds))?)
            }
            TargetSpec::GaussianMixture {
                weights,
                means,
                covariances,
                bounds,
            } => Box::new(GaussianMixture::new(
                weights.clone(),
                means.clone(),
                covariances.iter().map(|c| matrix(c)).collect::<Result<_>>()?,
                boxes(bounds),
            )?),
            TargetSpec::PredatorPrey { sigma, data, data_seed } => match data {
                Some(y) => Box::new(PredatorPrey::new(
                    y.clone(),
                    *sigma,
                    super::predator_prey::LOWER.to_vec(),
                    super::predator_prey::UPPER.to_vec(),
                )?),
                None => Box::new(PredatorPrey::synthetic(*sigma, *data_seed)?),
            },
            TargetSpec::Lorenz96 {
                d,
                sigma,
                t_final,
                data,
                data_seed,
            } => match data {
                Some(y) => Box::new(Lorenz96::new(*d, y.clone(), *sigma, *t_final)?),
                None => Box::new(Lorenz96::synthetic(*d, *sigma, *t_final, *data_seed)?.0),
            },
        })
    }
}
