use nalgebra::{DMatrix, DVector};

use super::{in_box, LogParts, TargetDensity};
use crate::error::{Error, Result};

/// `log π(x) = −½ xᵀ C⁻¹ x` restricted to a box.
#[derive(Clone, Debug)]
pub struct Gaussian {
    precision: DMatrix<f64>,
    domain: Vec<(f64, f64)>,
    log_det: f64,
}

impl Gaussian {
    pub fn new(covariance: DMatrix<f64>, domain: Vec<(f64, f64)>) -> Result<Self> {
        let d = covariance.nrows();
        if covariance.ncols() != d || domain.len() != d {
            return Err(Error::InvalidArgument("covariance and box dimensions differ".into()));
        }
        if (&covariance - covariance.transpose()).amax() > 1e-12 * covariance.amax() {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            precision: chol.inverse(),
            domain,
            log_det,
        })
    }

    /// `∫ exp(−½ xᵀC⁻¹x)` over all of `ℝ^d`.
    pub fn full_space_normalizer(&self) -> f64 {
        let d = self.precision.nrows() as f64;
        (0.5 * d * (2.0 * std::f64::consts::PI).ln() + 0.5 * self.log_det).exp()
    }
}

impl TargetDensity for Gaussian {
    fn dim(&self) -> usize {
        self.domain.len()
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.domain.clone()
    }

    fn name(&self) -> &str {
        "gaussian"
    }

    fn log_parts(&self, x: &[f64]) -> LogParts {
        if !in_box(x, &self.domain) {
            return LogParts::outside();
        }
        let v = DVector::from_column_slice(x);
        LogParts {
            in_support: true,
            prior: 0.0,
            likelihood: -0.5 * (v.transpose() * &self.precision * &v)[(0, 0)],
        }
    }
}

/// Weighted sum of unnormalized Gaussian bumps on a box.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    precisions: Vec<DMatrix<f64>>,
    domain: Vec<(f64, f64)>,
}

impl GaussianMixture {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<DMatrix<f64>>,
        domain: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let d = domain.len();
        if weights.len() != means.len() || weights.len() != covariances.len() || weights.is_empty() {
            return Err(Error::InvalidArgument("mixture component counts differ".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument("mixture weights must be positive".into()));
        }
        let mut precisions = Vec::new();
        for c in &covariances {
            if c.nrows() != d || c.ncols() != d {
                return Err(Error::InvalidArgument("covariance dimension mismatch".into()));
            }
            let chol = c
                .clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?;
            precisions.push(chol.inverse());
        }
        if means.iter().any(|m| m.len() != d) {
            return Err(Error::InvalidArgument("mean dimension mismatch".into()));
        }
        Ok(Self {
            weights,
            means: means.into_iter().map(DVector::from_vec).collect(),
            precisions,
            domain,
        })
    }
}

impl TargetDensity for GaussianMixture {
    fn dim(&self) -> usize {
        self.domain.len()
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.domain.clone()
    }

    fn name(&self) -> &str {
        "gaussian-mixture"
    }

    fn log_parts(&self, x: &[f64]) -> LogParts {
        if !in_box(x, &self.domain) {
            return LogParts::outside();
        }
        let v = DVector::from_column_slice(x);
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.precisions)
            .map(|((w, m), p)| {
                let r = &v - m;
                w.ln() - 0.5 * (r.transpose() * p * &r)[(0, 0)]
            })
            .collect();
        LogParts {
            in_support: true,
            prior: 0.0,
            likelihood: crate::linalg::log_sum_exp(&terms),
        }
    }
}
