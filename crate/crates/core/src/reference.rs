//! Product reference measures and the map `R` onto the unit cube.

use rand::Rng;
use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Reference {
    /// Uniform on `[0, 1]` per dimension; `R` is the identity.
    Uniform {},
    /// Standard normal truncated to `[-bound, bound]` per dimension.
    TruncatedNormal { bound: f64 },
}

impl Default for Reference {
    fn default() -> Self {
        Reference::TruncatedNormal { bound: 4.0 }
    }
}

/// Standard normal lower tail `Φ(x)` without cancellation for large `|x|`.
fn phi_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn phi_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl Reference {
    pub fn truncated_normal(bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidArgument(format!("reference bound {bound} must be positive")));
        }
        Ok(Reference::TruncatedNormal { bound })
    }

    /// Per-dimension support.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            Reference::Uniform {} => (0.0, 1.0),
            Reference::TruncatedNormal { bound } => (-bound, bound),
        }
    }

    fn mass(bound: f64) -> f64 {
        1.0 - 2.0 * phi_cdf(-bound)
    }

    /// `F_U(u)` for one coordinate.
    pub fn cdf(&self, u: f64) -> f64 {
        match *self {
            Reference::Uniform {} => u.clamp(0.0, 1.0),
            Reference::TruncatedNormal { bound } => {
                let u = u.clamp(-bound, bound);
                let lo = phi_cdf(-bound);
                let z = Self::mass(bound);
                // Use the tail nearer to u to keep relative accuracy.
                if u <= 0.0 {
                    ((phi_cdf(u) - lo) / z).clamp(0.0, 1.0)
                } else {
                    (1.0 - (phi_cdf(-u) - lo) / z).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// `F_U⁻¹(v)` for one coordinate.
    pub fn inv_cdf(&self, v: f64) -> f64 {
        match *self {
            Reference::Uniform {} => v.clamp(0.0, 1.0),
            Reference::TruncatedNormal { bound } => {
                if v <= 0.0 {
                    return -bound;
                }
                if v >= 1.0 {
                    return bound;
                }
                let lo = phi_cdf(-bound);
                let z = Self::mass(bound);
                let (p, sign) = if v <= 0.5 { (lo + v * z, -1.0) } else { (lo + (1.0 - v) * z, 1.0) };
                // p is a lower-tail probability of -|u|.
                let mut t = -SQRT_2 * erfc_inv(2.0 * p);
                for _ in 0..3 {
                    let r = phi_cdf(t) - p;
                    let d = phi_pdf(t);
                    if d <= 0.0 {
                        break;
                    }
                    t -= r / d;
                }
                (-sign * t).clamp(-bound, bound)
            }
        }
    }

    /// Log density `log f_U(u)` of one coordinate.
    pub fn log_pdf_1d(&self, u: f64) -> f64 {
        match *self {
            Reference::Uniform {} => 0.0,
            Reference::TruncatedNormal { bound } => {
                -0.5 * u * u - 0.5 * (2.0 * std::f64::consts::PI).ln() - Self::mass(bound).ln()
            }
        }
    }

    pub fn ref_to_uniform(&self, u: &[f64]) -> Result<Vec<f64>> {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * (hi - lo);
        u.iter()
            .enumerate()
            .map(|(k, &x)| {
                if x < lo - slack || x > hi + slack || x.is_nan() {
                    Err(Error::OutOfDomain { dim: k, value: x, lo, hi })
                } else {
                    Ok(self.cdf(x))
                }
            })
            .collect()
    }

    pub fn uniform_to_ref(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|&x| self.inv_cdf(x)).collect()
    }

    /// `log f_U(u) − log ω(u)` with `ω ≡ 1`.
    pub fn log_pdf_ratio(&self, u: &[f64]) -> f64 {
        u.iter().map(|&x| self.log_pdf_1d(x)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Vec<f64> {
        (0..d).map(|_| self.inv_cdf(rng.random::<f64>())).collect()
    }
}
