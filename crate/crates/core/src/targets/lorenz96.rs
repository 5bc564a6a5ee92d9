use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ode::rk4;
use super::{LogParts, TargetDensity};
use crate::error::{Error, Result};

const FORCING: f64 = 8.0;
const PRIOR_BOUND: f64 = 10.0;
const PRIOR_MEAN: f64 = 1.0;

/// Posterior of the Lorenz-96 initial state from the even-indexed
/// (1-based) components at the final time, with a truncated normal prior.
#[derive(Clone, Debug)]
pub struct Lorenz96 {
    d: usize,
    data: Vec<f64>,
    sigma: f64,
    t_final: f64,
    step: f64,
}

impl Lorenz96 {
    pub fn new(d: usize, data: Vec<f64>, sigma: f64, t_final: f64) -> Result<Self> {
        if d < 4 || d % 2 == 1 {
            return Err(Error::InvalidArgument(format!("dimension {d} must be even and ≥ 4")));
        }
        if data.len() != d / 2 {
            return Err(Error::InvalidArgument(format!("expected {} observations", d / 2)));
        }
        if !(sigma > 0.0 && t_final > 0.0) {
            return Err(Error::InvalidArgument("sigma and final time must be positive".into()));
        }
        Ok(Self {
            d,
            data,
            sigma,
            t_final,
            step: 1e-3,
        })
    }

    /// Truth drawn from `N(1, 1e-4 I)`, data `G(x_true) + σ·η`, one seed.
    pub fn synthetic(d: usize, sigma: f64, t_final: f64, seed: u64) -> Result<(Self, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..d)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                PRIOR_MEAN + 1e-2 * e
            })
            .collect();
        let probe = Self::new(d, vec![0.0; d / 2], sigma, t_final)?;
        let data = probe
            .forward(&truth)
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + sigma * e
            })
            .collect();
        Ok((Self::new(d, data, sigma, t_final)?, truth))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Components `P_2, P_4, …` (1-based) at the final time.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let rhs = |p: &[f64], dp: &mut [f64]| {
            for i in 0..d {
                let ip1 = (i + 1) % d;
                let im1 = (i + d - 1) % d;
                let im2 = (i + d - 2) % d;
                dp[i] = (p[ip1] - p[im2]) * p[im1] - p[i] + FORCING;
            }
        };
        let steps = (self.t_final / self.step).round() as usize;
        let mut y = x.to_vec();
        rk4(rhs, &mut y, self.t_final / steps as f64, steps, 0, |_, _| {});
        y.iter().skip(1).step_by(2).copied().collect()
    }
}

impl TargetDensity for Lorenz96 {
    fn dim(&self) -> usize {
        self.d
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        vec![(-PRIOR_BOUND, PRIOR_BOUND); self.d]
    }

    fn name(&self) -> &str {
        "lorenz96"
    }

    fn has_split(&self) -> bool {
        true
    }

    fn log_parts(&self, x: &[f64]) -> LogParts {
        if x.iter().any(|v| !(v.abs() <= PRIOR_BOUND)) {
            return LogParts::outside();
        }
        let prior = -0.5 * x.iter().map(|v| (v - PRIOR_MEAN).powi(2)).sum::<f64>();
        let g = self.forward(x);
        let ss: f64 = g.iter().zip(&self.data).map(|(a, b)| (a - b).powi(2)).sum();
        let likelihood = if ss.is_finite() {
            -ss / (2.0 * self.sigma * self.sigma)
        } else {
            f64::NEG_INFINITY
        };
        LogParts {
            in_support: true,
            prior,
            likelihood,
        }
    }
}
