use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ode::rk4;
use super::{in_box, LogParts, TargetDensity};
use crate::error::{Error, Result};

/// Parameters `[P0, Q0, r, K, a, s, u, v]`.
pub const X_TRUE: [f64; 8] = [50.0, 5.0, 0.6, 100.0, 1.2, 25.0, 0.5, 0.3];
pub const LOWER: [f64; 8] = [30.0, 3.0, 0.36, 60.0, 0.72, 15.0, 0.3, 0.18];
pub const UPPER: [f64; 8] = [80.0, 8.0, 0.96, 160.0, 1.92, 40.0, 0.8, 0.48];
pub const N_TIMES: usize = 13;
const DT_OBS: f64 = 25.0 / 6.0;
const STEPS_PER_OBS: usize = 100;

/// Posterior of the predator–prey ODE parameters with a box prior.
#[derive(Clone, Debug)]
pub struct PredatorPrey {
    data: Vec<f64>,
    sigma: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PredatorPrey {
    /// `data` holds `(P(t_i), Q(t_i))` interleaved for the 13 times.
    pub fn new(data: Vec<f64>, sigma: f64, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * N_TIMES {
            return Err(Error::InvalidArgument(format!(
                "expected {} observations, got {}",
                2 * N_TIMES,
                data.len()
            )));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        if lower.len() != 8 || upper.len() != 8 || lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument("prior box must be 8 increasing intervals".into()));
        }
        Ok(Self {
            data,
            sigma,
            lower,
            upper,
        })
    }

    /// Data `G(x_true) + σ·η` with `η` from a seeded generator.
    pub fn synthetic(sigma: f64, seed: u64) -> Result<Self> {
        let clean = Self::forward(&X_TRUE).ok_or_else(|| Error::InvalidArgument("forward solve failed".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = clean
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + sigma * e
            })
            .collect();
        Self::new(data, sigma, LOWER.to_vec(), UPPER.to_vec())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Observation times `t_i = (i−1)·25/6`.
    pub fn times() -> Vec<f64> {
        (0..N_TIMES).map(|i| i as f64 * DT_OBS).collect()
    }

    /// `G(x)`, or `None` if the solution blows up.
    pub fn forward(x: &[f64]) -> Option<Vec<f64>> {
        Self::forward_with_steps(x, STEPS_PER_OBS)
    }

    pub fn forward_with_steps(x: &[f64], steps_per_obs: usize) -> Option<Vec<f64>> {
        // x[4] scales the interaction and x[5] is its half-saturation level;
        // the other reading drives the prey extinct before the first observation.
        let (r, k, rate, half_sat, u, v) = (x[2], x[3], x[4], x[5], x[6], x[7]);
        let rhs = |y: &[f64], dy: &mut [f64]| {
            let (p, q) = (y[0], y[1]);
            let inter = p * q / (half_sat + p);
            dy[0] = r * p * (1.0 - p / k) - rate * inter;
            dy[1] = u * inter - v * q;
        };
        let mut y = [x[0], x[1]];
        let mut out = Vec::with_capacity(2 * N_TIMES);
        let h = DT_OBS / steps_per_obs as f64;
        rk4(rhs, &mut y, h, (N_TIMES - 1) * steps_per_obs, steps_per_obs, |_, y| {
            out.extend_from_slice(y)
        });
        if out.iter().all(|v| v.is_finite()) {
            Some(out)
        } else {
            None
        }
    }
}

impl TargetDensity for PredatorPrey {
    fn dim(&self) -> usize {
        8
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.lower.iter().copied().zip(self.upper.iter().copied()).collect()
    }

    fn name(&self) -> &str {
        "predator-prey"
    }

    fn has_split(&self) -> bool {
        true
    }

    fn log_parts(&self, x: &[f64]) -> LogParts {
        if !in_box(x, &self.domain()) {
            return LogParts::outside();
        }
        let likelihood = match Self::forward(x) {
            Some(g) => {
                let ss: f64 = g.iter().zip(&self.data).map(|(a, b)| (a - b).powi(2)).sum();
                -ss / (2.0 * self.sigma * self.sigma)
            }
            None => f64::NEG_INFINITY,
        };
        LogParts {
            in_support: true,
            prior: 0.0,
            likelihood,
        }
    }
}
