//! Exact-inference corrections with a DIRT proposal: independence
//! Metropolis–Hastings and self-normalized importance sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dirt::Dirt;
use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;
use crate::targets::TargetDensity;

/// Optional quantity of interest `h(x)`.
pub type Observable<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

#[derive(Clone, Debug)]
pub struct ChainResult {
    pub dim: usize,
    /// Row-major `N × d`.
    pub states: Vec<f64>,
    pub accepted: Vec<bool>,
    pub accept_rate: f64,
    pub iact: f64,
    pub h_values: Option<Vec<f64>>,
    /// Proposals whose target log-density was not a number or `+∞`.
    pub non_finite: usize,
    pub n_evals: usize,
}

impl ChainResult {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Clone, Debug)]
pub struct IsResult {
    pub dim: usize,
    /// Row-major `N × d`.
    pub samples: Vec<f64>,
    pub log_weights: Vec<f64>,
    /// Mean weight, an unbiased estimate of the normalizing constant.
    pub z_bar_n: f64,
    pub ess: f64,
    pub ratio_estimate: Option<f64>,
    pub h_values: Option<Vec<f64>>,
    pub non_finite: usize,
    pub n_evals: usize,
}

impl IsResult {
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }
}

/// JSON-friendly run summary.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub accept_rate: Option<f64>,
    pub iact: Option<f64>,
    pub ess: Option<f64>,
    pub z_bar: Option<f64>,
    pub n_evals: usize,
}

impl From<&ChainResult> for Diagnostics {
    fn from(c: &ChainResult) -> Self {
        Self {
            accept_rate: Some(c.accept_rate),
            iact: Some(c.iact),
            ess: None,
            z_bar: None,
            n_evals: c.n_evals,
        }
    }
}

impl From<&IsResult> for Diagnostics {
    fn from(r: &IsResult) -> Self {
        Self {
            accept_rate: None,
            iact: None,
            ess: Some(r.ess),
            z_bar: Some(r.z_bar_n),
            n_evals: r.n_evals,
        }
    }
}

struct Proposal {
    x: Vec<f64>,
    log_q: f64,
    log_pi: f64,
    finite: bool,
}

fn propose(dirt: &Dirt, target: &dyn TargetDensity, v: &[f64]) -> Result<Proposal> {
    let (x, log_q) = dirt.irt(v)?;
    let parts = target.log_parts(&x);
    let lp = parts.total();
    let finite = !parts.in_support
        || !(parts.prior.is_nan() || parts.likelihood.is_nan() || lp == f64::INFINITY);
    Ok(Proposal {
        x,
        log_q,
        log_pi: if finite { lp } else { f64::NEG_INFINITY },
        finite,
    })
}

fn check_dims(dirt: &Dirt, target: &dyn TargetDensity, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    if dirt.dim() != target.dim() {
        return Err(Error::InvalidArgument(format!(
            "DIRT dimension {} does not match target dimension {}",
            dirt.dim(),
            target.dim()
        )));
    }
    Ok(())
}

/// Independence sampler with DIRT proposals.
///
/// Uniforms come from one sequential stream: `N + 1` proposal draws, then
/// `N` acceptance draws. Proposals are evaluated in parallel since they do
/// not depend on the chain. The first proposal is the initial state.
pub fn irt_mcmc(
    dirt: &Dirt,
    target: &dyn TargetDensity,
    n: usize,
    seed: u64,
    h: Option<Observable>,
) -> Result<ChainResult> {
    check_dims(dirt, target, n)?;
    let d = dirt.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..(n + 1) * d).map(|_| rng.random::<f64>()).collect();
    let props = v
        .par_chunks(d)
        .map(|r| propose(dirt, target, r))
        .collect::<Result<Vec<_>>>()?;
    let non_finite = props.iter().filter(|p| !p.finite).count();
    if non_finite > 0 {
        log::warn!("{non_finite} proposals had a non-finite target density and were rejected");
    }

    let mut cur = 0;
    let mut states = Vec::with_capacity(n * d);
    let mut accepted = Vec::with_capacity(n);
    for (j, p) in props.iter().enumerate().skip(1) {
        let c = &props[cur];
        let log_alpha = (p.log_pi - p.log_q) - (c.log_pi - c.log_q);
        let u: f64 = rng.random();
        let acc = p.finite
            && p.log_pi > f64::NEG_INFINITY
            && (log_alpha >= 0.0 || c.log_pi == f64::NEG_INFINITY || u.ln() < log_alpha);
        if acc {
            cur = j;
        }
        accepted.push(acc);
        states.extend_from_slice(&props[cur].x);
    }
    let n_acc = accepted.iter().filter(|&&a| a).count();
    let h_values = h.map(|h| states.chunks(d).map(h).collect::<Vec<f64>>());
    let iact = match &h_values {
        Some(hv) => chain_iact(hv),
        None => (0..d)
            .map(|k| chain_iact(&states.iter().skip(k).step_by(d).copied().collect::<Vec<_>>()))
            .fold(1.0, f64::max),
    };
    Ok(ChainResult {
        dim: d,
        states,
        accepted,
        accept_rate: n_acc as f64 / n as f64,
        iact,
        h_values,
        non_finite,
        n_evals: n + 1,
    })
}

/// Chains too short for the estimator report the trivial bound `N`.
fn chain_iact(series: &[f64]) -> f64 {
    iact(series).unwrap_or(series.len() as f64)
}

/// Self-normalized importance sampling with DIRT proposals.
///
/// Sample `j` uses stream `j` of the seeded generator, so results do not
/// depend on thread count or evaluation order.
pub fn irt_is(
    dirt: &Dirt,
    target: &dyn TargetDensity,
    n: usize,
    seed: u64,
    h: Option<Observable>,
) -> Result<IsResult> {
    check_dims(dirt, target, n)?;
    let d = dirt.dim();
    let props = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            propose(dirt, target, &v)
        })
        .collect::<Result<Vec<_>>>()?;
    let non_finite = props.iter().filter(|p| !p.finite).count();
    if non_finite > 0 {
        log::warn!("{non_finite} samples had a non-finite target density and get zero weight");
    }
    let log_weights: Vec<f64> = props.iter().map(|p| p.log_pi - p.log_q).collect();
    let lse = log_sum_exp(&log_weights);
    if lse == f64::NEG_INFINITY {
        return Err(Error::ZeroDensity);
    }
    let doubled: Vec<f64> = log_weights.iter().map(|w| 2.0 * w).collect();
    let ess = (2.0 * lse - log_sum_exp(&doubled)).exp().min(n as f64);
    let z_bar_n = (lse - (n as f64).ln()).exp();
    let mut samples = Vec::with_capacity(n * d);
    for p in &props {
        samples.extend_from_slice(&p.x);
    }
    let h_values = h.map(|h| samples.chunks(d).map(h).collect::<Vec<f64>>());
    let ratio_estimate = h_values.as_ref().map(|hv| {
        let w = normalized_weights(&log_weights);
        w.iter().zip(hv).map(|(w, h)| w * h).sum::<f64>()
    });
    Ok(IsResult {
        dim: d,
        samples,
        log_weights,
        z_bar_n,
        ess,
        ratio_estimate,
        h_values,
        non_finite,
        n_evals: n,
    })
}

/// Weights scaled to sum to one.
fn normalized_weights(log_w: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(log_w);
    log_w.iter().map(|w| (w - lse).exp()).collect()
}

/// Integrated autocorrelation time with Geyer's initial positive sequence
/// (made monotone). Autocovariances are computed lazily, lag by lag, until
/// the truncation point.
pub fn iact(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!("series of length {n} is too short (need 10)")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let acov = |lag: usize| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let g0 = acov(0);
    if !(g0 > 0.0) {
        log::warn!("constant series; reporting IACT = N");
        return Ok(n as f64);
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (acov(2 * m) + acov(2 * m + 1)).min(prev);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        prev = pair;
        m += 1;
    }
    Ok((-1.0 + 2.0 * sum / g0).max(1.0))
}

/// Delta-method MSE of the ratio estimator,
/// `(1/N)·mean(w²(h − I_N)²) / mean(w)²`.
pub fn mse_diagnostic(is: &IsResult, h_values: &[f64]) -> Result<f64> {
    let n = is.len();
    if h_values.len() != n {
        return Err(Error::InvalidArgument("h_values length does not match sample count".into()));
    }
    // w normalized to sum 1, so mean(w) = 1/N
    let w = normalized_weights(&is.log_weights);
    let i_n: f64 = w.iter().zip(h_values).map(|(w, h)| w * h).sum();
    let s: f64 = w.iter().zip(h_values).map(|(w, h)| (w * (h - i_n)).powi(2)).sum();
    Ok(s)
}
