//! Squared inverse Rosenblatt transport.
//!
//! The density is `f̂(x) = (g̃(x)² + γ/V) / (ẑ + γ)`, a mixture of the
//! normalized squared surrogate and the uniform density on the box of volume
//! `V`. Coordinates are conditioned in order `x_1, …, x_d`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{pdf_to_cdf, Cdf1D};
use crate::error::{Error, Result};
use crate::ftt::Ftt;
use crate::linalg::thin_qr;
use crate::tensor::Tensor3;

/// Tail constant `γ`, absolute or relative to `ẑ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tail {
    Absolute(f64),
    Relative(f64),
}

impl Default for Tail {
    fn default() -> Self {
        Tail::Relative(1e-10)
    }
}

#[derive(Clone, Debug)]
pub struct Sirt {
    g: Ftt,
    marg: Vec<Tensor3>,
    z_hat: f64,
    gamma: f64,
    /// `V_{≤k}`, the volume of the leading `k+1` coordinates.
    volumes: Vec<f64>,
}

pub fn build_sirt(g: Ftt, tail: Tail) -> Result<Sirt> {
    let d = g.dim();
    let mut marg: Vec<Tensor3> = vec![Tensor3::zeros(1, 1, 1); d];
    marg[d - 1] = g.cores()[d - 1].clone();
    for k in (1..d).rev() {
        let c = marg[k].mode2(g.bases()[k].mass_cholesky());
        let (_, r) = thin_qr(&c.right_unfold().transpose());
        marg[k - 1] = g.cores()[k - 1].mode3(&r.transpose());
    }
    let c0 = marg[0].mode2(g.bases()[0].mass_cholesky());
    let z_hat = c0.as_slice().iter().map(|x| x * x).sum::<f64>();
    let gamma = match tail {
        Tail::Absolute(t) => t,
        Tail::Relative(t) => t * z_hat,
    };
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("tail constant {gamma} must be ≥ 0")));
    }
    if !z_hat.is_finite() || z_hat + gamma <= 0.0 {
        return Err(Error::ZeroDensity);
    }
    let mut volumes = Vec::with_capacity(d);
    let mut v = 1.0;
    for b in g.bases() {
        let (lo, hi) = b.domain();
        v *= hi - lo;
        volumes.push(v);
    }
    Ok(Sirt {
        g,
        marg,
        z_hat,
        gamma,
        volumes,
    })
}

/// Prefix product `G_{<k}` stored as `exp(log_scale)·g` with `max |g| = 1`.
struct Prefix {
    g: Vec<f64>,
    log_scale: f64,
}

impl Prefix {
    fn new() -> Self {
        Self {
            g: vec![1.0],
            log_scale: 0.0,
        }
    }

    fn advance(&mut self, core: &Tensor3, phi: &[f64]) {
        let mut next = vec![0.0; core.shape().2];
        core.vec_contract(&self.g, phi, &mut next);
        let s = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s > 0.0 && s.is_finite() {
            next.iter_mut().for_each(|v| *v /= s);
            self.log_scale += s.ln();
        }
        self.g = next;
    }
}

impl Sirt {
    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn ftt(&self) -> &Ftt {
        &self.g
    }

    pub fn marginal_tensors(&self) -> &[Tensor3] {
        &self.marg
    }

    /// `ẑ = ∫ g̃²`.
    pub fn z_hat(&self) -> f64 {
        self.z_hat
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn volume(&self) -> f64 {
        self.volumes[self.dim() - 1]
    }

    pub fn domain(&self) -> Vec<(f64, f64)> {
        self.g.bases().iter().map(|b| b.domain()).collect()
    }

    /// Rebuilds from stored parts without recomputing the recursion.
    pub(crate) fn from_parts(g: Ftt, marg: Vec<Tensor3>, z_hat: f64, gamma: f64) -> Result<Self> {
        if marg.len() != g.dim() {
            return Err(Error::Format("marginal tensor count mismatch".into()));
        }
        let mut volumes = Vec::with_capacity(g.dim());
        let mut v = 1.0;
        for b in g.bases() {
            let (lo, hi) = b.domain();
            v *= hi - lo;
            volumes.push(v);
        }
        Ok(Self {
            g,
            marg,
            z_hat,
            gamma,
            volumes,
        })
    }

    /// `Σ_α G_α·B_k[α, :, :]` as an `n_k × r` matrix.
    fn contract_prefix(&self, k: usize, g: &[f64]) -> DMatrix<f64> {
        let b = &self.marg[k];
        let (r0, n, r1) = b.shape();
        DMatrix::from_fn(n, r1, |i, l| (0..r0).map(|a| g[a] * b.get(a, i, l)).sum())
    }

    /// Coefficients `D_k` with `Σ_ℓ (Σ_i φ_i(x_k) D_k[i,ℓ])²` equal to the
    /// squared-part conditional density of `x_k` given the prefix, where
    /// `marg_value` is the squared-part marginal of the prefix.
    pub fn conditional_coeffs(&self, k: usize, prefix: &[f64], marg_value: f64) -> DMatrix<f64> {
        self.contract_prefix(k, prefix) / marg_value.sqrt()
    }

    /// One-dimensional conditional CDF of coordinate `k` for a prefix.
    fn conditional(&self, k: usize, p: &Prefix) -> Result<Cdf1D> {
        let d = self.contract_prefix(k, &p.g);
        let tail = self.gamma / self.volumes[k] * (-2.0 * p.log_scale).exp();
        pdf_to_cdf(&self.g.bases()[k], &d, tail)
    }

    /// Inverse Rosenblatt map `u ∈ [0,1]^d ↦ x`, with `log f̂(x)`.
    pub fn irt_forward(&self, u: &[f64]) -> Result<(Vec<f64>, f64)> {
        let d = self.dim();
        assert_eq!(u.len(), d);
        let mut x = vec![0.0; d];
        let mut logpdf = 0.0;
        let mut p = Prefix::new();
        let mut phi = Vec::new();
        for k in 0..d {
            let cdf = self.conditional(k, &p)?;
            let xk = cdf.invert(u[k].clamp(0.0, 1.0));
            logpdf += cdf.pdf(xk).ln() - cdf.total_mass().ln();
            x[k] = xk;
            if k + 1 < d {
                let basis = &self.g.bases()[k];
                phi.resize(basis.cardinality(), 0.0);
                basis.eval_into(xk, &mut phi);
                p.advance(&self.g.cores()[k], &phi);
            }
        }
        Ok((x, logpdf))
    }

    /// Rosenblatt map `x ↦ u ∈ [0,1]^d`.
    pub fn rosenblatt(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.g.check_domain(x)?;
        Ok(self.rosenblatt_with_logpdf(x)?.0)
    }

    /// Rosenblatt map together with `log f̂(x)` accumulated per coordinate.
    pub fn rosenblatt_with_logpdf(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let d = self.dim();
        let mut u = vec![0.0; d];
        let mut logpdf = 0.0;
        let mut p = Prefix::new();
        let mut phi = Vec::new();
        for k in 0..d {
            let cdf = self.conditional(k, &p)?;
            u[k] = cdf.eval_normalized(x[k]);
            logpdf += cdf.pdf(x[k]).ln() - cdf.total_mass().ln();
            if k + 1 < d {
                let basis = &self.g.bases()[k];
                phi.resize(basis.cardinality(), 0.0);
                basis.eval_into(x[k], &mut phi);
                p.advance(&self.g.cores()[k], &phi);
            }
        }
        Ok((u, logpdf))
    }

    /// `log f̂(x) = log(g̃(x)² + γ/V) − log(ẑ + γ)`.
    pub fn pushforward_logpdf(&self, x: &[f64]) -> Result<f64> {
        let g = self.g.eval(x)?;
        Ok((g * g + self.gamma / self.volume()).ln() - (self.z_hat + self.gamma).ln())
    }

    /// Applies [`Sirt::irt_forward`] to the rows of a row-major batch.
    pub fn irt_batch(&self, u: &[f64]) -> Result<Vec<(Vec<f64>, f64)>> {
        u.par_chunks(self.dim()).map(|r| self.irt_forward(r)).collect()
    }
}
