//! Brute-force tensor-product quadrature for low-dimensional checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::composite_gauss;
use crate::targets::TargetDensity;

pub const MAX_QUAD_DIM: usize = 4;
pub const MAX_DIVERGENCE_DIM: usize = 3;

/// Per-dimension composite Gauss–Legendre rules, tensorized on the fly.
#[derive(Clone, Debug)]
pub struct QuadGrid {
    domain: Vec<(f64, f64)>,
    q: usize,
    panels: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

impl QuadGrid {
    pub fn new(domain: &[(f64, f64)], q: usize) -> Result<Self> {
        Self::composite(domain, q, 1)
    }

    /// `panels` equal subintervals per dimension with `q` points each.
    pub fn composite(domain: &[(f64, f64)], q: usize, panels: usize) -> Result<Self> {
        let d = domain.len();
        if d == 0 || d > MAX_QUAD_DIM {
            return Err(Error::DimensionCap { d, cap: MAX_QUAD_DIM });
        }
        if q == 0 || panels == 0 {
            return Err(Error::InvalidArgument("quadrature order and panels must be positive".into()));
        }
        let (nodes, weights) = domain.iter().map(|&(a, b)| composite_gauss(a, b, q, panels)).unzip();
        Ok(Self {
            domain: domain.to_vec(),
            q,
            panels,
            nodes,
            weights,
        })
    }

    /// Same panels, twice the points per panel.
    pub fn refined(&self) -> Self {
        Self::composite(&self.domain, 2 * self.q, self.panels).expect("valid grid")
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self, k: usize) -> &[f64] {
        &self.nodes[k]
    }

    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    /// Point and weight of flat index `i` (first coordinate fastest).
    pub fn point(&self, mut i: usize, x: &mut [f64]) -> f64 {
        let mut w = 1.0;
        for k in 0..self.dim() {
            let m = self.nodes[k].len();
            x[k] = self.nodes[k][i % m];
            w *= self.weights[k][i % m];
            i /= m;
        }
        w
    }

    /// `Σ_i w_i·f(x_i)` for several integrands evaluated jointly.
    fn sums<const K: usize>(&self, f: impl Fn(&[f64]) -> Result<[f64; K]> + Sync) -> Result<[f64; K]> {
        let d = self.dim();
        let chunk = self.nodes[0].len();
        (0..self.len() / chunk)
            .into_par_iter()
            .map(|c| {
                let mut x = vec![0.0; d];
                let mut acc = [0.0; K];
                for i in c * chunk..(c + 1) * chunk {
                    let w = self.point(i, &mut x);
                    let v = f(&x)?;
                    for j in 0..K {
                        acc[j] += w * v[j];
                    }
                }
                Ok(acc)
            })
            .try_reduce(
                || [0.0; K],
                |mut a, b| {
                    for j in 0..K {
                        a[j] += b[j];
                    }
                    Ok(a)
                },
            )
    }
}

fn finite(v: f64, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { value: v, point: x.to_vec() })
    }
}

pub fn quad_integral(f: impl Fn(&[f64]) -> f64 + Sync, grid: &QuadGrid) -> Result<f64> {
    Ok(grid.sums(|x| Ok([finite(f(x), x)?]))?[0])
}

/// Absolute change of each quantity when the quadrature order is doubled.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct QuadChange {
    pub z: f64,
    pub z_hat: f64,
    pub l2_sqrt_err: f64,
    /// The next three integrands are not smooth (kinks where the densities
    /// cross or the surrogate changes sign), so they converge slowly.
    pub hellinger: f64,
    pub tv: f64,
    pub chi2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Divergences {
    pub hellinger: f64,
    pub tv: f64,
    pub chi2: f64,
    /// `‖g̃ − √π‖₂` when a square-root surrogate is supplied.
    pub l2_sqrt_err: Option<f64>,
    /// `∫π`.
    pub z: f64,
    /// Integral of the approximate density as supplied.
    pub z_hat: f64,
    pub quad_change: QuadChange,
}

impl Divergences {
    /// Largest relative doubling change among the smooth quantities.
    pub fn smooth_rel_change(&self) -> f64 {
        let c = &self.quad_change;
        let mut m = (c.z / self.z).max(c.z_hat / self.z_hat);
        if let Some(e) = self.l2_sqrt_err {
            // floor so that a vanishing error does not look unconverged
            m = m.max(c.l2_sqrt_err / e.max(1e-6 * self.z.sqrt()));
        }
        m
    }
}

fn divergences_on(
    target: &dyn TargetDensity,
    approx_logpdf: &(dyn Fn(&[f64]) -> f64 + Sync),
    sqrt_surrogate: Option<&(dyn Fn(&[f64]) -> f64 + Sync)>,
    grid: &QuadGrid,
) -> Result<Divergences> {
    let [z, z_hat, eps2] = grid.sums(|x| {
        let p = target.log_density(x).exp();
        let a = approx_logpdf(x).exp();
        let e = sqrt_surrogate.map_or(0.0, |g| (g(x) - p.sqrt()).powi(2));
        Ok([finite(p, x)?, finite(a, x)?, finite(e, x)?])
    })?;
    if !(z > 0.0 && z_hat > 0.0) {
        return Err(Error::ZeroDensity);
    }
    let [h2, tv, chi] = grid.sums(|x| {
        let f = target.log_density(x).exp() / z;
        let g = approx_logpdf(x).exp() / z_hat;
        let c = if f == 0.0 { 0.0 } else { f * f / g };
        Ok([(f.sqrt() - g.sqrt()).powi(2), (f - g).abs(), finite(c, x)?])
    })?;
    Ok(Divergences {
        hellinger: (0.5 * h2).max(0.0).sqrt(),
        tv: 0.5 * tv,
        chi2: chi - 1.0,
        l2_sqrt_err: sqrt_surrogate.map(|_| eps2.sqrt()),
        z,
        z_hat,
        quad_change: QuadChange::default(),
    })
}

/// Hellinger, total-variation and χ² divergences between the normalized
/// target and the normalized approximation `exp(approx_logpdf)`, plus the
/// square-root error if `sqrt_surrogate` is given. The computation is
/// repeated on the order-doubled grid and the discrepancy reported.
pub fn divergences(
    target: &dyn TargetDensity,
    approx_logpdf: &(dyn Fn(&[f64]) -> f64 + Sync),
    sqrt_surrogate: Option<&(dyn Fn(&[f64]) -> f64 + Sync)>,
    grid: &QuadGrid,
) -> Result<Divergences> {
    let d = grid.dim();
    if d > MAX_DIVERGENCE_DIM {
        return Err(Error::DimensionCap { d, cap: MAX_DIVERGENCE_DIM });
    }
    if target.dim() != d {
        return Err(Error::InvalidArgument("grid and target dimensions differ".into()));
    }
    let coarse = divergences_on(target, approx_logpdf, sqrt_surrogate, grid)?;
    let fine = divergences_on(target, approx_logpdf, sqrt_surrogate, &grid.refined())?;
    let quad_change = QuadChange {
        z: (coarse.z - fine.z).abs(),
        z_hat: (coarse.z_hat - fine.z_hat).abs(),
        l2_sqrt_err: match (coarse.l2_sqrt_err, fine.l2_sqrt_err) {
            (Some(a), Some(b)) => (a - b).abs(),
            _ => 0.0,
        },
        hellinger: (coarse.hellinger - fine.hellinger).abs(),
        tv: (coarse.tv - fine.tv).abs(),
        chi2: (coarse.chi2 - fine.chi2).abs(),
    };
    Ok(Divergences { quad_change, ..fine })
}
