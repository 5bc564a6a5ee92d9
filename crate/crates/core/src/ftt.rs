//! Functional tensor trains.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::Basis1D;
use crate::error::{Error, Result};
use crate::linalg::{thin_qr, truncated_svd};
use crate::tensor::Tensor3;

/// `f(x) = A_1(x_1) ⋯ A_d(x_d)` with `A_k(x) = Σ_i φ_k^{(i)}(x) A_k[:, i, :]`.
#[derive(Clone, Debug)]
pub struct Ftt {
    bases: Vec<Basis1D>,
    cores: Vec<Tensor3>,
}

impl Ftt {
    pub fn new(bases: Vec<Basis1D>, cores: Vec<Tensor3>) -> Result<Self> {
        if bases.is_empty() || bases.len() != cores.len() {
            return Err(Error::InvalidArgument(format!(
                "{} bases for {} cores",
                bases.len(),
                cores.len()
            )));
        }
        let d = cores.len();
        let mut prev = 1;
        for (k, (c, b)) in cores.iter().zip(&bases).enumerate() {
            let (r0, n, r1) = c.shape();
            if r0 != prev || n != b.cardinality() || r0 == 0 || r1 == 0 {
                return Err(Error::InvalidArgument(format!(
                    "core {k} has shape {:?}, expected ({prev}, {}, _)",
                    c.shape(),
                    b.cardinality()
                )));
            }
            prev = r1;
            if k == d - 1 && r1 != 1 {
                return Err(Error::InvalidArgument("last rank must be 1".into()));
            }
        }
        Ok(Self { bases, cores })
    }

    /// Rank-1 FTT of `x ↦ Π_k f_k(x_k)` interpolated at the nodes.
    pub fn separable(bases: Vec<Basis1D>, f: impl Fn(usize, f64) -> f64) -> Self {
        let cores = bases
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let nodes = b.nodes();
                Tensor3::from_fn(1, b.cardinality(), 1, |_, i, _| f(k, nodes[i]))
            })
            .collect();
        Self { bases, cores }
    }

    pub fn dim(&self) -> usize {
        self.cores.len()
    }

    pub fn bases(&self) -> &[Basis1D] {
        &self.bases
    }

    pub fn cores(&self) -> &[Tensor3] {
        &self.cores
    }

    pub fn cores_mut(&mut self) -> &mut [Tensor3] {
        &mut self.cores
    }

    /// `r_0, …, r_d`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.shape().2));
        r
    }

    pub fn degrees_of_freedom(&self) -> usize {
        self.cores.iter().map(|c| c.as_slice().len()).sum()
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.dim()
            )));
        }
        for (k, (&xk, b)) in x.iter().zip(&self.bases).enumerate() {
            if !b.contains(xk) {
                let (lo, hi) = b.domain();
                return Err(Error::OutOfDomain {
                    dim: k,
                    value: xk,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Left-to-right vector-matrix products; coordinates are clamped.
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.left_product(x, self.dim())[0]
    }

    /// Row vector `A_1(x_1) ⋯ A_k(x_k)` of length `r_k`.
    pub fn left_product(&self, x: &[f64], k: usize) -> Vec<f64> {
        let mut v = vec![1.0];
        let mut phi = Vec::new();
        for j in 0..k {
            let core = &self.cores[j];
            let (_, n, r1) = core.shape();
            phi.resize(n, 0.0);
            self.bases[j].eval_into(x[j], &mut phi);
            let mut w = vec![0.0; r1];
            core.vec_contract(&v, &phi, &mut w);
            v = w;
        }
        v
    }

    /// Column vector `A_{k+1}(x_{k+1}) ⋯ A_d(x_d)` of length `r_k`.
    pub fn right_product(&self, x: &[f64], k: usize) -> Vec<f64> {
        let mut v = DMatrix::from_element(1, 1, 1.0);
        let mut phi = Vec::new();
        for j in (k..self.dim()).rev() {
            let core = &self.cores[j];
            phi.resize(core.shape().1, 0.0);
            self.bases[j].eval_into(x[j], &mut phi);
            v = core.contract_mid(&phi) * v;
        }
        v.as_slice().to_vec()
    }

    /// Evaluates at the rows of a row-major `m × d` array.
    pub fn eval_batch(&self, points: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if points.len() % d != 0 {
            return Err(Error::InvalidArgument("batch length not a multiple of d".into()));
        }
        points.par_chunks(d).map(|x| self.eval(x)).collect()
    }

    /// `F̄_k = Σ_i (∫ φ_k^{(i)}) A_k[:, i, :]`.
    pub fn integrate_cores(&self) -> Vec<DMatrix<f64>> {
        self.cores
            .iter()
            .zip(&self.bases)
            .map(|(c, b)| c.contract_mid(b.integrals()))
            .collect()
    }

    /// `∫ f`, the product of the integrated cores.
    pub fn integral(&self) -> f64 {
        self.integrate_cores()
            .into_iter()
            .fold(DMatrix::from_element(1, 1, 1.0), |acc, m| acc * m)[(0, 0)]
    }

    pub fn scale(&mut self, c: f64) {
        self.cores[0].scale(c);
    }

    /// Cores mapped into the mass-Cholesky frame, where the Euclidean norm
    /// of the coefficient train equals the weighted `L²` norm of the function.
    fn weighted_cores(&self) -> Vec<Tensor3> {
        self.cores
            .iter()
            .zip(&self.bases)
            .map(|(c, b)| c.mode2(b.mass_cholesky()))
            .collect()
    }

    /// Weighted `L²` norm via a left-to-right QR sweep.
    pub fn norm(&self) -> f64 {
        let mut r = DMatrix::from_element(1, 1, 1.0);
        for c in self.weighted_cores() {
            let c = c.mode1(&r);
            let (_, rr) = thin_qr(&c.left_unfold());
            r = rr;
        }
        r.norm()
    }

    /// `self − other` with block-structured cores; ranks add.
    pub fn sub(&self, other: &Ftt) -> Result<Ftt> {
        let d = self.dim();
        if other.dim() != d {
            return Err(Error::InvalidArgument("dimension mismatch".into()));
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let a = &self.cores[k];
            let b = &other.cores[k];
            let (ra0, n, ra1) = a.shape();
            let (rb0, nb, rb1) = b.shape();
            if n != nb {
                return Err(Error::InvalidArgument("basis mismatch".into()));
            }
            let sign = if k == 0 { -1.0 } else { 1.0 };
            let core = if d == 1 {
                Tensor3::from_fn(1, n, 1, |_, i, _| a.get(0, i, 0) - b.get(0, i, 0))
            } else if k == 0 {
                Tensor3::from_fn(1, n, ra1 + rb1, |_, i, c| {
                    if c < ra1 {
                        a.get(0, i, c)
                    } else {
                        sign * b.get(0, i, c - ra1)
                    }
                })
            } else if k == d - 1 {
                Tensor3::from_fn(ra0 + rb0, n, 1, |r, i, _| {
                    if r < ra0 {
                        a.get(r, i, 0)
                    } else {
                        b.get(r - ra0, i, 0)
                    }
                })
            } else {
                Tensor3::from_fn(ra0 + rb0, n, ra1 + rb1, |r, i, c| {
                    if r < ra0 && c < ra1 {
                        a.get(r, i, c)
                    } else if r >= ra0 && c >= ra1 {
                        b.get(r - ra0, i, c - ra1)
                    } else {
                        0.0
                    }
                })
            };
            cores.push(core);
        }
        Ftt::new(self.bases.clone(), cores)
    }

    /// TT-SVD recompression in the weighted norm with relative tolerance `tol`.
    pub fn round(&self, tol: f64) -> Ftt {
        let d = self.dim();
        let mut w = self.weighted_cores();
        // Right-to-left orthogonalization.
        for k in (1..d).rev() {
            let (_, n, r1) = w[k].shape();
            let (q, r) = thin_qr(&w[k].right_unfold().transpose());
            w[k] = Tensor3::from_right(&q.transpose(), n, r1);
            w[k - 1] = w[k - 1].mode3(&r.transpose());
        }
        let norm = w[0].as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        let rel = tol.max(1e-14);
        let delta = if d > 1 { rel * norm / ((d - 1) as f64).sqrt() } else { 0.0 };
        for k in 0..d.saturating_sub(1) {
            let (r0, n, _) = w[k].shape();
            let (u, s, vt) = truncated_svd(&w[k].left_unfold(), delta, usize::MAX);
            w[k] = Tensor3::from_left(&u, r0, n);
            let sv = DMatrix::from_diagonal(&s) * vt;
            w[k + 1] = w[k + 1].mode1(&sv);
        }
        let cores = w
            .into_iter()
            .zip(&self.bases)
            .map(|(c, b)| c.mode2(&b.mass_cholesky_inv_t().transpose()))
            .collect();
        Ftt {
            bases: self.bases.clone(),
            cores,
        }
    }
}
