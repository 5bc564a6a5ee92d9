//! Order-3 coefficient tensors.

use nalgebra::DMatrix;

/// Tensor `T[α, i, β]` of shape `r0 × n × r1`, stored with `α` fastest so
/// that both unfoldings are plain column-major reshapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    r0: usize,
    n: usize,
    r1: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(r0: usize, n: usize, r1: usize) -> Self {
        Self {
            r0,
            n,
            r1,
            data: vec![0.0; r0 * n * r1],
        }
    }

    pub fn from_fn(r0: usize, n: usize, r1: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(r0, n, r1);
        for b in 0..r1 {
            for i in 0..n {
                for a in 0..r0 {
                    t.data[a + r0 * (i + n * b)] = f(a, i, b);
                }
            }
        }
        t
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.r0, self.n, self.r1)
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[a + self.r0 * (i + self.n * b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, v: f64) {
        self.data[a + self.r0 * (i + self.n * b)] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `(r0·n) × r1`, row `α + r0·i`.
    pub fn left_unfold(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.r0 * self.n, self.r1, &self.data)
    }

    /// `r0 × (n·r1)`, column `i + n·β`.
    pub fn right_unfold(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.r0, self.n * self.r1, &self.data)
    }

    pub fn from_left(m: &DMatrix<f64>, r0: usize, n: usize) -> Self {
        assert_eq!(m.nrows(), r0 * n);
        Self {
            r0,
            n,
            r1: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }

    pub fn from_right(m: &DMatrix<f64>, n: usize, r1: usize) -> Self {
        assert_eq!(m.ncols(), n * r1);
        Self {
            r0: m.nrows(),
            n,
            r1,
            data: m.as_slice().to_vec(),
        }
    }

    /// Entries in row-major order `((α·n) + i)·r1 + β`.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for a in 0..self.r0 {
            for i in 0..self.n {
                for b in 0..self.r1 {
                    out.push(self.get(a, i, b));
                }
            }
        }
        out
    }

    pub fn from_row_major(r0: usize, n: usize, r1: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), r0 * n * r1);
        Self::from_fn(r0, n, r1, |a, i, b| v[(a * n + i) * r1 + b])
    }

    /// `C[α, τ, β] = Σ_i T[α, i, β]·m[i, τ]`.
    pub fn mode2(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), self.n);
        let n2 = m.ncols();
        let mut out = Self::zeros(self.r0, n2, self.r1);
        for b in 0..self.r1 {
            for t in 0..n2 {
                for i in 0..self.n {
                    let w = m[(i, t)];
                    if w == 0.0 {
                        continue;
                    }
                    let src = self.r0 * (i + self.n * b);
                    let dst = self.r0 * (t + n2 * b);
                    for a in 0..self.r0 {
                        out.data[dst + a] += w * self.data[src + a];
                    }
                }
            }
        }
        out
    }

    /// `T'[α, i, γ] = Σ_β T[α, i, β]·m[β, γ]`.
    pub fn mode3(&self, m: &DMatrix<f64>) -> Self {
        Self::from_left(&(self.left_unfold() * m), self.r0, self.n)
    }

    /// `T'[γ, i, β] = Σ_α m[γ, α]·T[α, i, β]`.
    pub fn mode1(&self, m: &DMatrix<f64>) -> Self {
        Self::from_right(&(m * self.right_unfold()), self.n, self.r1)
    }

    /// `Σ_i w_i·T[:, i, :]`.
    pub fn contract_mid(&self, w: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.r0, self.r1);
        for b in 0..self.r1 {
            for (i, &wi) in w.iter().enumerate() {
                if wi == 0.0 {
                    continue;
                }
                let src = self.r0 * (i + self.n * b);
                for a in 0..self.r0 {
                    out[(a, b)] += wi * self.data[src + a];
                }
            }
        }
        out
    }

    /// `y[β] = Σ_α Σ_i v[α]·w[i]·T[α, i, β]`, accumulated in fixed order.
    pub fn vec_contract(&self, v: &[f64], w: &[f64], out: &mut [f64]) {
        for b in 0..self.r1 {
            let mut s = 0.0;
            for (i, &wi) in w.iter().enumerate() {
                if wi == 0.0 {
                    continue;
                }
                let src = self.r0 * (i + self.n * b);
                let mut t = 0.0;
                for a in 0..self.r0 {
                    t += v[a] * self.data[src + a];
                }
                s += wi * t;
            }
            out[b] = s;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }
}
