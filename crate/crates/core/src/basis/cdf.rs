//! Exact CDFs of squared conditionals `Σ_ℓ (Σ_i φ_i(x) D[i,ℓ])² + tail`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{Basis1D, Family};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Payload {
    /// First-kind Chebyshev coefficients of the canonical PDF and of its
    /// antiderivative.
    Chebyshev { pdf: Vec<f64>, anti: Vec<f64>, anti_left: f64 },
    /// `pdf(ζ) = a_0 + Σ_{k<n} (a_k cos kπζ + b_k sin kπζ) + a_n cos nπζ`.
    Fourier { cos: Vec<f64>, sin: Vec<f64> },
    /// Nodal squared values `v_i`, neighbour products `p_i`, cumulative cell
    /// masses at the `n + 2` cell boundaries.
    Piecewise {
        h: f64,
        v: Vec<f64>,
        p: Vec<f64>,
        cum: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct Cdf1D {
    a: f64,
    b: f64,
    tail: f64,
    total: f64,
    payload: Payload,
}

/// Builds the CDF of `x ↦ Σ_ℓ (Σ_i φ_i(x) D[i,ℓ])² + tail` on the basis
/// domain. `tail` is a density value in physical units.
pub fn pdf_to_cdf(basis: &Basis1D, d: &DMatrix<f64>, tail: f64) -> Result<Cdf1D> {
    let n = basis.cardinality();
    assert_eq!(d.nrows(), n, "coefficient rows must match basis cardinality");
    let (a, b) = basis.domain();
    let scale = 0.5 * (b - a);
    let tail = tail.max(0.0);

    let (payload, sq_total) = match basis.family() {
        Family::Chebyshev2 => {
            let vals = squared_rows(&(&basis.cdf_eval * d));
            let c = &basis.cdf_transform * vals;
            let pdf: Vec<f64> = c.iter().copied().collect();
            let anti = cheb_antiderivative(&pdf);
            let anti_left = clenshaw(&anti, -1.0);
            let total = scale * (clenshaw(&anti, 1.0) - anti_left);
            (Payload::Chebyshev { pdf, anti, anti_left }, total)
        }
        Family::Fourier => {
            let vals = squared_rows(&(&basis.cdf_eval * d));
            let c = &basis.cdf_transform * vals;
            let m = c.len();
            let mut cos = vec![0.0; n + 1];
            let mut sin = vec![0.0; n];
            cos[0] = c[0];
            cos[n] = c[m - 1];
            for k in 1..n {
                cos[k] = c[2 * k - 1];
                sin[k] = c[2 * k];
            }
            let total = scale * 2.0 * cos[0];
            (Payload::Fourier { cos, sin }, total)
        }
        Family::PiecewiseLinear => {
            let h = (b - a) / (n as f64 + 1.0);
            let r = d.ncols();
            let v: Vec<f64> = (0..n).map(|i| (0..r).map(|l| d[(i, l)].powi(2)).sum()).collect();
            let p: Vec<f64> = (0..n.saturating_sub(1))
                .map(|i| (0..r).map(|l| d[(i, l)] * d[(i + 1, l)]).sum())
                .collect();
            let mut cum = Vec::with_capacity(n + 2);
            cum.push(0.0);
            cum.push(h * v[0]);
            for i in 0..n - 1 {
                let last = cum[cum.len() - 1];
                cum.push(last + h * (v[i] + p[i] + v[i + 1]) / 3.0);
            }
            let last = cum[cum.len() - 1];
            cum.push(last + h * v[n - 1]);
            let total = cum[n + 1];
            (Payload::Piecewise { h, v, p, cum }, total)
        }
    };

    let sq_total = sq_total.max(0.0);
    let total = sq_total + tail * (b - a);
    if !(total.is_finite() && total > f64::MIN_POSITIVE) {
        return Err(Error::DegenerateCdf(total));
    }
    Ok(Cdf1D {
        a,
        b,
        tail,
        total,
        payload,
    })
}

fn squared_rows(v: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_fn(v.nrows(), |i, _| v.row(i).iter().map(|x| x * x).sum())
}

/// Chebyshev-T coefficients of an antiderivative (constant term zero).
fn cheb_antiderivative(c: &[f64]) -> Vec<f64> {
    let m = c.len();
    let mut out = vec![0.0; m + 1];
    for k in 0..m {
        match k {
            0 => out[1] += c[0],
            1 => out[2] += c[1] / 4.0,
            _ => {
                out[k + 1] += c[k] / (2.0 * (k as f64 + 1.0));
                out[k - 1] -= c[k] / (2.0 * (k as f64 - 1.0));
            }
        }
    }
    out
}

fn clenshaw(c: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + c[0]
}

impl Cdf1D {
    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// `F(b)`, the unnormalized mass.
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    fn canonical(&self, x: f64) -> f64 {
        ((2.0 * x - self.a - self.b) / (self.b - self.a)).clamp(-1.0, 1.0)
    }

    /// Unnormalized `F(x) = ∫_a^x pdf`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.a, self.b);
        if x == self.a {
            return 0.0;
        }
        let lin = self.tail * (x - self.a);
        let scale = 0.5 * (self.b - self.a);
        let sq = match &self.payload {
            Payload::Chebyshev { anti, anti_left, .. } => {
                scale * (clenshaw(anti, self.canonical(x)) - anti_left)
            }
            Payload::Fourier { cos, sin } => {
                let z = self.canonical(x);
                let n = sin.len();
                let mut s = cos[0] * (z + 1.0);
                for k in 1..n {
                    let w = k as f64 * PI;
                    s += cos[k] * (w * z).sin() / w;
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    s += sin[k] * (sign - (w * z).cos()) / w;
                }
                let w = n as f64 * PI;
                s += cos[n] * (w * z).sin() / w;
                scale * s
            }
            Payload::Piecewise { h, v, p, cum } => {
                let n = v.len();
                let s = (x - self.a) / h;
                if s <= 1.0 {
                    h * v[0] * s
                } else if s >= n as f64 {
                    cum[n] + h * v[n - 1] * (s - n as f64)
                } else {
                    let j = (s.floor() as usize).clamp(1, n - 1);
                    let t = s - j as f64;
                    let (vl, vr, pp) = (v[j - 1], v[j], p[j - 1]);
                    let u = 1.0 - t;
                    cum[j]
                        + h * (vl * (1.0 - u * u * u) / 3.0
                            + 2.0 * pp * (t * t / 2.0 - t * t * t / 3.0)
                            + vr * t * t * t / 3.0)
                }
            }
        };
        sq.max(0.0) + lin
    }

    /// `F(x) / F(b)`.
    pub fn eval_normalized(&self, x: f64) -> f64 {
        (self.eval(x) / self.total).clamp(0.0, 1.0)
    }

    /// Unnormalized density at `x`, physical units.
    pub fn pdf(&self, x: f64) -> f64 {
        let x = x.clamp(self.a, self.b);
        let sq = match &self.payload {
            Payload::Chebyshev { pdf, .. } => clenshaw(pdf, self.canonical(x)),
            Payload::Fourier { cos, sin } => {
                let z = self.canonical(x);
                let n = sin.len();
                let mut s = cos[0];
                for k in 1..n {
                    let w = k as f64 * PI * z;
                    s += cos[k] * w.cos() + sin[k] * w.sin();
                }
                s + cos[n] * (n as f64 * PI * z).cos()
            }
            Payload::Piecewise { h, v, p, .. } => {
                let n = v.len();
                let s = (x - self.a) / h;
                if s <= 1.0 {
                    v[0]
                } else if s >= n as f64 {
                    v[n - 1]
                } else {
                    let j = (s.floor() as usize).clamp(1, n - 1);
                    let t = s - j as f64;
                    let u = 1.0 - t;
                    u * u * v[j - 1] + 2.0 * t * u * p[j - 1] + t * t * v[j]
                }
            }
        };
        sq.max(0.0) + self.tail
    }

    /// Solves `F(x) = u·F(b)` by safeguarded Newton inside a shrinking bracket.
    pub fn invert(&self, u: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u), "u = {u} outside [0, 1]");
        if u <= 0.0 {
            return self.a;
        }
        if u >= 1.0 {
            return self.b;
        }
        let target = u * self.total;
        let (mut lo, mut hi, mut flo, mut fhi) = (self.a, self.b, -target, self.total - target);

        if let Payload::Piecewise { h, cum, .. } = &self.payload {
            // Restrict the bracket to one cell; F is cubic there.
            let lin = |k: usize| cum[k] + self.tail * (k as f64 * h);
            let n1 = cum.len() - 1;
            let (mut l, mut r) = (0usize, n1);
            while r - l > 1 {
                let mid = (l + r) / 2;
                if lin(mid) <= target {
                    l = mid;
                } else {
                    r = mid;
                }
            }
            lo = self.a + l as f64 * h;
            hi = if r == n1 { self.b } else { self.a + r as f64 * h };
            flo = lin(l) - target;
            fhi = lin(r) - target;
        }

        let tol = 1e-13 * self.total;
        let mut x = if fhi > flo {
            lo + (-flo) / (fhi - flo) * (hi - lo)
        } else {
            0.5 * (lo + hi)
        };
        let mut last_err = f64::INFINITY;
        for _ in 0..100 {
            let fx = self.eval(x) - target;
            if fx.abs() <= tol {
                return x;
            }
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
                return x;
            }
            let d = self.pdf(x);
            let newton = x - fx / d;
            let stalled = fx.abs() > 0.5 * last_err;
            last_err = fx.abs();
            x = if d > 0.0 && newton > lo && newton < hi && !stalled {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }
}
