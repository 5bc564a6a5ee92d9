//! One-dimensional interpolation bases.
//!
//! Every basis is a cardinal (nodal) basis: `φ_i(x_j) = δ_ij` at its
//! collocation points, so coefficient vectors and nodal values coincide.
//! Spectral families live on the canonical interval `ζ ∈ [-1, 1]` composed
//! with an affine map onto `[a, b]`.

mod cdf;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use cdf::{pdf_to_cdf, Cdf1D};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature::gauss_legendre;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    PiecewiseLinear,
    Chebyshev2,
    Fourier,
}

impl Family {
    pub fn code(self) -> u8 {
        match self {
            Family::PiecewiseLinear => 0,
            Family::Chebyshev2 => 1,
            Family::Fourier => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Family::PiecewiseLinear),
            1 => Ok(Family::Chebyshev2),
            2 => Ok(Family::Fourier),
            _ => Err(Error::Format(format!("unknown basis family code {c}"))),
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Piecewise,
    Chebyshev { zeta: Vec<f64>, bary: Vec<f64> },
    /// Column `i` holds the trigonometric coefficients of cardinal function `i`.
    Fourier { coef: DMatrix<f64> },
}

#[derive(Clone, Debug)]
pub struct Basis1D {
    family: Family,
    n: usize,
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    mass: DMatrix<f64>,
    mass_chol: DMatrix<f64>,
    /// `L⁻ᵀ`, used to map weighted factors back to nodal coefficients.
    mass_chol_inv_t: DMatrix<f64>,
    integrals: Vec<f64>,
    kind: Kind,
    /// Basis values at the CDF collocation points (spectral families only).
    cdf_eval: DMatrix<f64>,
    /// Values-to-coefficients transform at the CDF collocation points.
    cdf_transform: DMatrix<f64>,
}

pub fn make_basis(family: Family, n: usize, a: f64, b: f64) -> Result<Basis1D> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("basis cardinality {n} < 2")));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidArgument(format!("degenerate domain [{a}, {b}]")));
    }
    if family == Family::Fourier && n % 2 == 1 {
        return Err(Error::InvalidArgument(format!("fourier basis needs even n, got {n}")));
    }
    let scale = 0.5 * (b - a);
    let to_phys = |z: f64| a + scale * (z + 1.0);

    let (nodes, kind, mass) = match family {
        Family::PiecewiseLinear => {
            let h = (b - a) / (n as f64 + 1.0);
            let nodes: Vec<f64> = (1..=n).map(|i| a + i as f64 * h).collect();
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = 2.0 * h / 3.0;
                if i + 1 < n {
                    m[(i, i + 1)] = h / 6.0;
                    m[(i + 1, i)] = h / 6.0;
                }
            }
            // End hats have one linear half and extend as constants to the
            // boundary: h/3 + h instead of 2h/3.
            m[(0, 0)] += 2.0 * h / 3.0;
            m[(n - 1, n - 1)] += 2.0 * h / 3.0;
            (nodes, Kind::Piecewise, m)
        }
        Family::Chebyshev2 => {
            let zeta: Vec<f64> = (1..=n)
                .map(|j| -(j as f64 * PI / (n as f64 + 1.0)).cos())
                .collect();
            let mut bary: Vec<f64> = (0..n)
                .map(|j| {
                    let mut p = 1.0;
                    for k in 0..n {
                        if k != j {
                            p *= zeta[j] - zeta[k];
                        }
                    }
                    1.0 / p
                })
                .collect();
            let big = bary.iter().fold(0.0f64, |m, w| m.max(w.abs()));
            bary.iter_mut().for_each(|w| *w /= big);
            let nodes = zeta.iter().map(|&z| to_phys(z)).collect();
            let kind = Kind::Chebyshev { zeta, bary };
            let (qx, qw) = gauss_legendre(n + 1);
            let mut m = DMatrix::zeros(n, n);
            let mut row = vec![0.0; n];
            for (x, w) in qx.iter().zip(&qw) {
                eval_canonical(&kind, n, *x, &mut row);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] += scale * w * row[i] * row[j];
                    }
                }
            }
            (nodes, kind, m)
        }
        Family::Fourier => {
            let zeta: Vec<f64> = (1..=n)
                .map(|j| -1.0 + (2.0 * j as f64 - 0.5) / n as f64)
                .collect();
            let v = DMatrix::from_fn(n, n, |j, k| trig(k, n, zeta[j]));
            let coef = linalg::inverse(&v)?;
            let mut gram = DMatrix::identity(n, n);
            gram[(0, 0)] = 2.0;
            let m = coef.transpose() * gram * &coef * scale;
            let nodes = zeta.iter().map(|&z| to_phys(z)).collect();
            (nodes, Kind::Fourier { coef }, m)
        }
    };
    let mass = 0.5 * (&mass + mass.transpose());
    let mass_chol = linalg::cholesky_lower(&mass)?;
    let mass_chol_inv_t = linalg::inverse(&mass_chol)?.transpose();

    let integrals = match &kind {
        Kind::Piecewise => (0..n).map(|i| mass.row(i).sum()).collect(),
        Kind::Chebyshev { .. } => {
            let (qx, qw) = gauss_legendre(n + 1);
            let mut acc = vec![0.0; n];
            let mut row = vec![0.0; n];
            for (x, w) in qx.iter().zip(&qw) {
                eval_canonical(&kind, n, *x, &mut row);
                for i in 0..n {
                    acc[i] += scale * w * row[i];
                }
            }
            acc
        }
        Kind::Fourier { coef } => (0..n).map(|i| 2.0 * scale * coef[(0, i)]).collect(),
    };

    let (cdf_eval, cdf_transform) = match family {
        Family::PiecewiseLinear => (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)),
        Family::Chebyshev2 => {
            let m = 2 * n - 1;
            let t: Vec<f64> = (0..m)
                .map(|j| (PI * (j as f64 + 0.5) / m as f64).cos())
                .collect();
            let mut ev = DMatrix::zeros(m, n);
            let mut row = vec![0.0; n];
            for (j, &z) in t.iter().enumerate() {
                eval_canonical(&kind, n, z, &mut row);
                for i in 0..n {
                    ev[(j, i)] = row[i];
                }
            }
            let tr = DMatrix::from_fn(m, m, |k, j| {
                let c = if k == 0 { 1.0 } else { 2.0 };
                c / m as f64 * (k as f64 * PI * (j as f64 + 0.5) / m as f64).cos()
            });
            (ev, tr)
        }
        Family::Fourier => {
            let m = 2 * n;
            let z: Vec<f64> = (0..m).map(|j| j as f64 / n as f64 - 1.0).collect();
            let mut ev = DMatrix::zeros(m, n);
            let mut row = vec![0.0; n];
            for (j, &zz) in z.iter().enumerate() {
                eval_canonical(&kind, n, zz, &mut row);
                for i in 0..n {
                    ev[(j, i)] = row[i];
                }
            }
            // Rows: a_0, (a_k, b_k) for k < n, a_n.
            let tr = DMatrix::from_fn(m, m, |r, j| {
                let zz = z[j];
                let nf = n as f64;
                if r == 0 {
                    0.5 / nf
                } else if r == m - 1 {
                    0.5 / nf * (nf * PI * zz).cos()
                } else {
                    let k = r.div_ceil(2) as f64;
                    if r % 2 == 1 {
                        (k * PI * zz).cos() / nf
                    } else {
                        (k * PI * zz).sin() / nf
                    }
                }
            });
            (ev, tr)
        }
    };

    let basis = Basis1D {
        family,
        n,
        a,
        b,
        nodes,
        mass,
        mass_chol,
        mass_chol_inv_t,
        integrals,
        kind,
        cdf_eval,
        cdf_transform,
    };
    debug_assert!(basis.vandermonde_defect() < 1e-10);
    Ok(basis)
}

/// `k`-th trigonometric function of the degree-`n` Fourier space:
/// `1, cos πζ, sin πζ, …, cos((n/2−1)πζ), sin((n/2−1)πζ), cos(n/2·πζ)`.
fn trig(k: usize, n: usize, z: f64) -> f64 {
    if k == 0 {
        1.0
    } else if k == n - 1 {
        ((n / 2) as f64 * PI * z).cos()
    } else {
        let m = k.div_ceil(2) as f64;
        if k % 2 == 1 {
            (m * PI * z).cos()
        } else {
            (m * PI * z).sin()
        }
    }
}

fn eval_canonical(kind: &Kind, n: usize, z: f64, out: &mut [f64]) {
    match kind {
        Kind::Piecewise => unreachable!("piecewise basis is evaluated in physical coordinates"),
        Kind::Chebyshev { zeta, bary } => {
            if let Some(j) = zeta.iter().position(|&zj| zj == z) {
                out.iter_mut().for_each(|o| *o = 0.0);
                out[j] = 1.0;
                return;
            }
            let mut den = 0.0;
            for j in 0..n {
                let t = bary[j] / (z - zeta[j]);
                out[j] = t;
                den += t;
            }
            out.iter_mut().for_each(|o| *o /= den);
        }
        Kind::Fourier { coef } => {
            let mut stack = [0.0f64; 128];
            let mut heap;
            let psi: &mut [f64] = if n <= stack.len() {
                &mut stack[..n]
            } else {
                heap = vec![0.0; n];
                &mut heap
            };
            for (k, p) in psi.iter_mut().enumerate() {
                *p = trig(k, n, z);
            }
            for (i, o) in out.iter_mut().enumerate() {
                let mut s = 0.0;
                for k in 0..n {
                    s += psi[k] * coef[(k, i)];
                }
                *o = s;
            }
        }
    }
}

impl Basis1D {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn cardinality(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn mass_matrix(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// Lower-triangular `L` with `L Lᵀ = M`.
    pub fn mass_cholesky(&self) -> &DMatrix<f64> {
        &self.mass_chol
    }

    pub(crate) fn mass_cholesky_inv_t(&self) -> &DMatrix<f64> {
        &self.mass_chol_inv_t
    }

    /// `∫ φ_i(x) dx` over the domain.
    pub fn integrals(&self) -> &[f64] {
        &self.integrals
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * (self.b - self.a);
        x >= self.a - slack && x <= self.b + slack
    }

    fn canonical(&self, x: f64) -> f64 {
        (2.0 * x - self.a - self.b) / (self.b - self.a)
    }

    /// Writes `φ_1(x) … φ_n(x)` into `out`. `x` is clamped to the domain.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let x = x.clamp(self.a, self.b);
        match &self.kind {
            Kind::Piecewise => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let (j, t) = self.locate_cell(x);
                // Cell j spans node j-1 .. node j (cells 0 and n are the constant ends).
                if j == 0 {
                    out[0] = 1.0;
                } else if j == self.n {
                    out[self.n - 1] = 1.0;
                } else {
                    out[j - 1] = 1.0 - t;
                    out[j] = t;
                }
            }
            kind => {
                // Nodes are stored physically; compare there to hit them exactly.
                if let Some(j) = self.nodes.iter().position(|&xj| xj == x) {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    out[j] = 1.0;
                    return;
                }
                eval_canonical(kind, self.n, self.canonical(x), out)
            }
        }
    }

    /// Cell index `j ∈ 0..=n` and local coordinate `t ∈ [0,1]` for the
    /// piecewise family.
    pub(crate) fn locate_cell(&self, x: f64) -> (usize, f64) {
        let h = (self.b - self.a) / (self.n as f64 + 1.0);
        let s = (x - self.a) / h;
        if s <= 1.0 {
            return (0, 0.0);
        }
        if s >= self.n as f64 {
            return (self.n, 0.0);
        }
        let j = (s.floor() as usize).clamp(1, self.n - 1);
        (j, s - j as f64)
    }

    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        if !self.contains(x) {
            return Err(Error::OutOfDomain {
                dim: 0,
                value: x,
                lo: self.a,
                hi: self.b,
            });
        }
        let mut out = vec![0.0; self.n];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Row `i` holds `φ_1..φ_n` at `points[i]`.
    pub fn eval_matrix(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(points.len(), self.n);
        let mut row = vec![0.0; self.n];
        for (i, &x) in points.iter().enumerate() {
            if !self.contains(x) {
                return Err(Error::OutOfDomain {
                    dim: 0,
                    value: x,
                    lo: self.a,
                    hi: self.b,
                });
            }
            self.eval_into(x, &mut row);
            for j in 0..self.n {
                m[(i, j)] = row[j];
            }
        }
        Ok(m)
    }

    /// Index of the collocation point nearest to `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        match self.nodes.binary_search_by(|p| p.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.n => self.n - 1,
            Err(i) => {
                if x - self.nodes[i - 1] <= self.nodes[i] - x {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    fn vandermonde_defect(&self) -> f64 {
        let v = self.eval_matrix(&self.nodes).expect("nodes are interior");
        (v - DMatrix::<f64>::identity(self.n, self.n)).amax()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FAMILIES: [Family; 3] = [Family::PiecewiseLinear, Family::Chebyshev2, Family::Fourier];

    #[test]
    fn rejects_bad_input() {
        assert!(make_basis(Family::Chebyshev2, 1, 0.0, 1.0).is_err());
        assert!(make_basis(Family::Chebyshev2, 4, 1.0, 1.0).is_err());
        assert!(make_basis(Family::Fourier, 5, 0.0, 1.0).is_err());
    }

    #[test]
    fn vandermonde_is_identity() {
        for fam in FAMILIES {
            for n in [2, 4, 8, 16] {
                let b = make_basis(fam, n, -2.0, 3.0).unwrap();
                assert!(b.vandermonde_defect() < 1e-12, "{fam:?} n={n}");
                assert!(b.nodes().windows(2).all(|w| w[0] < w[1]));
                assert!(b.nodes()[0] > -2.0 && b.nodes()[n - 1] < 3.0);
            }
        }
    }

    #[test]
    fn cholesky_reproduces_mass() {
        for fam in FAMILIES {
            let b = make_basis(fam, 10, 0.5, 4.0).unwrap();
            let l = b.mass_cholesky();
            let rec = l * l.transpose();
            let rel = (rec - b.mass_matrix()).norm() / b.mass_matrix().norm();
            assert!(rel < 1e-12);
            for i in 0..10 {
                for j in (i + 1)..10 {
                    assert_eq!(l[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn piecewise_mass_two_nodes() {
        let b = make_basis(Family::PiecewiseLinear, 2, 0.0, 1.0).unwrap();
        let h = 1.0 / 3.0;
        let m = b.mass_matrix();
        assert!((m[(0, 0)] - 4.0 * h / 3.0).abs() < 1e-15);
        assert!((m[(0, 1)] - h / 6.0).abs() < 1e-15);
        assert!((m[(1, 1)] - 4.0 * h / 3.0).abs() < 1e-15);
    }

    #[test]
    fn piecewise_midpoint_and_partition() {
        let b = make_basis(Family::PiecewiseLinear, 5, 0.0, 6.0).unwrap();
        let v = b.eval(1.5).unwrap();
        assert_eq!(v, vec![0.5, 0.5, 0.0, 0.0, 0.0]);
        for k in 0..100 {
            let x = 6.0 * k as f64 / 99.0;
            let s: f64 = b.eval(x).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn chebyshev_reproduces_second_kind_polynomials() {
        let n = 7;
        let b = make_basis(Family::Chebyshev2, n, -1.0, 1.0).unwrap();
        let u = |m: usize, z: f64| -> f64 {
            let th = z.clamp(-1.0, 1.0).acos();
            if th.sin().abs() < 1e-14 {
                (m as f64 + 1.0) * if z < 0.0 && m % 2 == 1 { -1.0 } else { 1.0 }
            } else {
                ((m as f64 + 1.0) * th).sin() / th.sin()
            }
        };
        let phi = b.eval(1.0).unwrap();
        for m in 0..n {
            let v: f64 = (0..n).map(|j| phi[j] * u(m, b.nodes()[j])).sum();
            assert!((v - (m as f64 + 1.0)).abs() < 1e-11, "m={m} v={v}");
        }
    }

    #[test]
    fn chebyshev_three_nodes() {
        let b = make_basis(Family::Chebyshev2, 3, -1.0, 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [-s, 0.0, s];
        for (x, e) in b.nodes().iter().zip(expect) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_matches_fine_quadrature() {
        for fam in FAMILIES {
            let b = make_basis(fam, 6, -1.0, 2.0).unwrap();
            let (qx, qw) = crate::quadrature::composite_gauss(-1.0, 2.0, 8, 700);
            let mut m = DMatrix::zeros(6, 6);
            let mut int = [0.0; 6];
            for (x, w) in qx.iter().zip(&qw) {
                let v = b.eval(*x).unwrap();
                for i in 0..6 {
                    int[i] += w * v[i];
                    for j in 0..6 {
                        m[(i, j)] += w * v[i] * v[j];
                    }
                }
            }
            assert!((m - b.mass_matrix()).amax() < 1e-10, "{fam:?}");
            for i in 0..6 {
                assert!((int[i] - b.integrals()[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn out_of_domain_errors() {
        let b = make_basis(Family::Chebyshev2, 4, 0.0, 1.0).unwrap();
        assert!(matches!(b.eval(1.5), Err(Error::OutOfDomain { .. })));
        assert!(b.eval_matrix(&[0.2, -0.1]).is_err());
    }

    #[test]
    fn nearest_node_snaps() {
        let b = make_basis(Family::PiecewiseLinear, 4, 0.0, 5.0).unwrap();
        assert_eq!(b.nearest_node(0.0), 0);
        assert_eq!(b.nearest_node(2.4), 1);
        assert_eq!(b.nearest_node(2.6), 2);
        assert_eq!(b.nearest_node(5.0), 3);
    }
}
