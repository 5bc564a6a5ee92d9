//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin Householder QR with a nonnegative diagonal in `R`.
///
/// For an `m × n` input returns `Q: m × k`, `R: k × n` with `k = min(m, n)`.
pub fn thin_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return (DMatrix::zeros(m, 0), DMatrix::zeros(0, n));
    }
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for c in 0..n {
                r[(j, c)] = -r[(j, c)];
            }
            for row in 0..m {
                q[(row, j)] = -q[(row, j)];
            }
        }
    }
    (q, r)
}

/// Truncated SVD `a ≈ U S Vᵀ`. Keeps the smallest rank whose discarded tail
/// has Frobenius norm `≤ abs_tol`, capped at `max_rank` and floored at 1.
pub fn truncated_svd(
    a: &DMatrix<f64>,
    abs_tol: f64,
    max_rank: usize,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let s = svd.singular_values;

    // nalgebra does not promise sorted singular values.
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut tail = 0.0;
    let mut rank = order.len();
    while rank > 1 {
        let next = tail + s[order[rank - 1]].powi(2);
        if next.sqrt() > abs_tol {
            break;
        }
        tail = next;
        rank -= 1;
    }
    let rank = rank.min(max_rank.max(1));

    let mut uu = DMatrix::zeros(a.nrows(), rank);
    let mut ss = DVector::zeros(rank);
    let mut vv = DMatrix::zeros(rank, a.ncols());
    for (c, &idx) in order.iter().take(rank).enumerate() {
        uu.set_column(c, &u.column(idx));
        ss[c] = s[idx];
        vv.set_row(c, &vt.row(idx));
    }
    (uu, ss, vv)
}

/// Lower Cholesky factor of an SPD matrix.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Singular("mass matrix is not positive definite".into()))
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("matrix inverse".into()))
}

/// Solves `X · a = b` for `X`, i.e. returns `b · a⁻¹`.
pub fn right_solve(b: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.transpose().lu();
    lu.solve(&b.transpose())
        .map(|x| x.transpose())
        .ok_or_else(|| Error::Singular("right solve".into()))
}

/// Rows of `m` selected by `idx`, in order.
pub fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
