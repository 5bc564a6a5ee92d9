//! TT-cross interpolation with MaxVol pivoting.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::Basis1D;
use crate::error::{Error, Result};
use crate::ftt::Ftt;
use crate::linalg::{right_solve, select_rows, thin_qr, truncated_svd};
use crate::reference::Reference;
use crate::tensor::Tensor3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossOptions {
    #[serde(rename = "R0")]
    pub init_rank: usize,
    #[serde(rename = "Rho")]
    pub enrich_rank: usize,
    #[serde(rename = "MaxIt")]
    pub max_iter: usize,
    /// Hard rank cap; `None` means `R0 + Rho·MaxIt`.
    #[serde(rename = "Rmax")]
    pub max_rank: Option<usize>,
    pub stop_tol: f64,
    pub maxvol_tol: f64,
    /// Relative SVD threshold per interface; `0` keeps the full QR rank.
    pub truncation_tol: f64,
    pub seed: u64,
}

impl Default for CrossOptions {
    fn default() -> Self {
        Self {
            init_rank: 10,
            enrich_rank: 0,
            max_iter: 1,
            max_rank: None,
            stop_tol: 1e-8,
            maxvol_tol: 1e-2,
            truncation_tol: 0.0,
            seed: 0,
        }
    }
}

impl CrossOptions {
    pub fn validate(&self) -> Result<()> {
        if self.init_rank == 0 {
            return Err(Error::InvalidArgument("R0 must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("MaxIt must be at least 1".into()));
        }
        if !(self.maxvol_tol > 0.0) {
            return Err(Error::InvalidArgument("maxvol tolerance must be positive".into()));
        }
        if self.truncation_tol < 0.0 || self.stop_tol < 0.0 {
            return Err(Error::InvalidArgument("tolerances must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn rank_cap(&self) -> usize {
        self.max_rank
            .unwrap_or(self.init_rank + self.enrich_rank * self.max_iter)
            .max(1)
    }
}

/// Quasi-maximum-volume `r × r` row submatrix of a tall `m × r` matrix.
///
/// Returns the row set `I` and `B = H·H[I,:]⁻¹`, with `max |B| ≤ 1 + δ`.
pub fn maxvol(h: &DMatrix<f64>, delta: f64, init: Option<&[usize]>) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let (m, r) = h.shape();
    if m < r {
        return Err(Error::InvalidArgument(format!("maxvol needs m ≥ r, got {m} × {r}")));
    }
    if r == 0 {
        return Ok((Vec::new(), DMatrix::zeros(m, 0)));
    }
    let mut idx = match init {
        Some(i) => {
            if i.len() != r {
                return Err(Error::InvalidArgument("initial index set has wrong size".into()));
            }
            i.to_vec()
        }
        None => pivot_rows(h)?,
    };
    let mut b = right_solve(h, &select_rows(h, &idx))?;
    let cap = m * r;
    for _ in 0..=cap {
        let (mut bi, mut bj, mut bv) = (0, 0, 0.0);
        for j in 0..r {
            for i in 0..m {
                let v = b[(i, j)].abs();
                if v > bv {
                    bv = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        if bv <= 1.0 + delta {
            for (j, &i) in idx.iter().enumerate() {
                for c in 0..r {
                    b[(i, c)] = if c == j { 1.0 } else { 0.0 };
                }
            }
            return Ok((idx, b));
        }
        // B ← B − B[:,j]·(B[i,:] − e_jᵀ)/B[i,j]
        let col = b.column(bj).clone_owned();
        let mut row = b.row(bi).clone_owned();
        row[bj] -= 1.0;
        let piv = b[(bi, bj)];
        for c in 0..r {
            let rc = row[c] / piv;
            if rc == 0.0 {
                continue;
            }
            for i in 0..m {
                b[(i, c)] -= col[i] * rc;
            }
        }
        idx[bj] = bi;
    }
    Err(Error::MaxVolNoConvergence(cap))
}

/// Row pivots of Gaussian elimination with partial pivoting.
fn pivot_rows(h: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (m, r) = h.shape();
    let mut a = h.clone();
    let mut used = vec![false; m];
    let mut piv = Vec::with_capacity(r);
    let scale = h.amax().max(f64::MIN_POSITIVE);
    for j in 0..r {
        let mut best = None;
        let mut bv = 0.0;
        for i in 0..m {
            if !used[i] && a[(i, j)].abs() > bv {
                bv = a[(i, j)].abs();
                best = Some(i);
            }
        }
        let p = match best {
            Some(p) if bv > 1e-14 * scale => p,
            _ => return Err(Error::Singular("maxvol seed submatrix".into())),
        };
        used[p] = true;
        piv.push(p);
        for i in 0..m {
            if used[i] {
                continue;
            }
            let f = a[(i, j)] / a[(p, j)];
            if f != 0.0 {
                for c in j..r {
                    a[(i, c)] -= f * a[(p, c)];
                }
            }
        }
    }
    Ok(piv)
}

/// `ρ` grid-index tuples for the coordinates `dims`, drawn from `reference`
/// (uniformly over the grid when `None`) and snapped to the nearest node.
pub fn enrich_points<R: Rng + ?Sized>(
    reference: Option<&Reference>,
    bases: &[Basis1D],
    dims: std::ops::Range<usize>,
    rho: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    (0..rho)
        .map(|_| dims.clone().map(|k| draw_index(reference, &bases[k], rng)).collect())
        .collect()
}

fn draw_index<R: Rng + ?Sized>(reference: Option<&Reference>, basis: &Basis1D, rng: &mut R) -> usize {
    match reference {
        Some(r) => basis.nearest_node(r.inv_cdf(rng.random::<f64>())),
        None => rng.random_range(0..basis.cardinality()),
    }
}

#[derive(Clone, Debug)]
pub struct CrossOutput {
    pub ftt: Ftt,
    pub eval_count: usize,
    pub sweeps: usize,
    /// Relative weighted-`L²` change of the last sweep (`NaN` after one sweep).
    pub last_change: f64,
    /// Grid multi-indices of the last sampled core; the result reproduces
    /// `f` there up to round-off.
    pub interpolation_points: Vec<Vec<usize>>,
}

type Tuple = Vec<usize>;

struct Sweeper<'a, F> {
    f: F,
    bases: &'a [Basis1D],
    opts: &'a CrossOptions,
    rng: ChaCha8Rng,
    evals: usize,
}

impl<F> Sweeper<'_, F>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    /// Evaluates `f(left[α], x_i, right[β])` into an `|left| × n × |right|` tensor.
    fn sample(&mut self, k: usize, left: &[Tuple], right: &[Tuple]) -> Result<Tensor3> {
        let d = self.bases.len();
        let n = self.bases[k].cardinality();
        let (r0, r1) = (left.len(), right.len());
        let mut pts = Vec::with_capacity(r0 * n * r1 * d);
        for rt in right {
            for i in 0..n {
                for lt in left {
                    for (j, &li) in lt.iter().enumerate() {
                        pts.push(self.bases[j].nodes()[li]);
                    }
                    pts.push(self.bases[k].nodes()[i]);
                    for (j, &ri) in rt.iter().enumerate() {
                        pts.push(self.bases[k + 1 + j].nodes()[ri]);
                    }
                }
            }
        }
        let vals = (self.f)(&pts)?;
        if vals.len() != r0 * n * r1 {
            return Err(Error::InvalidArgument(format!(
                "evaluator returned {} values for {} points",
                vals.len(),
                r0 * n * r1
            )));
        }
        self.evals += vals.len();
        if let Some(p) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                value: vals[p],
                point: pts[p * d..(p + 1) * d].to_vec(),
            });
        }
        // Point order matches the α-fastest tensor layout.
        Ok(Tensor3::from_left(&DMatrix::from_vec(r0 * n, r1, vals), r0, n))
    }

    fn compress(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let cap = self.opts.rank_cap();
        let k = w.nrows().min(w.ncols());
        if self.opts.truncation_tol > 0.0 || k > cap {
            let tol = self.opts.truncation_tol * w.norm();
            truncated_svd(w, tol, cap).0
        } else {
            thin_qr(w).0
        }
    }
}

/// Left interface: returns the new core and the selected `(α, i)` rows.
fn left_interface(
    h: &Tensor3,
    basis: &Basis1D,
    compress: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    delta: f64,
) -> Result<(Tensor3, Vec<(usize, usize)>)> {
    let (r0, n, _) = h.shape();
    let w = h.mode2(basis.mass_cholesky()).left_unfold();
    let q = compress(&w);
    let back = Tensor3::from_left(&q, r0, n).mode2(&basis.mass_cholesky_inv_t().transpose());
    let (idx, b) = maxvol(&back.left_unfold(), delta, None)?;
    let core = Tensor3::from_left(&b, r0, n);
    Ok((core, idx.into_iter().map(|j| (j % r0, j / r0)).collect()))
}

/// Right interface: returns the new core and the selected `(i, β)` columns.
fn right_interface(
    h: &Tensor3,
    basis: &Basis1D,
    compress: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    delta: f64,
) -> Result<(Tensor3, Vec<(usize, usize)>, DMatrix<f64>)> {
    let (_, n, r1) = h.shape();
    let w = h.mode2(basis.mass_cholesky()).right_unfold().transpose();
    let q = compress(&w);
    let back = Tensor3::from_right(&q.transpose(), n, r1).mode2(&basis.mass_cholesky_inv_t().transpose());
    let (idx, b) = maxvol(&back.right_unfold().transpose(), delta, None)?;
    let core = Tensor3::from_right(&b.transpose(), n, r1);
    let r = q.transpose() * w;
    Ok((core, idx.into_iter().map(|j| (j % n, j / n)).collect(), r))
}

/// Builds an FTT of `f` by alternating cross sweeps.
///
/// `f` receives a row-major batch of `d`-dimensional grid points and must
/// return one finite value per point. One iteration is one directional
/// sweep; sweeps alternate forward and backward, starting forward. Initial
/// right index sets come from `warm_start` when given, otherwise from `R0`
/// draws of `reference` (uniform over the grid when `None`).
pub fn tt_cross<F>(
    f: F,
    bases: &[Basis1D],
    opts: &CrossOptions,
    reference: Option<&Reference>,
    warm_start: Option<&Ftt>,
) -> Result<CrossOutput>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    opts.validate()?;
    let d = bases.len();
    if d == 0 {
        return Err(Error::InvalidArgument("no bases".into()));
    }
    let mut sw = Sweeper {
        f,
        bases,
        opts,
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
        evals: 0,
    };

    let mut right: Vec<Vec<Tuple>> = match warm_start {
        Some(prev) => right_sets_from(prev, opts.maxvol_tol)?,
        None => initial_right_sets(bases, opts.init_rank, reference, &mut sw.rng),
    };
    let mut left: Vec<Vec<Tuple>> = vec![vec![Vec::new()]; d];
    let mut cores: Vec<Tensor3> = Vec::with_capacity(d);
    let mut prev: Option<Ftt> = None;
    let mut last_change = f64::NAN;
    let mut sweeps = 0;
    let mut last_forward = true;

    for it in 0..opts.max_iter {
        sweeps += 1;
        let forward = it % 2 == 0;
        last_forward = forward;
        cores.clear();
        if forward {
            for k in 0..d {
                let mut cols = right[k].clone();
                if k + 1 < d {
                    cols.extend(enrich_points(reference, bases, k + 1..d, opts.enrich_rank, &mut sw.rng));
                }
                let h = sw.sample(k, &left[k], &cols)?;
                if k + 1 == d {
                    cores.push(h);
                    break;
                }
                let (core, sel) = left_interface(&h, &bases[k], |w| sw.compress(w), opts.maxvol_tol)?;
                left[k + 1] = sel
                    .into_iter()
                    .map(|(a, i)| {
                        let mut t = left[k][a].clone();
                        t.push(i);
                        t
                    })
                    .collect();
                cores.push(core);
            }
        } else {
            let mut rev = Vec::with_capacity(d);
            for k in (0..d).rev() {
                let mut rows = left[k].clone();
                if k > 0 {
                    rows.extend(enrich_points(reference, bases, 0..k, opts.enrich_rank, &mut sw.rng));
                }
                let h = sw.sample(k, &rows, &right[k])?;
                if k == 0 {
                    rev.push(h);
                    break;
                }
                let (core, sel, _) = right_interface(&h, &bases[k], |w| sw.compress(w), opts.maxvol_tol)?;
                right[k - 1] = sel
                    .into_iter()
                    .map(|(i, b)| {
                        let mut t = vec![i];
                        t.extend_from_slice(&right[k][b]);
                        t
                    })
                    .collect();
                rev.push(core);
            }
            rev.reverse();
            cores = rev;
        }
        let ftt = Ftt::new(bases.to_vec(), cores.clone())?;
        if let Some(p) = &prev {
            let nrm = ftt.norm();
            last_change = if nrm > 0.0 { ftt.sub(p)?.norm() / nrm } else { 0.0 };
            log::debug!("cross sweep {sweeps}: relative change {last_change:.3e}");
            if last_change <= opts.stop_tol {
                prev = Some(ftt);
                break;
            }
        }
        prev = Some(ftt);
    }
    let interpolation_points = if last_forward {
        left[d - 1]
            .iter()
            .flat_map(|l| {
                (0..bases[d - 1].cardinality()).map(move |i| {
                    let mut t = l.clone();
                    t.push(i);
                    t
                })
            })
            .collect()
    } else {
        right[0]
            .iter()
            .flat_map(|r| {
                (0..bases[0].cardinality()).map(move |i| {
                    let mut t = vec![i];
                    t.extend_from_slice(r);
                    t
                })
            })
            .collect()
    };
    Ok(CrossOutput {
        ftt: prev.expect("at least one sweep"),
        interpolation_points,
        eval_count: sw.evals,
        sweeps,
        last_change,
    })
}

/// Nested right sets from `r0` random draws; the innermost level is kept
/// free of duplicates when the grid allows it.
fn initial_right_sets(
    bases: &[Basis1D],
    r0: usize,
    reference: Option<&Reference>,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<Tuple>> {
    let d = bases.len();
    let mut right: Vec<Vec<Tuple>> = vec![Vec::new(); d];
    right[d - 1] = vec![Vec::new()];
    for k in (0..d.saturating_sub(1)).rev() {
        let inner = right[k + 1].clone();
        let mut set: Vec<Tuple> = Vec::with_capacity(r0);
        for beta in 0..r0 {
            let tail = &inner[beta % inner.len()];
            let mut t = Vec::new();
            for _ in 0..50 {
                t = vec![draw_index(reference, &bases[k + 1], rng)];
                t.extend_from_slice(tail);
                if !set.contains(&t) {
                    break;
                }
            }
            set.push(t);
        }
        right[k] = set;
    }
    right
}

/// Right sets read off an existing FTT by a right-to-left orthogonalizing
/// MaxVol sweep; no function evaluations.
fn right_sets_from(ftt: &Ftt, delta: f64) -> Result<Vec<Vec<Tuple>>> {
    let d = ftt.dim();
    let bases = ftt.bases();
    let mut right: Vec<Vec<Tuple>> = vec![Vec::new(); d];
    right[d - 1] = vec![Vec::new()];
    let mut carry = ftt.cores()[d - 1].clone();
    for k in (1..d).rev() {
        let (core, sel, r) = right_interface(&carry, &bases[k], |w| thin_qr(w).0, delta)?;
        let _ = core;
        right[k - 1] = sel
            .into_iter()
            .map(|(i, b)| {
                let mut t = vec![i];
                t.extend_from_slice(&right[k][b]);
                t
            })
            .collect();
        carry = ftt.cores()[k - 1].mode3(&r.transpose());
    }
    Ok(right)
}
