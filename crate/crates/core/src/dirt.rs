//! Deep inverse Rosenblatt transport.
//!
//! Layer 0 is a SIRT on the target box approximating `√π_0`. Layer `k ≥ 1`
//! is a SIRT on the reference box approximating the square root of the
//! ratio `π_k/π_{k−1}` pulled back through the maps built so far, times the
//! reference density. The composed map is
//! `T̄_k = (T̂_0∘R)∘(T̂_1∘R)∘…∘(T̂_k∘R)` with `R` the reference CDF.
//!
//! Each layer FTT approximates `exp(½·log q − shift)`; the shift keeps the
//! cross values representable and is folded back into `ẑ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{make_basis, Basis1D, Family};
use crate::cross::{tt_cross, CrossOptions};
use crate::error::{Error, Result};
use crate::reference::Reference;
use crate::sirt::{build_sirt, Sirt, Tail};
use crate::targets::TargetDensity;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorExponentRule {
    #[default]
    SameAsBeta,
    /// Prior exponent `β^p`.
    Power(f64),
}

impl PriorExponentRule {
    pub fn exponent(&self, beta: f64) -> f64 {
        match *self {
            PriorExponentRule::SameAsBeta => beta,
            PriorExponentRule::Power(p) => beta.powf(p),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioMode {
    Exact,
    #[default]
    Approximate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgingSchedule {
    pub betas: Vec<f64>,
    #[serde(default)]
    pub prior_exponent_rule: PriorExponentRule,
    #[serde(default)]
    pub ratio_mode: RatioMode,
}

/// How the temperature ladder is generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleMode {
    Geometric { beta0: f64, factor: f64 },
    Explicit { betas: Vec<f64> },
}

pub fn make_schedule(mode: &ScheduleMode) -> Result<BridgingSchedule> {
    let betas = match mode {
        ScheduleMode::Geometric { beta0, factor } => {
            let (b0, f) = (*beta0, *factor);
            if !(b0 > 0.0 && b0 <= 1.0) || !(f > 1.0) || !f.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "geometric schedule needs beta0 in (0,1] and factor > 1, got {b0}, {f}"
                )));
            }
            let mut betas = vec![b0];
            let mut b = b0;
            // relative slack so that e.g. 1e-4·√10⁸ lands on 1 rather than just below
            while b < 1.0 - 1e-9 {
                b *= f;
                betas.push(if b >= 1.0 - 1e-9 { 1.0 } else { b });
            }
            *betas.last_mut().unwrap() = 1.0;
            betas
        }
        ScheduleMode::Explicit { betas } => betas.clone(),
    };
    let s = BridgingSchedule {
        betas,
        prior_exponent_rule: PriorExponentRule::SameAsBeta,
        ratio_mode: RatioMode::Approximate,
    };
    s.validate()?;
    Ok(s)
}

impl BridgingSchedule {
    pub fn with_prior_rule(mut self, rule: PriorExponentRule) -> Self {
        self.prior_exponent_rule = rule;
        self
    }

    pub fn with_ratio_mode(mut self, mode: RatioMode) -> Self {
        self.ratio_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.betas;
        if b.is_empty() {
            return Err(Error::InvalidArgument("empty schedule".into()));
        }
        if !(b[0] > 0.0) {
            return Err(Error::InvalidArgument("beta_0 must be positive".into()));
        }
        if b.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("betas must be strictly increasing".into()));
        }
        if *b.last().unwrap() != 1.0 {
            return Err(Error::InvalidArgument("last beta must be 1".into()));
        }
        if let PriorExponentRule::Power(p) = self.prior_exponent_rule {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidArgument("prior exponent power must be positive".into()));
            }
        }
        Ok(())
    }

    /// Number of layers after layer 0.
    pub fn len(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// `(β_k, p_k)`.
    pub fn level(&self, k: usize) -> (f64, f64) {
        let b = self.betas[k];
        (b, self.prior_exponent_rule.exponent(b))
    }
}

/// Discretization and cross settings for each layer.
#[derive(Clone, Debug)]
pub struct DirtOptions {
    pub family: Family,
    /// Basis cardinality per dimension.
    pub n: usize,
    pub tail: Tail,
    /// One entry broadcasts to all layers; otherwise one per layer.
    pub cross: Vec<CrossOptions>,
}

impl Default for DirtOptions {
    fn default() -> Self {
        Self {
            family: Family::Chebyshev2,
            n: 16,
            tail: Tail::default(),
            cross: vec![CrossOptions::default()],
        }
    }
}

impl DirtOptions {
    pub fn cross_for(&self, layer: usize) -> Result<CrossOptions> {
        let base = match self.cross.len() {
            0 => return Err(Error::InvalidArgument("no cross options".into())),
            1 => &self.cross[0],
            m if layer < m => &self.cross[layer],
            m => {
                return Err(Error::InvalidArgument(format!(
                    "cross options given for {m} layers, layer {layer} requested"
                )))
            }
        };
        let mut o = base.clone();
        o.seed = o.seed.wrapping_add(layer as u64);
        Ok(o)
    }
}

#[derive(Clone, Debug)]
pub struct Dirt {
    reference: Reference,
    layers: Vec<Sirt>,
    log_shifts: Vec<f64>,
    schedule: BridgingSchedule,
}

/// Summary of one layer build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    pub beta: f64,
    pub prior_exponent: f64,
    pub eval_count: usize,
    pub ranks: Vec<usize>,
    pub log_z_hat: f64,
}

fn layer_bases(domain: &[(f64, f64)], opts: &DirtOptions) -> Result<Vec<Basis1D>> {
    domain.iter().map(|&(a, b)| make_basis(opts.family, opts.n, a, b)).collect()
}

/// Builds the FTT of `exp(½·log q(x) − shift)` and returns it with the shift.
fn cross_layer<F>(
    log_q: F,
    bases: &[Basis1D],
    opts: &CrossOptions,
    reference: Option<&Reference>,
    warm: Option<&Sirt>,
    tail: Tail,
) -> Result<(Sirt, f64, usize)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let d = bases.len();
    let mut shift: Option<f64> = None;
    let out = tt_cross(
        |pts: &[f64]| {
            let logs = pts.par_chunks(d).map(&log_q).collect::<Result<Vec<f64>>>()?;
            if shift.is_none() {
                shift = logs.iter().copied().filter(|v| v.is_finite()).reduce(f64::max);
            }
            let s = shift.unwrap_or(0.0);
            Ok(logs.iter().map(|v| (v - s).exp()).collect())
        },
        bases,
        opts,
        reference,
        warm.map(|s| s.ftt()),
    )?;
    let shift = shift.ok_or(Error::ZeroDensity)?;
    let sirt = build_sirt(out.ftt, tail)?;
    Ok((sirt, shift, out.eval_count))
}

fn check_log(v: f64, x: &[f64]) -> Result<f64> {
    if v.is_nan() || v == f64::INFINITY {
        Err(Error::NonFinite { value: v, point: x.to_vec() })
    } else {
        Ok(v)
    }
}

impl Dirt {
    /// Builds layer 0 on the target box at level `(β_0, p_0)` of `schedule`.
    pub fn first_layer(
        target: &dyn TargetDensity,
        schedule: &BridgingSchedule,
        reference: Reference,
        opts: &DirtOptions,
    ) -> Result<(Dirt, LayerReport)> {
        schedule.validate()?;
        if schedule.prior_exponent_rule != PriorExponentRule::SameAsBeta && !target.has_split() {
            return Err(Error::InvalidArgument(format!(
                "target {} has no prior/likelihood split for a separate prior exponent",
                target.name()
            )));
        }
        let (beta, p) = schedule.level(0);
        let wrap = |e| Error::Layer { layer: 0, beta, source: Box::new(e) };
        let bases = layer_bases(&target.domain(), opts)?;
        let cross = opts.cross_for(0)?;
        let (sirt, shift, evals) = cross_layer(
            |x| check_log(0.5 * target.log_parts(x).tempered(beta, p), x),
            &bases,
            &cross,
            None,
            None,
            opts.tail,
        )
        .map_err(wrap)?;
        let dirt = Dirt {
            reference,
            layers: vec![sirt],
            log_shifts: vec![shift],
            schedule: BridgingSchedule { betas: vec![beta], ..schedule.clone() },
        };
        let report = dirt.report(0, evals);
        log::info!("layer 0: beta {beta:.3e}, {evals} evaluations, log z_hat {:.4}", report.log_z_hat);
        Ok((dirt, report))
    }

    /// Appends one layer bridging the current top level to `(β, p)`.
    pub fn extend(
        &mut self,
        target: &dyn TargetDensity,
        beta: f64,
        prior_exponent: f64,
        opts: &DirtOptions,
    ) -> Result<LayerReport> {
        let k = self.layers.len();
        let wrap = |e| Error::Layer { layer: k, beta, source: Box::new(e) };
        if !(beta >= *self.schedule.betas.last().unwrap() && beta <= 1.0) {
            return Err(wrap(Error::InvalidArgument("temperature must not decrease".into())));
        }
        let d = self.dim();
        let bases = layer_bases(&vec![self.reference.domain(); d], opts).map_err(wrap)?;
        let cross = opts.cross_for(k).map_err(wrap)?;
        // the first reference-space layer has nothing comparable to start from
        let warm = if k >= 2 { self.layers.last() } else { None };
        let (sirt, shift, evals) = cross_layer(
            |u| self.log_layer_ratio_at(target, beta, prior_exponent, u),
            &bases,
            &cross,
            Some(&self.reference),
            warm,
            opts.tail,
        )
        .map_err(wrap)?;
        self.layers.push(sirt);
        self.log_shifts.push(shift);
        self.schedule.betas.push(beta);
        let report = self.report(k, evals);
        log::info!("layer {k}: beta {beta:.3e}, {evals} evaluations, log z_hat {:.4}", report.log_z_hat);
        Ok(report)
    }

    fn report(&self, k: usize, eval_count: usize) -> LayerReport {
        LayerReport {
            layer: k,
            beta: self.schedule.betas[k],
            prior_exponent: self.schedule.prior_exponent_rule.exponent(self.schedule.betas[k]),
            eval_count,
            ranks: self.layers[k].ftt().ranks(),
            log_z_hat: self.log_z_hat(k),
        }
    }

    /// Reassembles a DIRT from stored layers.
    pub(crate) fn from_parts(
        reference: Reference,
        layers: Vec<Sirt>,
        log_shifts: Vec<f64>,
        schedule: BridgingSchedule,
    ) -> Result<Dirt> {
        if layers.is_empty() || layers.len() != log_shifts.len() || layers.len() != schedule.betas.len() {
            return Err(Error::Format("layer count mismatch".into()));
        }
        let d = layers[0].dim();
        if layers.iter().any(|l| l.dim() != d) {
            return Err(Error::Format("layer dimension mismatch".into()));
        }
        Ok(Dirt {
            reference,
            layers,
            log_shifts,
            schedule,
        })
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }

    /// The DIRT made of layers `0..=k`.
    pub fn truncated(&self, k: usize) -> Result<Dirt> {
        if k >= self.layers.len() {
            return Err(Error::InvalidArgument(format!("layer {k} not built")));
        }
        let mut schedule = self.schedule.clone();
        schedule.betas.truncate(k + 1);
        Ok(Dirt {
            reference: self.reference,
            layers: self.layers[..=k].to_vec(),
            log_shifts: self.log_shifts[..=k].to_vec(),
            schedule,
        })
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn layers(&self) -> &[Sirt] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn log_shifts(&self) -> &[f64] {
        &self.log_shifts
    }

    /// Temperatures of the layers built so far.
    pub fn schedule(&self) -> &BridgingSchedule {
        &self.schedule
    }

    /// Target box of layer 0.
    pub fn domain(&self) -> Vec<(f64, f64)> {
        self.layers[0].domain()
    }

    /// `log ẑ_k` of the unshifted layer function.
    pub fn log_z_hat(&self, k: usize) -> f64 {
        self.layers[k].z_hat().ln() + 2.0 * self.log_shifts[k]
    }

    pub fn log_z_hats(&self) -> Vec<f64> {
        (0..self.layers.len()).map(|k| self.log_z_hat(k)).collect()
    }

    /// `log z̄ = Σ_k log ẑ_k`.
    pub fn log_z_bar(&self) -> f64 {
        self.log_z_bar_through(self.layers.len() - 1)
    }

    fn log_z_bar_through(&self, top: usize) -> f64 {
        (0..=top).map(|k| self.log_z_hat(k)).sum()
    }

    pub fn z_bar(&self) -> f64 {
        self.log_z_bar().exp()
    }

    /// Applies layers `top, …, 0` to `v ∈ [0,1]^d`; returns `x` and the log
    /// density of the pushforward of the uniform measure at `x`.
    fn irt_from(&self, top: usize, v: &[f64]) -> Result<(Vec<f64>, f64)> {
        let mut w = v.to_vec();
        let mut logpdf = 0.0;
        for k in (0..=top).rev() {
            let (y, lp) = self.layers[k].irt_forward(&w)?;
            logpdf += lp;
            if k == 0 {
                return Ok((y, logpdf));
            }
            logpdf -= self.reference.log_pdf_ratio(&y);
            w = y.iter().map(|&t| self.reference.cdf(t)).collect();
        }
        unreachable!()
    }

    /// `v ∈ [0,1]^d ↦ (x, log f̂(x))`.
    pub fn irt(&self, v: &[f64]) -> Result<(Vec<f64>, f64)> {
        if v.len() != self.dim() {
            return Err(Error::InvalidArgument(format!("expected {} coordinates", self.dim())));
        }
        self.irt_from(self.layers.len() - 1, v)
    }

    /// [`Dirt::irt`] over the rows of a row-major batch, in parallel.
    pub fn irt_batch(&self, v: &[f64]) -> Result<Vec<(Vec<f64>, f64)>> {
        v.par_chunks(self.dim()).map(|r| self.irt(r)).collect()
    }

    /// The intermediate points `[x, u_1, …, u_L]` and the final `v`.
    fn rosenblatt_chain(&self, x: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>, f64)> {
        self.layers[0].ftt().check_domain(x)?;
        let mut points = vec![x.to_vec()];
        let (mut w, mut logpdf) = self.layers[0].rosenblatt_with_logpdf(x)?;
        for layer in &self.layers[1..] {
            let u = self.reference.uniform_to_ref(&w);
            let (next, lp) = layer.rosenblatt_with_logpdf(&u)?;
            logpdf += lp - self.reference.log_pdf_ratio(&u);
            points.push(u);
            w = next;
        }
        Ok((points, w, logpdf))
    }

    /// Inverse of [`Dirt::irt`].
    pub fn rosenblatt(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.rosenblatt_chain(x)?.1)
    }

    /// `log f̂(x)` of the composed pushforward density.
    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        Ok(self.rosenblatt_chain(x)?.2)
    }

    /// `log ḡ(x)`, the composed square-root surrogate of the top-level
    /// unnormalized density, without the defensive tail.
    pub fn log_sqrt_density(&self, x: &[f64]) -> Result<f64> {
        let (points, _, _) = self.rosenblatt_chain(x)?;
        let mut s = 0.0;
        for (k, p) in points.iter().enumerate() {
            s += self.layers[k].ftt().eval_unchecked(p).abs().ln() + self.log_shifts[k];
            if k > 0 {
                s -= 0.5 * self.reference.log_pdf_ratio(p);
            }
        }
        Ok(s)
    }

    /// `½·log` of the ratio function for the next layer at reference point `u`.
    fn log_layer_ratio_at(&self, target: &dyn TargetDensity, beta: f64, p: f64, u: &[f64]) -> Result<f64> {
        let top = self.layers.len() - 1;
        let w: Vec<f64> = u.iter().map(|&t| self.reference.cdf(t)).collect();
        let (x, log_f) = self.irt_from(top, &w)?;
        let parts = target.log_parts(&x);
        let (beta_k, p_k) = (self.schedule.betas[top], self.schedule.prior_exponent_rule.exponent(self.schedule.betas[top]));
        let log_r = match self.schedule.ratio_mode {
            RatioMode::Approximate => parts.tempered(beta - beta_k, p - p_k),
            RatioMode::Exact => parts.tempered(beta, p) - self.log_z_bar_through(top) - log_f,
        };
        let log_r = check_log(log_r, &x)?;
        Ok(0.5 * (log_r + self.reference.log_pdf_ratio(u)))
    }

    /// `log q(u)` for a batch of reference points, where `q` is the square
    /// root of the ratio the next layer at level `(β, p)` would approximate.
    pub fn log_layer_ratio(
        &self,
        target: &dyn TargetDensity,
        beta: f64,
        prior_exponent: f64,
        u: &[f64],
    ) -> Result<Vec<f64>> {
        u.par_chunks(self.dim())
            .map(|r| self.log_layer_ratio_at(target, beta, prior_exponent, r))
            .collect()
    }

    pub fn layer_ratio(
        &self,
        target: &dyn TargetDensity,
        beta: f64,
        prior_exponent: f64,
        u: &[f64],
    ) -> Result<Vec<f64>> {
        Ok(self
            .log_layer_ratio(target, beta, prior_exponent, u)?
            .into_iter()
            .map(f64::exp)
            .collect())
    }
}

/// Builds all layers of `schedule`; returns the DIRT and one report per layer.
pub fn build_dirt(
    target: &dyn TargetDensity,
    schedule: &BridgingSchedule,
    reference: Reference,
    opts: &DirtOptions,
) -> Result<(Dirt, Vec<LayerReport>)> {
    let (mut dirt, first) = Dirt::first_layer(target, schedule, reference, opts)?;
    let mut reports = vec![first];
    for k in 1..schedule.betas.len() {
        let (beta, p) = schedule.level(k);
        reports.push(dirt.extend(target, beta, p, opts)?);
    }
    Ok((dirt, reports))
}
