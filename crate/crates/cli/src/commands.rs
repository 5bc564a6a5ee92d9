use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dirt_core::io::{load_dirt, save_dirt};
use dirt_core::{
    build_dirt, divergences, irt_is, irt_mcmc, quad_integral, Diagnostics, Dirt, LayerReport, QuadChange, QuadGrid,
    TargetDensity, TargetSpec,
};
use serde::Serialize;

use crate::config::{RunConfig, SampleMode};
use crate::error::CliError;

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| CliError::io(p, e)),
        None => quiet_pipe(writeln!(std::io::stdout().lock(), "{text}"), Path::new("<stdout>")),
    }
}

/// A closed downstream pipe (`dirt info f | head`) is not an error.
fn quiet_pipe(r: std::io::Result<()>, path: &Path) -> Result<(), CliError> {
    match r {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(path, e)),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct BuildReport<'a> {
    target: &'a str,
    dim: usize,
    layers: &'a [LayerReport],
    total_eval_count: usize,
    log_z_bar: f64,
    dirt: &'a Path,
}

pub fn build(config: &Path, out: Option<PathBuf>, report: Option<PathBuf>, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (schedule, opts) = cfg.prepare()?;
    let out = out
        .or_else(|| cfg.outputs.dirt.clone())
        .ok_or_else(|| CliError::Config("no output path: pass --out or set outputs.dirt".into()))?;
    let target = cfg.target.build()?;

    let start = std::time::Instant::now();
    let (dirt, layers) = build_dirt(target.as_ref(), &schedule, cfg.reference, &opts)?;
    for l in &layers {
        log::info!(
            "layer {} beta={:e} evals={} ranks={:?} log_z_hat={:.6}",
            l.layer,
            l.beta,
            l.eval_count,
            l.ranks,
            l.log_z_hat
        );
    }
    log::info!("built {} layers in {:.2?}", layers.len(), start.elapsed());
    save_dirt(&out, &dirt, Some(&cfg.target))?;

    let r = BuildReport {
        target: target.name(),
        dim: dirt.dim(),
        layers: &layers,
        total_eval_count: layers.iter().map(|l| l.eval_count).sum(),
        log_z_bar: dirt.log_z_bar(),
        dirt: &out,
    };
    write_json(&r, report.or(cfg.outputs.report).as_deref())
}

/// The DIRT plus the target to debias against: the config's if given,
/// otherwise the one embedded at build time.
fn load_with_target(path: &Path, cfg: Option<&RunConfig>) -> Result<(Dirt, Box<dyn TargetDensity>), CliError> {
    let (dirt, embedded) = load_dirt(path)?;
    let spec: TargetSpec = match (cfg, embedded) {
        (Some(c), _) => c.target.clone(),
        (None, Some(s)) => s,
        (None, None) => {
            return Err(CliError::Config(format!(
                "{} has no embedded target; pass --config",
                path.display()
            )))
        }
    };
    let target = spec.build()?;
    if target.dim() != dirt.dim() {
        return Err(CliError::Config(format!(
            "target dimension {} does not match DIRT dimension {}",
            target.dim(),
            dirt.dim()
        )));
    }
    Ok((dirt, target))
}

#[derive(Serialize)]
struct SampleReport {
    mode: SampleMode,
    #[serde(rename = "N")]
    n: usize,
    seed: u64,
    #[serde(flatten)]
    diagnostics: Diagnostics,
    non_finite: usize,
}

pub struct SampleArgs {
    pub dirt: PathBuf,
    pub config: Option<PathBuf>,
    pub mode: Option<SampleMode>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
}

pub fn sample(a: SampleArgs) -> Result<(), CliError> {
    let cfg = a.config.as_deref().map(RunConfig::load).transpose()?;
    let (dirt, target) = load_with_target(&a.dirt, cfg.as_ref())?;
    let mode = a.mode.or(cfg.as_ref().map(|c| c.sampler.mode)).unwrap_or_default();
    let n = a
        .n
        .or(cfg.as_ref().and_then(|c| c.sampler.n))
        .ok_or_else(|| CliError::Config("sample size missing: pass -N or set sampler.N".into()))?;
    let seed = a.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let out = a.out.or(cfg.as_ref().and_then(|c| c.outputs.samples.clone()));
    let diag_path = a.diagnostics.or(cfg.as_ref().and_then(|c| c.outputs.diagnostics.clone()));

    let d = dirt.dim();
    let (rows, extra, report): (Vec<f64>, Vec<String>, SampleReport) = match mode {
        SampleMode::Mcmc => {
            let c = irt_mcmc(&dirt, target.as_ref(), n, seed, None)?;
            let flags = c.accepted.iter().map(|&a| u8::from(a).to_string()).collect();
            let r = SampleReport {
                mode,
                n,
                seed,
                diagnostics: Diagnostics::from(&c),
                non_finite: c.non_finite,
            };
            (c.states, flags, r)
        }
        SampleMode::Is => {
            let s = irt_is(&dirt, target.as_ref(), n, seed, None)?;
            let w = s.log_weights.iter().map(f64::to_string).collect();
            let r = SampleReport {
                mode,
                n,
                seed,
                diagnostics: Diagnostics::from(&s),
                non_finite: s.non_finite,
            };
            (s.samples, w, r)
        }
    };
    let last = match mode {
        SampleMode::Mcmc => "accepted",
        SampleMode::Is => "log_weight",
    };

    let sink: Box<dyn Write> = match &out {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    };
    quiet_pipe(
        write_csv(BufWriter::new(sink), d, &rows, &extra, last),
        out.as_deref().unwrap_or(Path::new("<stdout>")),
    )?;

    match diag_path {
        Some(p) => write_json(&report, Some(&p)),
        None => {
            eprintln!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
    }
}

/// `x1..xd` plus one trailing column. `f64` display is the shortest string
/// that round-trips, so equal runs give equal bytes.
fn write_csv<W: Write>(mut w: W, d: usize, rows: &[f64], extra: &[String], last: &str) -> std::io::Result<()> {
    let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain([last.to_string()]).collect();
    writeln!(w, "{}", header.join(","))?;
    for (x, e) in rows.chunks(d).zip(extra) {
        for v in x {
            write!(w, "{v},")?;
        }
        writeln!(w, "{e}")?;
    }
    w.flush()
}

#[derive(Serialize)]
struct BoundRow {
    quantity: &'static str,
    measured: f64,
    bound: f64,
    holds: bool,
}

#[derive(Serialize)]
struct DiagnoseReport {
    dim: usize,
    quad_order: usize,
    panels: usize,
    z: f64,
    z_bar: f64,
    /// `‖ḡ − √π‖₂` for the composed square-root surrogate `ḡ`.
    epsilon: f64,
    rows: Vec<BoundRow>,
    /// Change under doubling of the quadrature order.
    quad_change: QuadChange,
}

pub fn diagnose(
    path: &Path,
    config: Option<&Path>,
    quad_order: usize,
    panels: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = config.map(RunConfig::load).transpose()?;
    let (dirt, target) = load_with_target(path, cfg.as_ref())?;
    let domain = target.domain();
    if domain.len() > dirt_core::oracle::MAX_DIVERGENCE_DIM {
        return Err(dirt_core::Error::DimensionCap {
            d: domain.len(),
            cap: dirt_core::oracle::MAX_DIVERGENCE_DIM,
        }
        .into());
    }
    let grid = QuadGrid::composite(&domain, quad_order, panels)?;
    let logpdf = |x: &[f64]| dirt.logpdf(x).unwrap_or(f64::NEG_INFINITY);
    let sqrt_g = |x: &[f64]| dirt.log_sqrt_density(x).map_or(0.0, f64::exp);
    let dv = divergences(target.as_ref(), &logpdf, Some(&sqrt_g), &grid)?;

    let (z, z_bar) = (dv.z, dirt.z_bar());
    let eps = dv.l2_sqrt_err.expect("surrogate supplied");
    // π²/ḡ⁴ with ḡ² = z̄·f̂, which includes the defensive tail and so stays bounded
    let ratio = |x: &[f64]| {
        let p = target.log_density(x);
        if p == f64::NEG_INFINITY {
            return 0.0;
        }
        (2.0 * (p - z_bar.ln() - logpdf(x))).exp()
    };
    let a = quad_integral(|x| ratio(x) * target.log_density(x).exp() / z, &grid)?;
    let b = quad_integral(|x| ratio(x) * logpdf(x).exp(), &grid)?;

    let rows = [
        ("sqrt_z_gap", (z.sqrt() - z_bar.sqrt()).abs(), eps),
        ("hellinger", dv.hellinger, (2.0 / z).sqrt() * eps),
        ("tv", dv.tv, 2.0 * eps / z.sqrt()),
        ("chi2", dv.chi2, (a.sqrt() + b.sqrt()) * 2.0 * z_bar / (z * z.sqrt()) * eps),
    ]
    .into_iter()
    .map(|(quantity, measured, bound)| BoundRow {
        quantity,
        measured,
        bound,
        holds: measured <= bound,
    })
    .collect();

    let r = DiagnoseReport {
        dim: domain.len(),
        quad_order,
        panels,
        z,
        z_bar,
        epsilon: eps,
        rows,
        quad_change: dv.quad_change,
    };
    write_json(&r, out.or(cfg.as_ref().and_then(|c| c.outputs.divergences.as_deref())))
}

#[derive(Serialize)]
struct LayerInfo {
    beta: f64,
    prior_exponent: f64,
    ranks: Vec<usize>,
    log_z_hat: f64,
}

#[derive(Serialize)]
struct Info {
    dim: usize,
    domain: Vec<(f64, f64)>,
    reference: dirt_core::Reference,
    family: dirt_core::Family,
    n: usize,
    ratio_mode: dirt_core::RatioMode,
    log_z_bar: f64,
    layers: Vec<LayerInfo>,
    target: Option<TargetSpec>,
}

pub fn info(path: &Path) -> Result<(), CliError> {
    let (dirt, target) = load_dirt(path)?;
    let s = dirt.schedule();
    let b = &dirt.layers()[0].ftt().bases()[0];
    let layers = dirt
        .layers()
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let (beta, prior_exponent) = s.level(k);
            LayerInfo {
                beta,
                prior_exponent,
                ranks: l.ftt().ranks().to_vec(),
                log_z_hat: dirt.log_z_hat(k),
            }
        })
        .collect();
    let i = Info {
        dim: dirt.dim(),
        domain: dirt.domain(),
        reference: *dirt.reference(),
        family: b.family(),
        n: b.cardinality(),
        ratio_mode: s.ratio_mode,
        log_z_bar: dirt.log_z_bar(),
        layers,
        target,
    };
    write_json(&i, None)
}
