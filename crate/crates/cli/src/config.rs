//! Run configuration. Keys mirror the tuning names of the method (`R0`,
//! `Rho`, `MaxIt`, `Rmax`, `beta0`) so a config reads like a parameter table.

use std::path::{Path, PathBuf};

use dirt_core::{
    make_basis, make_schedule, BridgingSchedule, CrossOptions, DirtOptions, Family, PriorExponentRule, RatioMode,
    Reference, ScheduleMode, Tail, TargetSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub target: TargetSpec,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub tail: Tail,
    /// One entry for every layer, or one per layer.
    #[serde(default = "default_cross")]
    pub cross: Vec<CrossOptions>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_cross() -> Vec<CrossOptions> {
    vec![CrossOptions::default()]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Geometric,
    #[default]
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub mode: ScheduleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default)]
    pub ratio_mode: RatioMode,
    #[serde(default)]
    pub prior_exponent: PriorExponentRule,
}

impl Default for ScheduleConfig {
    /// A single layer at β = 1.
    fn default() -> Self {
        Self {
            mode: ScheduleKind::Explicit,
            beta0: None,
            factor: None,
            betas: Some(vec![1.0]),
            ratio_mode: RatioMode::default(),
            prior_exponent: PriorExponentRule::default(),
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<BridgingSchedule, CliError> {
        let mode = match (self.mode, self.beta0, self.factor, &self.betas) {
            (ScheduleKind::Geometric, Some(beta0), Some(factor), None) => ScheduleMode::Geometric { beta0, factor },
            (ScheduleKind::Geometric, ..) => {
                return Err(CliError::Config("geometric schedule needs beta0 and factor and no betas".into()))
            }
            (ScheduleKind::Explicit, None, None, Some(b)) => ScheduleMode::Explicit { betas: b.clone() },
            (ScheduleKind::Explicit, ..) => {
                return Err(CliError::Config("explicit schedule needs betas and no beta0 or factor".into()))
            }
        };
        let s = make_schedule(&mode)?
            .with_prior_rule(self.prior_exponent)
            .with_ratio_mode(self.ratio_mode);
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub family: Family,
    pub n: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        let d = DirtOptions::default();
        Self { family: d.family, n: d.n }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    #[default]
    Mcmc,
    Is,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default)]
    pub mode: SampleMode,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

/// Output paths, relative to the working directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirt: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergences: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Everything `build_dirt` needs, checked up front so that a bad config
    /// is reported as such instead of as a layer failure.
    pub fn prepare(&self) -> Result<(BridgingSchedule, DirtOptions), CliError> {
        let schedule = self.schedule.build()?;
        if let Reference::TruncatedNormal { bound } = self.reference {
            Reference::truncated_normal(bound)?;
        }
        let target = self.target.build()?;
        for &(a, b) in &target.domain() {
            make_basis(self.basis.family, self.basis.n, a, b)?;
        }
        let cross = self
            .cross
            .iter()
            .map(|c| CrossOptions {
                seed: c.seed.wrapping_add(self.seed),
                ..c.clone()
            })
            .collect();
        let opts = DirtOptions {
            family: self.basis.family,
            n: self.basis.n,
            tail: self.tail,
            cross,
        };
        for k in 0..schedule.betas.len() {
            opts.cross_for(k)?.validate()?;
        }
        Ok((schedule, opts))
    }
}
