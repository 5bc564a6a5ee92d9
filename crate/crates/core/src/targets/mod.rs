//! Unnormalized target densities.

mod gaussian;
mod lorenz96;
pub mod ode;
mod predator_prey;
mod spec;

use rayon::prelude::*;

pub use gaussian::{Gaussian, GaussianMixture};
pub use lorenz96::Lorenz96;
pub use predator_prey::PredatorPrey;
pub use spec::TargetSpec;

use crate::error::{Error, Result};

/// `log π = log prior + log likelihood` on the support; `-∞` off it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogParts {
    pub in_support: bool,
    pub prior: f64,
    pub likelihood: f64,
}

impl LogParts {
    pub fn outside() -> Self {
        Self {
            in_support: false,
            prior: f64::NEG_INFINITY,
            likelihood: f64::NEG_INFINITY,
        }
    }

    pub fn total(&self) -> f64 {
        self.tempered(1.0, 1.0)
    }

    /// `β·log L + p·log prior`; terms with a zero exponent are dropped.
    pub fn tempered(&self, beta: f64, prior_exponent: f64) -> f64 {
        if !self.in_support {
            return f64::NEG_INFINITY;
        }
        let mut s = 0.0;
        if beta != 0.0 {
            s += beta * self.likelihood;
        }
        if prior_exponent != 0.0 {
            s += prior_exponent * self.prior;
        }
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    }
}

pub trait TargetDensity: Send + Sync {
    fn dim(&self) -> usize;

    /// Bounding box of the support.
    fn domain(&self) -> Vec<(f64, f64)>;

    fn name(&self) -> &str;

    fn log_parts(&self, x: &[f64]) -> LogParts;

    /// Whether prior and likelihood are reported separately.
    fn has_split(&self) -> bool {
        false
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_parts(x).total()
    }

    /// Row-major `m × d` batch.
    fn log_density_batch(&self, xs: &[f64]) -> Vec<f64> {
        xs.par_chunks(self.dim()).map(|x| self.log_density(x)).collect()
    }
}

pub(crate) fn in_box(x: &[f64], domain: &[(f64, f64)]) -> bool {
    x.iter().zip(domain).all(|(&v, &(lo, hi))| v >= lo && v <= hi)
}

/// `π^β` with the prior raised to its own exponent.
pub struct Tempered<'a> {
    inner: &'a dyn TargetDensity,
    beta: f64,
    prior_exponent: f64,
    name: String,
}

pub fn temper(target: &dyn TargetDensity, beta: f64, prior_exponent: f64) -> Result<Tempered<'_>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidArgument(format!("beta = {beta} outside (0, 1]")));
    }
    if prior_exponent != beta && !target.has_split() {
        return Err(Error::InvalidArgument(format!(
            "target {} has no prior/likelihood split",
            target.name()
        )));
    }
    Ok(Tempered {
        inner: target,
        beta,
        prior_exponent,
        name: format!("{}^{beta}", target.name()),
    })
}

impl TargetDensity for Tempered<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.inner.domain()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn log_parts(&self, x: &[f64]) -> LogParts {
        let p = self.inner.log_parts(x);
        LogParts {
            in_support: p.in_support,
            prior: self.prior_exponent * p.prior,
            likelihood: self.beta * p.likelihood,
        }
    }

    fn has_split(&self) -> bool {
        self.inner.has_split()
    }
}

/// Target from a closure, without a prior/likelihood split.
pub struct FnTarget<F> {
    f: F,
    domain: Vec<(f64, f64)>,
    name: String,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnTarget<F> {
    pub fn new(name: &str, domain: Vec<(f64, f64)>, f: F) -> Self {
        Self {
            f,
            domain,
            name: name.to_string(),
        }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> TargetDensity for FnTarget<F> {
    fn dim(&self) -> usize {
        self.domain.len()
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.domain.clone()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn log_parts(&self, x: &[f64]) -> LogParts {
        if !in_box(x, &self.domain) {
            return LogParts::outside();
        }
        LogParts {
            in_support: true,
            prior: 0.0,
            likelihood: (self.f)(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_exponent_skips_infinite_terms() {
        let p = LogParts {
            in_support: true,
            prior: -1.0,
            likelihood: f64::NEG_INFINITY,
        };
        assert_eq!(p.tempered(0.0, 1.0), -1.0);
        assert_eq!(p.tempered(0.5, 1.0), f64::NEG_INFINITY);
        assert_eq!(LogParts::outside().tempered(0.0, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn temper_identity_and_split_check() {
        let t = FnTarget::new("q", vec![(-1.0, 1.0)], |x| -x[0] * x[0]);
        let id = temper(&t, 1.0, 1.0).unwrap();
        assert_eq!(id.log_density(&[0.3]), t.log_density(&[0.3]));
        assert!(temper(&t, 0.5, 0.25).is_err());
        assert!(temper(&t, 0.0, 0.0).is_err());
        let half = temper(&t, 0.5, 0.5).unwrap();
        assert!((half.log_density(&[0.4]) + 0.08).abs() < 1e-15);
        assert_eq!(half.log_density(&[2.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn tempering_preserves_order() {
        let t = FnTarget::new("q", vec![(-3.0, 3.0)], |x| -0.5 * x[0] * x[0]);
        let (b0, b1) = (0.1, 0.3);
        for (x, y) in [(0.1, 1.0), (0.5, -2.0), (-0.2, 2.5)] {
            let r = |z: f64| temper(&t, b1, b1).unwrap().log_density(&[z]) - temper(&t, b0, b0).unwrap().log_density(&[z]);
            let ratio = (r(x) - r(y)).exp();
            let expect = ((t.log_density(&[x]) - t.log_density(&[y])) * (b1 - b0)).exp();
            assert!((ratio - expect).abs() < 1e-12);
            assert!(ratio > 1.0);
        }
    }
}
