mod common;

use common::{bases, ks_critical, ks_one_sample, ks_two_sample};
use dirt_core::dirt::PriorExponentRule;
use dirt_core::targets::{FnTarget, Gaussian, Lorenz96, TargetDensity};
use dirt_core::{
    build_dirt, build_sirt, make_schedule, tt_cross, CrossOptions, Dirt, DirtOptions, Family, Reference, ScheduleMode,
    Sirt, Tail,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn gaussian(rho: f64) -> Gaussian {
    let c = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
    Gaussian::new(c, vec![(-5.0, 5.0); 2]).unwrap()
}

fn sirt_of(t: &dyn TargetDensity, fam: Family, n: usize, r: usize) -> Sirt {
    let d = t.dim();
    let b = bases(fam, n, &t.domain());
    let opts = CrossOptions {
        init_rank: r,
        max_iter: 4,
        max_rank: Some(r),
        ..Default::default()
    };
    let out = tt_cross(|p| Ok(p.chunks(d).map(|x| (0.5 * t.log_density(x)).exp()).collect()), &b, &opts, None, None)
        .unwrap();
    build_sirt(out.ftt, Tail::default()).unwrap()
}

fn uniforms(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * d).map(|_| rng.random::<f64>()).collect()
}

/// One-sample KS critical value at level `alpha`.
fn ks1_critical(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

#[test]
fn irt_is_triangular_and_monotone() {
    let t = FnTarget::new("skew", vec![(-2.0, 2.0); 3], |x: &[f64]| {
        -0.5 * (x[0] * x[0] + (x[1] - 0.5 * x[0] * x[0]).powi(2) + (x[2] - x[1]).powi(2))
    });
    for fam in [Family::Chebyshev2, Family::PiecewiseLinear] {
        let s = sirt_of(&t, fam, 12, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..0.9)).collect();
            let k = rng.random_range(0..3);
            let mut v = u.clone();
            v[k] += rng.random_range(1e-6..0.09);
            let (x, _) = s.irt_forward(&u).unwrap();
            let (y, _) = s.irt_forward(&v).unwrap();
            assert!(y[k] > x[k], "{fam:?}: coordinate {k} did not increase");
            assert_eq!(&x[..k], &y[..k], "{fam:?}: leading coordinates changed");
        }
    }
}

/// Marginal CDF of a 2-d density on a box by tabulated quadrature.
fn marginal_cdf(t: &dyn TargetDensity, k: usize) -> impl Fn(f64) -> f64 {
    let (lo, hi) = t.domain()[k];
    let m = 4000;
    let h = (hi - lo) / m as f64;
    let gl = dirt_core::QuadGrid::new(&[t.domain()[1 - k]], 40).unwrap();
    let dens = |s: f64| {
        (0..gl.len())
            .map(|i| {
                let mut y = [0.0];
                let w = gl.point(i, &mut y);
                let mut x = [0.0; 2];
                x[k] = s;
                x[1 - k] = y[0];
                w * t.log_density(&x).exp()
            })
            .sum::<f64>()
    };
    // Simpson on each cell
    let mut cum = vec![0.0];
    for j in 0..m {
        let a = lo + j as f64 * h;
        let c = cum[j] + h / 6.0 * (dens(a) + 4.0 * dens(a + 0.5 * h) + dens(a + h));
        cum.push(c);
    }
    let total = cum[m];
    move |s: f64| {
        let p = ((s - lo) / h).clamp(0.0, m as f64);
        let j = (p.floor() as usize).min(m - 1);
        let f = p - j as f64;
        ((1.0 - f) * cum[j] + f * cum[j + 1]) / total
    }
}

#[test]
fn transported_samples_match_target_marginals() {
    let t = gaussian(0.5);
    let s = sirt_of(&t, Family::Chebyshev2, 30, 8);
    let n = 100_000;
    let xs: Vec<Vec<f64>> = s.irt_batch(&uniforms(n, 2, 11)).unwrap().into_iter().map(|p| p.0).collect();
    let crit = ks1_critical(n, 1e-3);
    for k in 0..2 {
        let cdf = marginal_cdf(&t, k);
        let col: Vec<f64> = xs.iter().map(|x| x[k]).collect();
        let d = ks_one_sample(&col, &cdf);
        assert!(d < crit, "marginal {k}: KS {d:.4} >= {crit:.4}");
    }
}

#[test]
fn reference_pushforward_is_truncated_normal() {
    let b = 4.0;
    let r = Reference::truncated_normal(b).unwrap();
    let nd = Normal::standard();
    let (pa, pb) = (nd.cdf(-b), nd.cdf(b));
    let cdf = |u: f64| ((nd.cdf(u) - pa) / (pb - pa)).clamp(0.0, 1.0);
    let n = 100_000;
    let d = 3;
    let u = r.uniform_to_ref(&uniforms(n, d, 5));
    let crit = ks1_critical(n, 1e-3);
    for k in 0..d {
        let col: Vec<f64> = u.iter().skip(k).step_by(d).copied().collect();
        let stat = ks_one_sample(&col, cdf);
        assert!(stat < crit, "dimension {k}: KS {stat:.4}");
    }
    // bounded density on the reference box
    let sup = (0..=1000).map(|i| r.log_pdf_1d(-b + 2.0 * b * i as f64 / 1000.0).exp()).fold(0.0, f64::max);
    assert!(sup.is_finite() && sup > 0.0);
}

fn dirt_opts(n: usize, r: usize) -> DirtOptions {
    DirtOptions {
        family: Family::Chebyshev2,
        n,
        tail: Tail::default(),
        cross: vec![CrossOptions {
            init_rank: r,
            max_iter: 2,
            ..Default::default()
        }],
    }
}

#[test]
fn appending_a_layer_equals_building_it() {
    let t = gaussian(0.8);
    let opts = dirt_opts(12, 4);
    let r = Reference::default();
    let full = make_schedule(&ScheduleMode::Explicit { betas: vec![0.1, 0.4, 1.0] }).unwrap();
    let (a, _) = build_dirt(&t, &full, r, &opts).unwrap();
    let (mut b, _) = Dirt::first_layer(&t, &full, r, &opts).unwrap();
    b.extend(&t, 0.4, 0.4, &opts).unwrap();
    b.extend(&t, 1.0, 1.0, &opts).unwrap();

    let n = 10_000;
    let va = a.irt_batch(&uniforms(n, 2, 1)).unwrap();
    let vb = b.irt_batch(&uniforms(n, 2, 2)).unwrap();
    let crit = ks_critical(n, n, 1e-3);
    for k in 0..2 {
        let ca: Vec<f64> = va.iter().map(|p| p.0[k]).collect();
        let cb: Vec<f64> = vb.iter().map(|p| p.0[k]).collect();
        let d = ks_two_sample(&ca, &cb);
        assert!(d < crit, "coordinate {k}: KS {d:.4}");
    }
    // same seeds per layer, so the two maps agree exactly
    let v = uniforms(100, 2, 9);
    assert_eq!(a.irt_batch(&v).unwrap(), b.irt_batch(&v).unwrap());
}

#[test]
fn no_op_layer_preserves_distribution() {
    let t = gaussian(0.6);
    let opts = dirt_opts(14, 5);
    let r = Reference::default();
    let one = make_schedule(&ScheduleMode::Explicit { betas: vec![1.0] }).unwrap();
    let (a, _) = build_dirt(&t, &one, r, &opts).unwrap();
    let mut b = a.clone();
    // β unchanged, so the new ratio is the reference density itself
    b.extend(&t, 1.0, 1.0, &opts).unwrap();
    assert_eq!(b.num_layers(), 2);

    let n = 10_000;
    let va = a.irt_batch(&uniforms(n, 2, 21)).unwrap();
    let vb = b.irt_batch(&uniforms(n, 2, 22)).unwrap();
    let crit = ks_critical(n, n, 1e-3);
    for k in 0..2 {
        let ca: Vec<f64> = va.iter().map(|p| p.0[k]).collect();
        let cb: Vec<f64> = vb.iter().map(|p| p.0[k]).collect();
        assert!(ks_two_sample(&ca, &cb) < crit);
    }
    let x = [0.3, -0.2];
    assert!((a.logpdf(&x).unwrap() - b.logpdf(&x).unwrap()).abs() < 1e-3);
}

#[test]
fn regularized_weights_are_bounded() {
    // heavier-than-Gaussian tails on a wide box stress the defensive term
    let t = FnTarget::new("heavy", vec![(-8.0, 8.0); 2], |x: &[f64]| {
        -1.5 * (1.0 + x[0] * x[0] + (x[1] - 0.3 * x[0]).powi(2)).ln()
    });
    let s = make_schedule(&ScheduleMode::Explicit { betas: vec![0.3, 1.0] }).unwrap();
    let (dirt, _) = build_dirt(&t, &s, Reference::default(), &dirt_opts(10, 3)).unwrap();
    let n = 100_000;
    let mut sup = f64::NEG_INFINITY;
    for (x, lf) in dirt.irt_batch(&uniforms(n, 2, 4)).unwrap() {
        let lw = t.log_density(&x) - lf;
        assert!(lw.is_finite(), "weight not finite at {x:?}");
        sup = sup.max(lw);
    }
    assert!(sup.is_finite());
    // the weights cannot exceed z̄ over the defensive floor
    assert!(sup - dirt.log_z_bar() < 30.0, "log sup weight {sup}");
}

fn lorenz_prior_dirt() -> (Dirt, usize) {
    let d = 6;
    let (t, _) = Lorenz96::synthetic(d, 0.1, 0.05, 1).unwrap();
    // p = β^q ≈ 1: the prior with a negligible likelihood power
    let s = make_schedule(&ScheduleMode::Explicit { betas: vec![1e-12, 1.0] })
        .unwrap()
        .with_prior_rule(PriorExponentRule::Power(1e-9));
    let opts = DirtOptions {
        family: Family::PiecewiseLinear,
        n: 60,
        tail: Tail::default(),
        cross: vec![CrossOptions {
            init_rank: 2,
            max_iter: 2,
            ..Default::default()
        }],
    };
    // layer 0 only
    (Dirt::first_layer(&t, &s, Reference::truncated_normal(4.0).unwrap(), &opts).unwrap().0, d)
}

#[test]
fn lorenz_prior_marginals() {
    let (dirt, d) = lorenz_prior_dirt();
    let nd = Normal::new(1.0, 1.0).unwrap();
    let (pa, pb) = (nd.cdf(-10.0), nd.cdf(10.0));
    let cdf = |x: f64| (nd.cdf(x) - pa) / (pb - pa);
    let n = 10_000;
    let xs = dirt.irt_batch(&uniforms(n, d, 8)).unwrap();
    let crit = ks1_critical(n, 1e-3);
    for k in 0..d {
        let col: Vec<f64> = xs.iter().map(|p| p.0[k]).collect();
        let stat = ks_one_sample(&col, cdf);
        assert!(stat < crit, "coordinate {k}: KS {stat:.4}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dirt_round_trip(rho in -0.9..0.9f64, seed in any::<u64>()) {
        let t = gaussian(rho);
        let s = make_schedule(&ScheduleMode::Explicit { betas: vec![0.25, 1.0] }).unwrap();
        let (dirt, _) = build_dirt(&t, &s, Reference::default(), &dirt_opts(10, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let v: Vec<f64> = (0..2).map(|_| rng.random_range(0.001..0.999)).collect();
            let (x, lf) = dirt.irt(&v).unwrap();
            let back = dirt.rosenblatt(&x).unwrap();
            prop_assert!(back.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-7), "{v:?} -> {back:?}");
            prop_assert!((dirt.logpdf(&x).unwrap() - lf).abs() < 1e-7 * lf.abs().max(1.0));
        }
    }
}
