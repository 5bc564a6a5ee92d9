//! End-to-end acceptance checks. Each test prints one verdict line; run with
//! `cargo test -p dirt-core --test acceptance -- --nocapture` to see them.

mod common;

use common::{bases, median, timed, verdict};
use dirt_core::debias::{irt_is, irt_mcmc};
use dirt_core::dirt::{build_dirt, make_schedule, Dirt, DirtOptions, PriorExponentRule, ScheduleMode};
use dirt_core::oracle::{divergences, quad_integral, Divergences, QuadGrid};
use dirt_core::targets::{FnTarget, Gaussian, GaussianMixture, Lorenz96, PredatorPrey, TargetDensity};
use dirt_core::{build_sirt, pdf_to_cdf, tt_cross, CrossOptions, Family, Reference, Tail};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn criterion_01_separable_exactness() {
    let d = 5;
    let b = bases(Family::Chebyshev2, 4, &vec![(0.0, 1.0); d]);
    let opts = CrossOptions {
        init_rank: 1,
        max_iter: 1,
        ..Default::default()
    };
    let f = |x: &[f64]| x.iter().map(|v| 1.0 + v).product::<f64>();
    let (out, secs) = timed(|| {
        tt_cross(|p| Ok(p.chunks(d).map(f).collect()), &b, &opts, None, None).unwrap()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let e = (out.ftt.eval(&x).unwrap() - f(&x)).abs() / f(&x);
        worst = worst.max(e);
    }
    verdict(
        "1",
        "separable exactness",
        worst <= 1e-12 && secs < 1.0,
        format!("max rel err {worst:.2e}, {secs:.3} s, {} evals", out.eval_count),
    );
}

#[test]
fn criterion_02_cdf_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for family in [Family::PiecewiseLinear, Family::Chebyshev2, Family::Fourier] {
        for _ in 0..1000 {
            let n = 2 * rng.random_range(2..12);
            let r = rng.random_range(1..5);
            let (a, w) = (rng.random_range(-3.0..3.0), rng.random_range(0.5..4.0));
            let basis = dirt_core::make_basis(family, n, a, a + w).unwrap();
            let d = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
            let tail = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..1e-3) };
            let cdf = pdf_to_cdf(&basis, &d, tail).unwrap();
            let u: f64 = rng.random();
            let e = (cdf.eval_normalized(cdf.invert(u)) - u).abs();
            worst = worst.max(e);
        }
    }
    verdict("2", "CDF round trip", worst <= 1e-10, format!("max |F(F^-1(u)) - u| = {worst:.2e}"));
}

fn mixture() -> GaussianMixture {
    let c1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.8]);
    let c2 = DMatrix::from_row_slice(2, 2, &[0.6, -0.2, -0.2, 1.2]);
    GaussianMixture::new(
        vec![0.6, 0.4],
        vec![vec![-1.2, -0.5], vec![1.5, 1.0]],
        vec![c1, c2],
        vec![(-6.0, 6.0); 2],
    )
    .unwrap()
}

/// For ranks 2..=10: the rank, ẑ and the oracle divergences of a SIRT fitted to the mixture.
fn mixture_sweep() -> Vec<(usize, f64, Divergences)> {
    let t = mixture();
    let dom = t.domain();
    let grid = QuadGrid::composite(&dom, 12, 24).unwrap();
    (2..=10)
        .map(|r| {
            let b = bases(Family::Chebyshev2, 24, &dom);
            let opts = CrossOptions {
                init_rank: r,
                max_iter: 4,
                max_rank: Some(r),
                seed: r as u64,
                ..Default::default()
            };
            let out = tt_cross(
                |p| Ok(p.chunks(2).map(|x| (0.5 * t.log_density(x)).exp()).collect()),
                &b,
                &opts,
                None,
                None,
            )
            .unwrap();
            let sirt = build_sirt(out.ftt, Tail::default()).unwrap();
            let g = |x: &[f64]| sirt.ftt().eval(x).unwrap();
            let approx = |x: &[f64]| sirt.pushforward_logpdf(x).unwrap();
            let dv = divergences(&t, &approx, Some(&g), &grid).unwrap();
            (r, sirt.z_hat(), dv)
        })
        .collect()
}

#[test]
fn criterion_03_normalizing_constant_bound() {
    let (rows, secs) = timed(mixture_sweep);
    let mut ok = secs < 60.0;
    let mut detail = String::new();
    for (r, zh, dv) in &rows {
        let (z, eps) = (dv.z, dv.l2_sqrt_err.unwrap());
        let lhs = (z.sqrt() - zh.sqrt()).abs();
        let conv = dv.smooth_rel_change();
        ok &= lhs <= eps && conv <= 1e-6;
        detail += &format!("r={r}: {lhs:.1e}<={eps:.1e} (quad {conv:.0e}); ");
    }
    verdict("3", "normalizing-constant bound", ok, format!("{detail}{secs:.1} s"));
}

#[test]
fn criterion_04_hellinger_and_tv_bounds() {
    let rows = mixture_sweep();
    let mut ok = true;
    let mut detail = String::new();
    for (r, _, dv) in &rows {
        let (z, eps) = (dv.z, dv.l2_sqrt_err.unwrap());
        let hb = (2.0 / z).sqrt() * eps;
        let tb = 2.0 * eps / z.sqrt();
        // kinked integrands: the bound must hold with the doubling change added
        let (dh, tv) = (dv.hellinger, dv.tv);
        ok &= dv.smooth_rel_change() <= 1e-6;
        ok &= dh + dv.quad_change.hellinger <= hb && tv + dv.quad_change.tv <= tb;
        detail += &format!("r={r}: H {dh:.1e}<={hb:.1e}, TV {tv:.1e}<={tb:.1e}; ");
    }
    verdict("4", "Hellinger/TV bounds", ok, detail);
}

#[test]
fn criterion_05_dirt_error_propagation() {
    let (res, secs) = timed(|| {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let t = Gaussian::new(c, vec![(-5.0, 5.0); 2]).unwrap();
        let sched = make_schedule(&ScheduleMode::Geometric { beta0: 0.1, factor: 10f64.sqrt() }).unwrap();
        assert_eq!(sched.betas.len(), 3);
        let reference = Reference::default();
        let opts = DirtOptions {
            family: Family::Chebyshev2,
            n: 14,
            tail: Tail::default(),
            cross: vec![CrossOptions {
                init_rank: 4,
                max_iter: 2,
                ..Default::default()
            }],
        };
        let (dirt, _) = build_dirt(&t, &sched, reference, &opts).unwrap();
        let x_grid = QuadGrid::composite(&t.domain(), 12, 16).unwrap();
        let (lo, hi) = reference.domain();
        let u_grid = QuadGrid::composite(&[(lo, hi); 2], 12, 12).unwrap();
        let betas = &sched.betas;
        let big_l = betas.len() - 1;

        // c_{L,j} = sup π^{β_L − β_j}, on a dense grid including the mode
        let c: Vec<f64> = (0..=big_l)
            .map(|j| {
                let mut s = 0.0f64;
                for i in 0..=400 {
                    for k in 0..=400 {
                        let x = [-5.0 + 0.025 * i as f64, -5.0 + 0.025 * k as f64];
                        s = s.max(((betas[big_l] - betas[j]) * t.log_density(&x)).exp());
                    }
                }
                s
            })
            .collect();

        // ε_0 = ‖g_0 − √π_0‖ on 𝒳; ε_j = ‖g_j − q̃_j‖ on 𝒰
        let l0 = &dirt.layers()[0];
        let s0 = dirt.log_shifts()[0];
        let eps0 = quad_integral(
            |x| (l0.ftt().eval(x).unwrap() * s0.exp() - (0.5 * betas[0] * t.log_density(x)).exp()).powi(2),
            &x_grid,
        )
        .unwrap()
        .sqrt();
        let mut bound = c[0].sqrt() * eps0;
        let mut log_zbar_prev = dirt.log_z_hat(0);
        let mut parts = vec![format!("eps0 {eps0:.2e}")];
        for j in 1..=big_l {
            let prev = dirt.truncated(j - 1).unwrap();
            let lj = &dirt.layers()[j];
            let sj = dirt.log_shifts()[j];
            let eps = quad_integral(
                |u| {
                    let q = prev.log_layer_ratio(&t, betas[j], betas[j], u).unwrap()[0].exp();
                    (lj.ftt().eval(u).unwrap() * sj.exp() - q).powi(2)
                },
                &u_grid,
            )
            .unwrap()
            .sqrt();
            bound += (c[j] * log_zbar_prev.exp()).sqrt() * eps;
            log_zbar_prev += dirt.log_z_hat(j);
            parts.push(format!("eps{j} {eps:.2e}"));
        }

        let err = quad_integral(
            |x| ((0.5 * t.log_density(x)).exp() - dirt.log_sqrt_density(x).unwrap().exp()).powi(2),
            &x_grid,
        )
        .unwrap()
        .sqrt();
        (err, bound, parts.join(", "))
    });
    let (err, bound, parts) = res;
    verdict(
        "5",
        "DIRT error propagation",
        err <= bound && secs < 120.0,
        format!("||sqrt(pi) - g_L|| = {err:.3e} <= bound {bound:.3e} ({parts}); {secs:.1} s"),
    );
}

fn predator_prey_run(seed: u64) -> (f64, f64, bool, f64) {
    let t = PredatorPrey::synthetic(2f64.sqrt(), 20211).unwrap();
    let sched = make_schedule(&ScheduleMode::Geometric { beta0: 1e-4, factor: 10f64.sqrt() }).unwrap();
    assert_eq!(sched.betas.len(), 9);
    let (n, r, d) = (16, 13, 8);
    let opts = DirtOptions {
        family: Family::PiecewiseLinear,
        n,
        tail: Tail::default(),
        cross: vec![CrossOptions {
            init_rank: r,
            enrich_rank: 0,
            max_iter: 1,
            max_rank: Some(r),
            seed,
            ..Default::default()
        }],
    };
    let ((dirt, reports), build_secs) =
        timed(|| build_dirt(&t, &sched, Reference::truncated_normal(4.0).unwrap(), &opts).unwrap());
    let dof = (d - 2) * n * r * r + 2 * n * r;
    let counts_ok = reports.iter().all(|rep| rep.eval_count == dof);
    let nsamp = 1 << 14;
    let chain = irt_mcmc(&dirt, &t, nsamp, seed, None).unwrap();
    let is = irt_is(&dirt, &t, nsamp, seed, None).unwrap();
    println!(
        "  seed {seed}: build {build_secs:.1} s, IACT {:.2}, N/ESS {:.2}, accept {:.2}",
        chain.iact,
        nsamp as f64 / is.ess,
        chain.accept_rate
    );
    (chain.iact, nsamp as f64 / is.ess, counts_ok, build_secs)
}

#[test]
fn criterion_06_predator_prey_benchmark() {
    let (runs, secs) = timed(|| (0..5).map(predator_prey_run).collect::<Vec<_>>());
    let mut iacts: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let mut ratios: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let counts_ok = runs.iter().all(|r| r.2);
    let (mi, mr) = (median(&mut iacts), median(&mut ratios));
    verdict(
        "6",
        "predator-prey benchmark",
        mi <= 5.0 && mr <= 4.0 && counts_ok && secs < 900.0,
        format!(
            "median IACT {mi:.2} (<= 5), median N/ESS {mr:.2} (<= 4), eval counts = DoF: {counts_ok}, {secs:.0} s"
        ),
    );
}

/// Rank-one Chebyshev layer that reproduces π = ((1+x)(1+y)(1+z))² exactly.
fn exact_dirt() -> (Dirt, impl TargetDensity) {
    let t = FnTarget::new("poly", vec![(0.0, 1.0); 3], |x: &[f64]| {
        2.0 * x.iter().map(|v| (1.0 + v).ln()).sum::<f64>()
    });
    let s = make_schedule(&ScheduleMode::Explicit { betas: vec![1.0] }).unwrap();
    let o = DirtOptions {
        family: Family::Chebyshev2,
        n: 3,
        tail: Tail::Absolute(0.0),
        cross: vec![CrossOptions {
            init_rank: 1,
            ..Default::default()
        }],
    };
    (build_dirt(&t, &s, Reference::default(), &o).unwrap().0, t)
}

#[test]
fn criterion_07_exact_proposal_degeneracy() {
    let (dirt, t) = exact_dirt();
    let n = 10_000;
    let chain = irt_mcmc(&dirt, &t, n, 7, None).unwrap();
    let is = irt_is(&dirt, &t, n, 7, None).unwrap();
    let ok = (chain.accept_rate - 1.0).abs() <= 1e-9 && (is.ess / n as f64 - 1.0).abs() <= 1e-9;
    verdict(
        "7",
        "exact-proposal degeneracy",
        ok,
        format!("accept rate {}, ESS/N = {}", chain.accept_rate, is.ess / n as f64),
    );
}

#[test]
fn criterion_08_unbiased_normalizing_constant() {
    // banana-shaped 3-d density on a box
    let t = FnTarget::new("banana", vec![(-4.0, 4.0); 3], |x: &[f64]| {
        let y = x[1] - 0.5 * x[0] * x[0];
        -0.5 * x[0] * x[0] - 2.0 * y * y - 0.5 * (x[2] - 0.3 * x[1]).powi(2) / 0.5
    });
    let z = quad_integral(|x| t.log_density(x).exp(), &QuadGrid::composite(&t.domain(), 12, 12).unwrap()).unwrap();
    let z2 = quad_integral(|x| t.log_density(x).exp(), &QuadGrid::composite(&t.domain(), 24, 12).unwrap()).unwrap();
    assert!((z - z2).abs() < 1e-9 * z);
    let s = make_schedule(&ScheduleMode::Explicit { betas: vec![0.3, 1.0] }).unwrap();
    let o = DirtOptions {
        family: Family::Chebyshev2,
        n: 12,
        tail: Tail::Relative(1e-4),
        cross: vec![CrossOptions {
            init_rank: 5,
            max_iter: 2,
            ..Default::default()
        }],
    };
    let (dirt, _) = build_dirt(&t, &s, Reference::default(), &o).unwrap();
    let est: Vec<f64> = (0..50).map(|seed| irt_is(&dirt, &t, 10_000, 1000 + seed, None).unwrap().z_bar_n).collect();
    let mean = est.iter().sum::<f64>() / 50.0;
    let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 49.0).sqrt();
    let se = sd / 50f64.sqrt();
    verdict(
        "8",
        "unbiased z_bar_N",
        (mean - z).abs() <= 3.0 * se,
        format!("mean {mean:.6} vs quadrature z {z:.6}, |diff| {:.2e} <= 3 SE {:.2e}", (mean - z).abs(), 3.0 * se),
    );
}

#[test]
fn criterion_09_monotone_triangular() {
    let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.4, 0.2, 0.4, 1.0]);
    let t = Gaussian::new(c, vec![(-5.0, 5.0); 3]).unwrap();
    let s = make_schedule(&ScheduleMode::Geometric { beta0: 0.1, factor: 3.0 }).unwrap();
    let o = DirtOptions {
        family: Family::PiecewiseLinear,
        n: 10,
        tail: Tail::default(),
        cross: vec![CrossOptions {
            init_rank: 3,
            ..Default::default()
        }],
    };
    let (dirt, _) = build_dirt(&t, &s, Reference::default(), &o).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    for _ in 0..1000 {
        let v: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let k = rng.random_range(0..3);
        let mut w = v.clone();
        w[k] = (v[k] + rng.random_range(1e-3..0.3)).min(1.0 - 1e-9);
        if w[k] <= v[k] {
            continue;
        }
        let x = dirt.irt(&v).unwrap().0;
        let y = dirt.irt(&w).unwrap().0;
        let prefix_same = (0..k).all(|j| x[j].to_bits() == y[j].to_bits());
        if !(prefix_same && y[k] > x[k]) {
            failures += 1;
        }
    }
    verdict("9", "monotone lower-triangular map", failures == 0, format!("{failures} failures in 1000 checks"));
}

#[test]
#[ignore = "slow: d = 40 Lorenz-96 benchmark, about an hour"]
fn criterion_10_lorenz96_benchmark() {
    let (t, _) = Lorenz96::synthetic(40, 0.1, 0.1, 96).unwrap();
    let mut sched = make_schedule(&ScheduleMode::Geometric { beta0: 1e-4, factor: 10f64.sqrt() }).unwrap();
    sched = sched.with_prior_rule(PriorExponentRule::Power(0.25));
    let opts = DirtOptions {
        family: Family::PiecewiseLinear,
        n: 15,
        tail: Tail::default(),
        cross: vec![CrossOptions {
            init_rank: 15,
            max_iter: 1,
            max_rank: Some(15),
            ..Default::default()
        }],
    };
    let ((dirt, reports), secs) =
        timed(|| build_dirt(&t, &sched, Reference::truncated_normal(3.0).unwrap(), &opts).unwrap());
    let evals: usize = reports.iter().map(|r| r.eval_count).sum();
    let n = 1 << 14;
    let chain = irt_mcmc(&dirt, &t, n, 10, None).unwrap();
    let is = irt_is(&dirt, &t, n, 10, None).unwrap();
    let ratio = n as f64 / is.ess;
    verdict(
        "10",
        "Lorenz-96 benchmark",
        chain.iact <= 4.0 && ratio <= 2.5 && secs < 3600.0,
        format!("IACT {:.2} (<= 4), N/ESS {ratio:.2} (<= 2.5), {evals} evaluations, build {secs:.0} s", chain.iact),
    );
}
