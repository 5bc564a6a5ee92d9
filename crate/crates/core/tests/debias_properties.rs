use dirt_core::targets::{Gaussian, TargetDensity};
use dirt_core::{
    build_dirt, divergences, iact, irt_is, irt_mcmc, make_schedule, quad_integral, CrossOptions, Dirt, DirtOptions,
    Family, QuadGrid, Reference, ScheduleMode, Tail,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn target(rho: f64) -> Gaussian {
    let c = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
    Gaussian::new(c, vec![(-5.0, 5.0); 2]).unwrap()
}

/// A deliberately rough one-layer approximation.
fn rough_dirt(t: &Gaussian, n: usize, r: usize) -> Dirt {
    let s = make_schedule(&ScheduleMode::Explicit { betas: vec![1.0] }).unwrap();
    let opts = DirtOptions {
        family: Family::Chebyshev2,
        n,
        tail: Tail::default(),
        cross: vec![CrossOptions {
            init_rank: r,
            max_iter: 2,
            max_rank: Some(r),
            ..Default::default()
        }],
    };
    build_dirt(t, &s, Reference::default(), &opts).unwrap().0
}

#[test]
fn rejection_rate_is_bounded_by_twice_tv() {
    let t = target(0.9);
    let dirt = rough_dirt(&t, 10, 2);
    let grid = QuadGrid::composite(&t.domain(), 12, 16).unwrap();
    let approx = |x: &[f64]| dirt.logpdf(x).unwrap();
    let dv = divergences(&t, &approx, None, &grid).unwrap();

    let n = 20_000;
    let chain = irt_mcmc(&dirt, &t, n, 17, None).unwrap();
    let rej = 1.0 - chain.accept_rate;
    let ind: Vec<f64> = chain.accepted.iter().map(|&a| if a { 0.0 } else { 1.0 }).collect();
    let tau = iact(&ind).unwrap();
    let se = (rej * (1.0 - rej) * tau / n as f64).sqrt();
    assert!(rej > 0.0, "approximation too good to exercise the bound");
    assert!(rej <= 2.0 * dv.tv + 3.0 * se, "rejection {rej:.4} vs 2·TV {:.4} (+3 se {se:.4})", 2.0 * dv.tv);
}

#[test]
fn normalizing_constant_estimate_is_unbiased() {
    let t = target(0.7);
    let dirt = rough_dirt(&t, 12, 3);
    let grid = QuadGrid::composite(&t.domain(), 12, 16).unwrap();
    let z = quad_integral(|x| t.log_density(x).exp(), &grid).unwrap();

    let reps: Vec<f64> = (0..50).map(|s| irt_is(&dirt, &t, 1000, 1000 + s, None).unwrap().z_bar_n).collect();
    let m = reps.iter().sum::<f64>() / reps.len() as f64;
    let var = reps.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64;
    let se = (var / reps.len() as f64).sqrt();
    assert!((m - z).abs() <= 3.0 * se, "mean z̄ {m} vs z {z} (se {se:e})");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ess_matches_weight_chi2(rho in -0.95..0.95f64, r in 1usize..4, seed in any::<u64>()) {
        let t = target(rho);
        let dirt = rough_dirt(&t, 8, r);
        let n = 2000;
        let is = irt_is(&dirt, &t, n, seed, None).unwrap();
        let top = is.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = is.log_weights.iter().map(|l| (l - top).exp()).collect();
        let m1 = w.iter().sum::<f64>() / n as f64;
        let m2 = w.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let chi2 = m2 / (m1 * m1) - 1.0;
        prop_assert!((n as f64 / is.ess - 1.0 - chi2).abs() <= 1e-9 * (1.0 + chi2));
        prop_assert!(is.ess >= 1.0 - 1e-9 && is.ess <= n as f64 * (1.0 + 1e-12));
    }

    #[test]
    fn chain_outputs_are_consistent(rho in -0.95..0.95f64, seed in any::<u64>()) {
        let t = target(rho);
        let dirt = rough_dirt(&t, 8, 2);
        let n = 500;
        let c = irt_mcmc(&dirt, &t, n, seed, None).unwrap();
        let acc = c.accepted.iter().filter(|&&a| a).count();
        prop_assert_eq!(c.accept_rate, acc as f64 / n as f64);
        prop_assert!(c.iact >= 1.0);
        // a rejected step repeats the previous state
        for i in 1..n {
            if !c.accepted[i] {
                prop_assert_eq!(c.state(i), c.state(i - 1));
            }
        }
    }
}
