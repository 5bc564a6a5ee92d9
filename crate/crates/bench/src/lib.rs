//! Fixtures shared by the benchmarks.

use dirt_core::{
    build_dirt, build_sirt, make_basis, make_schedule, tt_cross, Basis1D, CrossOptions, Dirt, DirtOptions, Family,
    Reference, ScheduleMode, Sirt, Tail, TargetSpec,
};

pub fn bases(family: Family, n: usize, d: usize) -> Vec<Basis1D> {
    (0..d).map(|_| make_basis(family, n, -1.0, 1.0).unwrap()).collect()
}

/// A smooth function of coupled coordinates, so the ranks are not trivial.
pub fn coupled(x: &[f64]) -> f64 {
    let s: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
    (-0.5 * x.iter().map(|v| v * v).sum::<f64>() - 0.3 * s).exp()
}

pub fn cross_options(rank: usize) -> CrossOptions {
    CrossOptions {
        init_rank: rank,
        max_iter: 2,
        max_rank: Some(rank),
        ..Default::default()
    }
}

pub fn sirt(family: Family, n: usize, d: usize, rank: usize) -> Sirt {
    let b = bases(family, n, d);
    let out = tt_cross(|p| Ok(p.chunks(d).map(coupled).collect()), &b, &cross_options(rank), None, None).unwrap();
    build_sirt(out.ftt, Tail::default()).unwrap()
}

/// Two-layer DIRT of a correlated Gaussian in `d` dimensions.
pub fn dirt(d: usize) -> Dirt {
    let covariance = (0..d)
        .map(|i| (0..d).map(|j| 0.6f64.powi((i as i32 - j as i32).abs())).collect())
        .collect();
    let spec = TargetSpec::Gaussian {
        covariance,
        bounds: vec![[-5.0, 5.0]; d],
    };
    let target = spec.build().unwrap();
    let schedule = make_schedule(&ScheduleMode::Explicit { betas: vec![0.2, 1.0] }).unwrap();
    let opts = DirtOptions {
        family: Family::Chebyshev2,
        n: 12,
        tail: Tail::default(),
        cross: vec![cross_options(6)],
    };
    build_dirt(target.as_ref(), &schedule, Reference::default(), &opts).unwrap().0
}

/// Deterministic points filling the unit cube, `m` rows of `d`.
pub fn unit_points(m: usize, d: usize) -> Vec<f64> {
    // additive recurrence with the generalized golden ratio
    let phi = (1..=d).map(|k| (k as f64 + 1.0).sqrt().fract()).collect::<Vec<_>>();
    (0..m)
        .flat_map(|i| phi.iter().map(move |a| ((i as f64 + 0.5) * a).fract()).collect::<Vec<_>>())
        .collect()
}
