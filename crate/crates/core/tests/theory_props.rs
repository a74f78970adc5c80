//! Theory values: solver consistency and distribution-function shape.

use geothresh::theory::{
    expected_isolated, nonuniform_limit_cdf, solve_rn, unit_ball_volume, LimitSpec, SampleSize,
};
use geothresh::{Density, Domain};
use proptest::prelude::*;

#[test]
fn solver_radius_approaches_the_leading_order_centring() {
    let square = Domain::unit_square();
    let density = Density::uniform(&square);
    for beta in [0.0, 1.0] {
        let gaps: Vec<f64> = [1e4, 1e5, 1e6]
            .into_iter()
            .map(|n: f64| {
                let r = solve_rn(&density, n, 1, beta).unwrap();
                (n * unit_ball_volume(2) * density.f0() * r * r - n.ln() - beta).abs()
            })
            .collect();
        assert!(
            gaps[0] > gaps[1] && gaps[1] > gaps[2],
            "beta {beta}: {gaps:?}"
        );
    }
}

#[test]
fn solver_works_on_every_domain_family() {
    let domains = [
        Domain::unit_square(),
        Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.2, 0.9]]).unwrap(),
        Domain::disk(2.0).unwrap(),
        Domain::ball3(1.0).unwrap(),
    ];
    for domain in domains {
        let density = Density::uniform(&domain);
        for k in 1..=3 {
            let r = solve_rn(&density, 5e3, k, 0.5).unwrap();
            let e = expected_isolated(&density, 5e3, r, k);
            assert!((e - (-0.5f64).exp()).abs() <= 1e-9, "{domain:?} k {k}: {e}");
        }
    }
    let radial = Density::radial_with_ratio(&Domain::disk(1.0).unwrap(), 1.0).unwrap();
    let r = solve_rn(&radial, 1e4, 1, 0.0).unwrap();
    assert!((expected_isolated(&radial, 1e4, r, 1) - 1.0).abs() <= 1e-9);
}

fn specs() -> Vec<LimitSpec> {
    let disk = Domain::disk(1.0).unwrap();
    let ball = Domain::ball3(1.0).unwrap();
    vec![
        LimitSpec::uniform(&Domain::unit_square(), 1).unwrap(),
        LimitSpec::uniform(&disk, 2).unwrap(),
        LimitSpec::uniform(&disk, 3).unwrap(),
        LimitSpec::uniform(&ball, 1).unwrap(),
        LimitSpec::uniform(&ball, 2).unwrap(),
    ]
}

proptest! {
    #[test]
    fn limit_cdfs_are_distribution_functions(a in -8.0f64..30.0, gap in 0.0f64..5.0, logn in 3.0f64..40.0) {
        for spec in specs() {
            for n in [SampleSize::Infinite, SampleSize::Finite(logn.exp())] {
                let lo = spec.limit_cdf(a, n).unwrap();
                let hi = spec.limit_cdf(a + gap, n).unwrap();
                prop_assert!((0.0..=1.0).contains(&lo));
                prop_assert!(lo <= hi + 1e-15);
                // The finite-n factor only lowers the CDF.
                if let SampleSize::Finite(_) = n {
                    prop_assert!(lo <= spec.limit_cdf(a, SampleSize::Infinite).unwrap() + 1e-15);
                }
            }
        }
    }

    #[test]
    fn nonuniform_cdf_has_median_zero(alpha in 0.1f64..10.0, z in -20.0f64..20.0) {
        prop_assert!((nonuniform_limit_cdf(alpha, 0.0) - 0.5).abs() < 1e-14);
        let f = nonuniform_limit_cdf(alpha, z);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((z >= 0.0) == (f >= 0.5 - 1e-14) || z.abs() < 1e-12);
    }

    #[test]
    fn expected_isolated_decreases_in_r(n in 50.0f64..2e4, r in 0.0f64..0.3, dr in 0.0f64..0.05, k in 1usize..4) {
        let density = Density::uniform(&Domain::disk(1.0).unwrap());
        let a = expected_isolated(&density, n, r, k);
        let b = expected_isolated(&density, n, r + dr, k);
        prop_assert!(b <= a * (1.0 + 1e-9) + 1e-12);
        prop_assert!(a <= n * (1.0 + 1e-12));
    }
}
