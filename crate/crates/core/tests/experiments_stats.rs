//! Harness-level properties: determinism, sampling bands, statistics.

use geothresh::experiments::{
    ks_statistic, poisson, replication_rng, tv_poisson_estimate, Centring, Execution, Experiment,
    ExperimentConfig, Model, Statistic,
};
use geothresh::theory::{LimitSpec, SampleSize};
use geothresh::{DensitySpec, Domain};
use proptest::prelude::*;
use rand::Rng;

fn config(n: f64, k: usize, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        domain: Domain::unit_square(),
        density: DensitySpec::Uniform {},
        model: Model::Poisson,
        n,
        k,
        replications: reps,
        seed: 2024,
        statistic: Statistic::Both,
        centring: Centring::ExplicitUniform,
        record_xi_at: Some(0.0),
        compare_limit: true,
    }
}

#[test]
fn records_do_not_depend_on_thread_count() {
    let exp = Experiment::prepare(&config(3000.0, 2, 24)).unwrap();
    let seq = exp.run_with(Execution::Sequential).unwrap();
    for threads in [1, 4, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let par = pool.install(|| exp.run()).unwrap();
        assert_eq!(par, seq, "{threads} threads");
    }
}

#[test]
fn poisson_counts_follow_the_clt_band() {
    let mut c = config(1e4, 1, 100);
    c.statistic = Statistic::L;
    c.record_xi_at = None;
    let records = Experiment::prepare(&c).unwrap().run().unwrap();
    let mean = records.iter().map(|r| r.n_realised as f64).sum::<f64>() / 100.0;
    assert!(
        (mean - 1e4).abs() <= 3.0 * (1e4f64 / 100.0).sqrt(),
        "mean {mean}"
    );
}

#[test]
fn record_invariants() {
    let exp = Experiment::prepare(&config(2000.0, 1, 60)).unwrap();
    let records = exp.run().unwrap();
    let spec = LimitSpec::uniform(&Domain::unit_square(), 1).unwrap();
    let mut tl = Vec::new();
    let mut tm = Vec::new();
    for r in &records {
        let (l, m) = (r.l.unwrap(), r.m.unwrap());
        assert!(l <= m);
        assert_eq!(r.coincide, Some(l == m));
        assert!(r.transformed.unwrap().is_finite());
        // `coincide` makes both transforms equal.
        if l == m {
            assert_eq!(spec.transform(l, 2000.0), spec.transform(m, 2000.0));
        }
        tl.push(spec.transform(l, 2000.0));
        tm.push(spec.transform(m, 2000.0));
    }
    // Pointwise L <= M gives ECDF dominance at every level.
    tl.sort_by(f64::total_cmp);
    tm.sort_by(f64::total_cmp);
    assert!(tl.iter().zip(&tm).all(|(a, b)| a <= b));
}

#[test]
fn ks_on_exact_draws_respects_dkw() {
    let spec = LimitSpec::uniform(&Domain::disk(1.0).unwrap(), 2).unwrap();
    let cdf = |b: f64| spec.limit_cdf(b, SampleSize::Infinite).unwrap();
    // Inverse transform by bisection.
    let quantile = |u: f64| {
        let (mut lo, mut hi) = (-20.0, 60.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut rng = replication_rng(5, 0);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| quantile(rng.gen())).collect();
    let d = ks_statistic(&xs, cdf).unwrap();
    assert!(d <= 1.95 / (n as f64).sqrt(), "D = {d}");
}

#[test]
fn tv_of_poisson_samples_is_small() {
    for mean in [0.5, 1.0, 3.0] {
        let mut rng = replication_rng(8, mean as u64);
        let xs: Vec<u64> = (0..10_000).map(|_| poisson(&mut rng, mean)).collect();
        let tv = tv_poisson_estimate(&xs, mean).unwrap();
        assert!(tv <= 0.05, "mean {mean}: {tv}");
    }
}

#[test]
fn summary_reports_requested_fields() {
    let exp = Experiment::prepare(&config(2000.0, 1, 20)).unwrap();
    let records = exp.run().unwrap();
    let s = exp.summarise(&records).unwrap();
    assert!(s.ks_L.is_some() && s.ks_M.is_some());
    assert!(s.tv_estimate.is_some() && s.coincidence_rate.is_some());
    assert_eq!(s.replications, 20);
    assert_eq!(s.config_echo.seed, 2024);
    let xi_r = s.xi_radius.unwrap();
    assert!(xi_r > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ks_is_a_distance(xs in proptest::collection::vec(-10.0f64..10.0, 1..200)) {
        let d = ks_statistic(&xs, |x| 1.0 / (1.0 + (-x).exp())).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        // At least the largest gap at a single jump.
        prop_assert!(d >= 0.5 / xs.len() as f64 - 1e-15);
    }

    #[test]
    fn tv_is_a_probability_distance(xs in proptest::collection::vec(0u64..12, 1..300), mean in 0.01f64..8.0) {
        let tv = tv_poisson_estimate(&xs, mean).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&tv));
    }
}
