//! Grid queries against brute-force scans.

use geothresh::experiments::replication_rng;
use geothresh::geometry::dist2;
use geothresh::spatial::{default_cell_size, within_radius};
use geothresh::{Domain, Point, PointSet};
use proptest::prelude::*;
use rand::Rng;

fn cloud(domain: &Domain, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = replication_rng(seed, 0);
    (0..n).map(|_| domain.sample_uniform(&mut rng)).collect()
}

fn brute_knn(points: &[Point], i: usize, k: usize) -> f64 {
    let mut d: Vec<f64> = (0..points.len())
        .filter(|&j| j != i)
        .map(|j| dist2(&points[i], &points[j]))
        .collect();
    d.sort_by(f64::total_cmp);
    d[k - 1].sqrt()
}

#[test]
fn knn_matches_sorting() {
    for (seed, domain) in [Domain::unit_square(), Domain::ball3(1.0).unwrap()]
        .into_iter()
        .enumerate()
    {
        let pts = cloud(&domain, 200, seed as u64);
        for cell in [0.01, 0.1, 0.7] {
            let ps = PointSet::build(pts.clone(), domain.dim(), cell).unwrap();
            for i in 0..pts.len() {
                for k in 1..=3 {
                    assert_eq!(ps.knn_distance(i, k).unwrap(), brute_knn(&pts, i, k));
                }
            }
        }
    }
}

#[test]
fn count_within_matches_scan() {
    let domain = Domain::disk(1.0).unwrap();
    let pts = cloud(&domain, 500, 5);
    let ps = PointSet::new(pts.clone(), 2).unwrap();
    let mut rng = replication_rng(6, 0);
    for _ in 0..100 {
        let x = [rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2), 0.0];
        let r = rng.gen_range(0.0..0.6);
        let want = pts
            .iter()
            .filter(|p| within_radius(dist2(&x, p), r))
            .count();
        assert_eq!(ps.count_within(&x, r), want);
    }
}

#[test]
fn bucket_occupancy_matches_poissonisation() {
    let domain = Domain::unit_square();
    let n = 10_000;
    let k = 1;
    // Expected k-NN radius scale.
    let cell = ((k as f64 + (n as f64).ln()) / (n as f64 * std::f64::consts::PI)).sqrt();
    let ps = PointSet::build(cloud(&domain, n, 9), 2, cell).unwrap();
    let (_, mean) = ps.occupancy();
    let want = n as f64 * cell * cell / domain.volume();
    assert!(
        mean > want / 4.0 && mean < want * 4.0,
        "mean {mean} want {want}"
    );
    assert!(default_cell_size(n, 2, 1.0) > 0.0);
}

#[test]
fn every_point_is_found_in_its_cell() {
    let pts = cloud(&Domain::unit_square(), 1000, 3);
    let ps = PointSet::new(pts, 2).unwrap();
    for i in 0..ps.len() {
        assert!(ps.cell_members_of(i).contains(&(i as u32)));
    }
    let mut seen = ps.spatial_order().to_vec();
    seen.sort_unstable();
    assert_eq!(seen, (0..ps.len() as u32).collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// `knn_distance` is nondecreasing in `k`, and is the infimum radius
    /// holding more than `k` points.
    #[test]
    fn knn_is_the_defining_infimum(seed in any::<u64>(), n in 5usize..120, cell in 0.02f64..0.5) {
        let pts = cloud(&Domain::unit_square(), n, seed);
        let ps = PointSet::build(pts.clone(), 2, cell).unwrap();
        let i = (seed % n as u64) as usize;
        let mut prev = 0.0;
        for k in 1..n.min(5) {
            let r = ps.knn_distance(i, k).unwrap();
            prop_assert!(r >= prev);
            prev = r;
            prop_assert!(ps.count_within(&pts[i], r) > k);
            if r > 0.0 {
                let below = f64::from_bits(r.to_bits() - 1);
                prop_assert!(ps.count_within(&pts[i], below) <= k);
            }
        }
    }

    /// Answers do not depend on the cell size.
    #[test]
    fn cell_size_is_irrelevant(seed in any::<u64>(), a in 0.01f64..1.0, b in 0.01f64..1.0, r in 0.0f64..0.5) {
        let pts = cloud(&Domain::disk(1.0).unwrap(), 80, seed);
        let pa = PointSet::build(pts.clone(), 2, a).unwrap();
        let pb = PointSet::build(pts.clone(), 2, b).unwrap();
        for (i, p) in pts.iter().enumerate() {
            prop_assert_eq!(pa.knn_distance(i, 2).unwrap(), pb.knn_distance(i, 2).unwrap());
            prop_assert_eq!(pa.count_within(p, r), pb.count_within(p, r));
        }
    }
}
