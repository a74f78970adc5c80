//! Brute-force reference implementations of the threshold quantities.
//!
//! These share no code with [`crate::thresholds`] beyond the pair-distance
//! convention (`sqrt` of the squared distance) and exist to cross-check it.

use crate::error::{Error, Result};
use crate::geometry::{dist2, Point};
use crate::spatial::within_radius;

/// Largest point count accepted by the exhaustive connectivity oracle.
pub const MAX_ORACLE_POINTS: usize = 14;

/// `L_k` by sorting all distances from every point.
pub fn knn_link(points: &[Point], k: usize) -> f64 {
    let n = points.len();
    if k == 0 || n <= k {
        return 0.0;
    }
    let mut best = 0.0f64;
    for i in 0..n {
        let mut d: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| dist2(&points[i], &points[j]))
            .collect();
        d.sort_by(f64::total_cmp);
        best = best.max(d[k - 1]);
    }
    best.sqrt()
}

/// `ξ` by a double loop.
pub fn isolated_count(points: &[Point], r: f64, k: usize) -> usize {
    points
        .iter()
        .filter(|p| {
            points
                .iter()
                .filter(|q| within_radius(dist2(p, q), r))
                .count()
                <= k
        })
        .count()
}

fn adjacency(points: &[Point], r: f64) -> Vec<Vec<bool>> {
    let n = points.len();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            adj[i][j] = i != j && within_radius(dist2(&points[i], &points[j]), r);
        }
    }
    adj
}

fn connected_without(adj: &[Vec<bool>], removed: u32) -> bool {
    let n = adj.len();
    let alive: Vec<usize> = (0..n).filter(|&v| removed & (1 << v) == 0).collect();
    let Some(&start) = alive.first() else {
        return true;
    };
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &alive {
            if adj[v][w] && !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == alive.len()
}

/// k-connectivity by removing every vertex subset of size `<= k - 1`.
pub fn is_k_connected(points: &[Point], r: f64, k: usize) -> Result<bool> {
    let n = points.len();
    if n > MAX_ORACLE_POINTS {
        return Err(Error::TooManyPoints {
            max: MAX_ORACLE_POINTS,
            got: n,
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if n < k + 1 {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: n,
        });
    }
    let adj = adjacency(points, r);
    Ok((0u32..1 << n)
        .filter(|s| (s.count_ones() as usize) < k)
        .all(|s| connected_without(&adj, s)))
}

/// `M_k` by scanning the sorted pairwise distances upward.
pub fn connectivity_threshold(points: &[Point], k: usize) -> Result<f64> {
    let n = points.len();
    if n > MAX_ORACLE_POINTS {
        return Err(Error::TooManyPoints {
            max: MAX_ORACLE_POINTS,
            got: n,
        });
    }
    if n < k + 2 {
        return Err(Error::TooFewPoints {
            needed: k + 2,
            got: n,
        });
    }
    let mut dists: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            dists.push(dist2(&points[i], &points[j]).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    dists.dedup();
    for r in dists {
        if is_k_connected(points, r, k)? {
            return Ok(r);
        }
    }
    unreachable!("complete graph on k + 2 points is k-connected")
}
