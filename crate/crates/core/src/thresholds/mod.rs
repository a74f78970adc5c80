//! Largest k-nearest-neighbour link `L_k`, k-connectivity threshold `M_k`,
//! the Euclidean MST longest edge and the count of k-isolated vertices.
//!
//! A pair's distance is the correctly rounded square root of its squared
//! distance; every threshold returned here is the square root of a realised
//! squared pairwise distance, so equal thresholds compare equal bit-for-bit.

pub mod graph;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{widened_sq, within_radius, PointSet};

pub use graph::Graph;

/// Growth factor applied to the squared search radius while looking for an
/// upper bracket of `M_k`.
const BRACKET_GROWTH_SQ: f64 = 1.5625;

/// `L_k`, `M_k` and whether they coincide, for one point set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub coincide: bool,
    pub k: usize,
    pub n_points: usize,
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidArgument("k must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Squared `L_k`: the largest squared k-NN distance, or 0 when `|X| <= k`.
pub fn largest_knn_link_sq(ps: &PointSet, k: usize) -> f64 {
    if k == 0 || ps.len() <= k {
        return 0.0;
    }
    // A point whose closed ball of the current best radius already holds
    // k + 1 points (itself included) cannot raise the maximum.
    let mut best = 0.0f64;
    for (pos, &i) in ps.spatial_order().iter().enumerate() {
        let i = i as usize;
        if pos > 0 && ps.count_within_sq_capped(ps.point(i), best, k) > k {
            continue;
        }
        let d2 = ps.knn_distance_sq(i, k).expect("size checked above");
        best = best.max(d2);
    }
    best
}

/// `L_k(X) = max_x (distance from x to its k-th nearest neighbour)`; 0 if
/// `|X| <= k`.
pub fn largest_knn_link(ps: &PointSet, k: usize) -> f64 {
    largest_knn_link_sq(ps, k).sqrt()
}

/// Number of points whose closed `r`-ball holds at most `k` points, itself
/// included (graph degree `<= k - 1`).
pub fn isolated_count(ps: &PointSet, r: f64, k: usize) -> usize {
    ps.spatial_order()
        .iter()
        .filter(|&&i| ps.count_within_capped(ps.point(i as usize), r, k) <= k)
        .count()
}

/// Geometric graph `G(X, r)` with closed-ball adjacency.
pub fn geometric_graph(ps: &PointSet, r: f64) -> Graph {
    let edges = ps
        .pairs_within_sq(widened_sq(r))
        .into_iter()
        .filter(|&(_, _, d2)| within_radius(d2, r))
        .map(|(i, j, _)| (i, j));
    Graph::from_edges(ps.len(), edges)
}

/// Whether `G(X, r)` is k-connected.
pub fn is_k_connected(ps: &PointSet, r: f64, k: usize) -> Result<bool> {
    check_k(k)?;
    if ps.len() < k + 1 {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: ps.len(),
        });
    }
    Ok(geometric_graph(ps, r).is_k_connected(k))
}

fn graph_upto(n: usize, sorted: &[(u32, u32, f64)], count: usize) -> Graph {
    Graph::from_edges(n, sorted[..count].iter().map(|&(i, j, _)| (i, j)))
}

/// Squared bounding-box diagonal; at this radius the graph is complete.
fn diameter_bound_sq(ps: &PointSet) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in ps.points() {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (0..3).map(|a| (hi[a] - lo[a]).powi(2)).sum::<f64>() * (1.0 + 8.0 * f64::EPSILON)
}

/// Smallest squared length `s` in `sorted` (ascending) such that
/// `pred(graph of edges <= s)`, given that `pred` holds for the full list.
fn first_true(n: usize, sorted: &[(u32, u32, f64)], mut pred: impl FnMut(&Graph) -> bool) -> f64 {
    // Distinct-value boundaries: candidate prefix lengths end at the last
    // edge of each distinct squared length.
    let mut ends: Vec<usize> = Vec::new();
    for idx in 0..sorted.len() {
        if idx + 1 == sorted.len() || sorted[idx + 1].2 != sorted[idx].2 {
            ends.push(idx + 1);
        }
    }
    let (mut lo, mut hi) = (0usize, ends.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(&graph_upto(n, sorted, ends[mid])) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    sorted[ends[lo] - 1].2
}

/// `M_k(X) = inf{r : G(X, r) is k-connected}`.
///
/// Starts from `L_k <= M_k`; if the graph is not yet k-connected there, an
/// upper bracket is found by growing the radius, and the threshold is
/// located by binary search over the realised pairwise distances inside the
/// bracket.
pub fn k_connectivity_threshold(ps: &PointSet, k: usize) -> Result<f64> {
    Ok(k_connectivity_threshold_sq(ps, k)?.sqrt())
}

fn k_connectivity_threshold_sq(ps: &PointSet, k: usize) -> Result<f64> {
    check_k(k)?;
    threshold_sq_from(ps, k, largest_knn_link_sq(ps, k))
}

/// `M_k^2` given `l2 = L_k^2`.
fn threshold_sq_from(ps: &PointSet, k: usize, l2: f64) -> Result<f64> {
    let n = ps.len();
    if n < k + 2 {
        return Err(Error::TooFewPoints {
            needed: k + 2,
            got: n,
        });
    }

    if k == 1 {
        return Ok(mst_longest_sq_from(ps, l2));
    }
    let base = ps.pairs_within_sq(l2);
    if Graph::from_edges(n, base.iter().map(|&(i, j, _)| (i, j))).is_k_connected(k) {
        return Ok(l2);
    }
    let cap = diameter_bound_sq(ps);
    let mut upper = if l2 > 0.0 { l2 } else { cap * 1e-12 };
    let mut edges;
    loop {
        upper = (upper * BRACKET_GROWTH_SQ).min(cap);
        edges = ps.pairs_within_sq(upper);
        let done = upper >= cap
            || Graph::from_edges(n, edges.iter().map(|&(i, j, _)| (i, j))).is_k_connected(k);
        if done {
            break;
        }
    }
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));
    Ok(first_true(n, &edges, |g| g.is_k_connected(k)))
}

/// Longest edge of a Euclidean minimum spanning tree.
///
/// Kruskal over the candidate edges of length at most `U`, where `U` starts
/// at `L_1` and doubles until the candidate graph spans; by the cut property
/// the MST of the candidates is then a Euclidean MST.
pub fn longest_mst_edge(ps: &PointSet) -> Result<f64> {
    let n = ps.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    Ok(mst_longest_sq_from(ps, largest_knn_link_sq(ps, 1)).sqrt())
}

/// Squared longest MST edge, with candidate radius starting at `start2`
/// (at most `M_1^2`, typically `L_1^2`).
fn mst_longest_sq_from(ps: &PointSet, start2: f64) -> f64 {
    let n = ps.len();
    let cap = diameter_bound_sq(ps);
    let mut upper = if start2 > 0.0 { start2 } else { cap * 1e-12 };
    loop {
        let mut edges = ps.pairs_within_sq(upper);
        edges.sort_by(|a, b| a.2.total_cmp(&b.2));
        let mut dsu = DisjointSets::new(n);
        let mut components = n;
        for &(i, j, d2) in &edges {
            if dsu.union(i as usize, j as usize) {
                components -= 1;
                if components == 1 {
                    return d2;
                }
            }
        }
        assert!(upper < cap, "complete candidate graph must span");
        upper = (upper * 4.0).min(cap);
    }
}

/// `L_k`, `M_k` and their coincidence.
pub fn thresholds(ps: &PointSet, k: usize) -> Result<ThresholdResult> {
    check_k(k)?;
    let l2 = largest_knn_link_sq(ps, k);
    let m2 = threshold_sq_from(ps, k, l2)?;
    Ok(ThresholdResult {
        l: l2.sqrt(),
        m: m2.sqrt(),
        coincide: l2 == m2,
        k,
        n_points: ps.len(),
    })
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}
