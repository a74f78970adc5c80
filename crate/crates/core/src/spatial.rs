//! Uniform-grid spatial index for exact k-NN distances and closed-ball
//! counting.
//!
//! All comparisons are made on squared distances, so ties are exact and
//! every closed-ball predicate uses `<=`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::{dist2, Point};

/// Upper bound on grid cells per stored point; larger requests are coarsened.
const MAX_CELLS_PER_POINT: usize = 8;

/// A finite point configuration with its grid index.
#[derive(Clone, Debug)]
pub struct PointSet {
    points: Vec<Point>,
    dim: usize,
    grid: Grid,
}

#[derive(Clone, Debug)]
struct Grid {
    origin: Point,
    cell: f64,
    inv_cell: f64,
    dims: [usize; 3],
    /// CSR layout: points of cell `c` are `order[starts[c]..starts[c + 1]]`.
    starts: Vec<u32>,
    order: Vec<u32>,
    /// Coordinates laid out in `order`, so bucket scans read contiguously.
    sorted: Vec<Point>,
}

/// Default cell edge `0.7 ((log n) / n * volume)^(1/d)`, a little under the
/// connectivity scale so capped range counts touch few points.
pub fn default_cell_size(n: usize, dim: usize, volume: f64) -> f64 {
    let n = n.max(3) as f64;
    (n.ln() / n * volume).powf(1.0 / dim as f64) * 0.7
}

impl PointSet {
    /// Builds the index with an explicit cell edge length.
    pub fn build(points: Vec<Point>, dim: usize, cell_size: f64) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidArgument(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        if points
            .iter()
            .any(|p| p[..dim].iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        if points.len() >= u32::MAX as usize {
            return Err(Error::InvalidArgument("too many points".into()));
        }
        let points: Vec<Point> = points
            .into_iter()
            .map(|mut p| {
                if dim == 2 {
                    p[2] = 0.0;
                }
                p
            })
            .collect();
        let grid = Grid::new(&points, dim, cell_size);
        Ok(PointSet { points, dim, grid })
    }

    /// Builds the index with [`default_cell_size`] for a domain of the given
    /// volume.
    pub fn with_volume(points: Vec<Point>, dim: usize, volume: f64) -> Result<Self> {
        let h = default_cell_size(points.len(), dim, volume);
        Self::build(points, dim, h)
    }

    /// Builds the index sizing cells from the points' bounding box.
    pub fn new(points: Vec<Point>, dim: usize) -> Result<Self> {
        let mut vol = 1.0;
        for a in 0..dim {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[a]), hi.max(p[a]))
                });
            let ext = if hi > lo { hi - lo } else { 1.0 };
            vol *= ext;
        }
        Self::with_volume(points, dim, vol)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn cell_size(&self) -> f64 {
        self.grid.cell
    }

    /// Number of non-empty cells and mean occupancy over non-empty cells.
    pub fn occupancy(&self) -> (usize, f64) {
        let nonempty = self.grid.starts.windows(2).filter(|w| w[1] > w[0]).count();
        let mean = if nonempty == 0 {
            0.0
        } else {
            self.len() as f64 / nonempty as f64
        };
        (nonempty, mean)
    }

    /// Point ids grouped cell by cell; iterating queries in this order keeps
    /// neighbouring cells warm in cache.
    pub fn spatial_order(&self) -> &[u32] {
        &self.grid.order
    }

    /// Ids stored in the cell containing point `i`.
    pub fn cell_members_of(&self, i: usize) -> &[u32] {
        let c = self.grid.cell_index(&self.points[i]);
        self.grid.bucket(c)
    }

    /// Distance from point `i` to its `k`-th nearest other point.
    pub fn knn_distance(&self, i: usize, k: usize) -> Result<f64> {
        Ok(self.knn_distance_sq(i, k)?.sqrt())
    }

    /// Squared distance from point `i` to its `k`-th nearest other point.
    pub fn knn_distance_sq(&self, i: usize, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.len() < k + 1 {
            return Err(Error::TooFewPoints {
                needed: k + 1,
                got: self.len(),
            });
        }
        if i >= self.len() {
            return Err(Error::InvalidArgument(format!("point id {i} out of range")));
        }
        Ok(self.grid.knn_sq(&self.points[i], Some(i), k))
    }

    /// Number of points in the closed ball `B_r(x)`.
    pub fn count_within(&self, x: &Point, r: f64) -> usize {
        self.count_within_capped(x, r, usize::MAX)
    }

    /// [`count_within`](Self::count_within) that stops once the count
    /// exceeds `cap` (the result is then `cap + 1`).
    pub fn count_within_capped(&self, x: &Point, r: f64, cap: usize) -> usize {
        if !(r >= 0.0) {
            return 0;
        }
        let mut count = 0usize;
        self.grid.for_each_in_ball(x, widened_sq(r), |_, d2| {
            if within_radius(d2, r) {
                count += 1;
            }
            count <= cap
        });
        count
    }

    /// Like [`count_within`](Self::count_within) on a squared radius, but
    /// stops once the count exceeds `cap` (the result is then `cap + 1`).
    pub fn count_within_sq_capped(&self, x: &Point, r2: f64, cap: usize) -> usize {
        if r2 < 0.0 {
            return 0;
        }
        self.grid.count_within(x, r2, cap)
    }

    /// Calls `f(j, d2)` for every `j != i` with `|x_j - x_i|^2 <= r2`.
    pub fn for_each_neighbour(&self, i: usize, r2: f64, mut f: impl FnMut(usize, f64)) {
        let x = self.points[i];
        self.grid.for_each_in_ball(&x, r2, |j, d2| {
            if j != i {
                f(j, d2);
            }
            true
        });
    }

    /// All pairs `i < j` at squared distance `<= r2`, as `(i, j, d2)`.
    pub fn pairs_within_sq(&self, r2: f64) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            self.for_each_neighbour(i, r2, |j, d2| {
                if j > i {
                    out.push((i as u32, j as u32, d2));
                }
            });
        }
        out
    }

    /// Reads `x,y[,z]` rows with a header line.
    pub fn read_csv<R: Read>(reader: R) -> Result<(Vec<Point>, usize)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().collect();
        let dim = match names.as_slice() {
            ["x", "y"] => 2,
            ["x", "y", "z"] => 3,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "expected header x,y or x,y,z, got {}",
                    other.join(",")
                )))
            }
        };
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut p = [0.0; 3];
            for (a, field) in rec.iter().enumerate().take(dim) {
                p[a] = field.parse::<f64>().map_err(|e| {
                    Error::InvalidArgument(format!("bad coordinate {field:?}: {e}"))
                })?;
            }
            points.push(p);
        }
        Ok((points, dim))
    }

    /// Writes the points as CSV with 17 significant digits.
    pub fn write_csv<W: Write>(points: &[Point], dim: usize, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if dim == 3 {
            w.write_record(["x", "y", "z"])?;
        } else {
            w.write_record(["x", "y"])?;
        }
        for p in points {
            w.write_record(p[..dim].iter().map(|&c| fmt_sig17(c)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Closed-ball membership for a pair at squared distance `d2`: the pair
/// distance is the correctly rounded `sqrt(d2)`, so `within_radius(d2,
/// d2.sqrt())` always holds.
#[inline]
pub fn within_radius(d2: f64, r: f64) -> bool {
    let r2 = r * r;
    if d2 <= r2 * (1.0 - 4.0 * f64::EPSILON) {
        return true;
    }
    d2 <= r2 * (1.0 + 4.0 * f64::EPSILON) && d2.sqrt() <= r
}

/// Squared search radius that is safe to prefilter [`within_radius`] with.
#[inline]
pub(crate) fn widened_sq(r: f64) -> f64 {
    r * r * (1.0 + 4.0 * f64::EPSILON)
}

/// Formats with 17 significant digits (enough to round-trip any f64).
pub fn fmt_sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

impl Grid {
    fn new(points: &[Point], dim: usize, cell_size: f64) -> Self {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        if !points.is_empty() {
            lo = [f64::INFINITY; 3];
            hi = [f64::NEG_INFINITY; 3];
            for p in points {
                for a in 0..dim {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            for a in dim..3 {
                lo[a] = 0.0;
                hi[a] = 0.0;
            }
        }
        let cap = (points.len().max(1) * MAX_CELLS_PER_POINT).max(64);
        let mut cell = cell_size;
        let dims = loop {
            let mut dims = [1usize; 3];
            let mut total = 1.0f64;
            for a in 0..dim {
                let count = ((hi[a] - lo[a]) / cell).floor() + 1.0;
                total *= count;
                dims[a] = count.min(u32::MAX as f64) as usize;
            }
            if total <= cap as f64 {
                break dims;
            }
            cell *= 2.0;
        };
        let inv_cell = 1.0 / cell;
        let mut grid = Grid {
            origin: lo,
            cell,
            inv_cell,
            dims,
            starts: Vec::new(),
            order: Vec::new(),
            sorted: Vec::new(),
        };

        let ncells = dims[0] * dims[1] * dims[2];
        let cells: Vec<usize> = points.iter().map(|p| grid.cell_index(p)).collect();
        let mut starts = vec![0u32; ncells + 1];
        for &c in &cells {
            starts[c + 1] += 1;
        }
        for c in 0..ncells {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut order = vec![0u32; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid.sorted = order.iter().map(|&i| points[i as usize]).collect();
        grid.starts = starts;
        grid.order = order;
        grid
    }

    fn coord(&self, x: f64, axis: usize) -> usize {
        let c = ((x - self.origin[axis]) * self.inv_cell).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.dims[axis] - 1)
        }
    }

    fn coords(&self, x: &Point) -> [usize; 3] {
        [
            self.coord(x[0], 0),
            self.coord(x[1], 1),
            self.coord(x[2], 2),
        ]
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    fn cell_index(&self, x: &Point) -> usize {
        self.flat(self.coords(x))
    }

    fn bucket(&self, c: usize) -> &[u32] {
        &self.order[self.starts[c] as usize..self.starts[c + 1] as usize]
    }

    /// Visits points in the cells overlapping the ball's bounding box; the
    /// callback returns `false` to stop early.
    fn for_each_in_ball(&self, x: &Point, r2: f64, mut f: impl FnMut(usize, f64) -> bool) {
        if self.order.is_empty() {
            return;
        }
        let r = r2.sqrt();
        let lo = [
            self.coord(x[0] - r, 0),
            self.coord(x[1] - r, 1),
            self.coord(x[2] - r, 2),
        ];
        let hi = [
            self.coord(x[0] + r, 0),
            self.coord(x[1] + r, 1),
            self.coord(x[2] + r, 2),
        ];
        for cz in lo[2]..=hi[2] {
            for cy in lo[1]..=hi[1] {
                let row = (cz * self.dims[1] + cy) * self.dims[0];
                let start = self.starts[row + lo[0]] as usize;
                let end = self.starts[row + hi[0] + 1] as usize;
                for idx in start..end {
                    let d2 = dist2(x, &self.sorted[idx]);
                    if d2 <= r2 && !f(self.order[idx] as usize, d2) {
                        return;
                    }
                }
            }
        }
    }

    fn count_within(&self, x: &Point, r2: f64, cap: usize) -> usize {
        let mut count = 0usize;
        self.for_each_in_ball(x, r2, |_, _| {
            count += 1;
            count <= cap
        });
        count
    }

    /// Expanding-ring search for the `k`-th smallest squared distance from
    /// `x` to the stored points other than `skip`.
    fn knn_sq(&self, x: &Point, skip: Option<usize>, k: usize) -> f64 {
        let c = self.coords(x);
        // Sorted ascending, at most k entries.
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        let max_ring = self.dims.iter().copied().max().unwrap_or(1);
        for ring in 0..=max_ring {
            let lo: [usize; 3] = std::array::from_fn(|a| c[a].saturating_sub(ring));
            let hi: [usize; 3] = std::array::from_fn(|a| (c[a] + ring).min(self.dims[a] - 1));
            for cz in lo[2]..=hi[2] {
                for cy in lo[1]..=hi[1] {
                    let on_shell_yz = cz.abs_diff(c[2]) == ring || cy.abs_diff(c[1]) == ring;
                    for cx in lo[0]..=hi[0] {
                        if !on_shell_yz && cx.abs_diff(c[0]) != ring {
                            continue;
                        }
                        let cell = self.flat([cx, cy, cz]);
                        let range = self.starts[cell] as usize..self.starts[cell + 1] as usize;
                        for idx in range {
                            if Some(self.order[idx] as usize) == skip {
                                continue;
                            }
                            let d2 = dist2(x, &self.sorted[idx]);
                            if best.len() < k || d2 < best[k - 1] {
                                let pos = best.partition_point(|&b| b <= d2);
                                best.insert(pos, d2);
                                best.truncate(k);
                            }
                        }
                    }
                }
            }
            // Every unvisited cell is at Chebyshev ring > `ring`, hence at
            // distance > ring * cell from x along some axis.
            if best.len() == k {
                let reach = ring as f64 * self.cell;
                if best[k - 1] <= reach * reach {
                    break;
                }
            }
        }
        best[k - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pt2;

    fn square_corners() -> Vec<Point> {
        vec![pt2(0.0, 0.0), pt2(1.0, 0.0), pt2(1.0, 1.0), pt2(0.0, 1.0)]
    }

    #[test]
    fn build_stores_every_point_once() {
        let ps =
            PointSet::build(vec![pt2(0.0, 0.0), pt2(0.5, 0.5), pt2(1.0, 0.0)], 2, 0.3).unwrap();
        assert_eq!(ps.grid.order.len(), 3);
        let mut ids = ps.grid.order.clone();
        ids.sort();
        assert_eq!(ids, vec![0, 1, 2]);
        for i in 0..3 {
            assert!(ps.cell_members_of(i).contains(&(i as u32)));
        }
    }

    #[test]
    fn duplicates_are_indexed() {
        let ps = PointSet::build(vec![pt2(0.2, 0.2), pt2(0.2, 0.2)], 2, 1.0).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps.knn_distance(0, 1).unwrap(), 0.0);
        assert_eq!(ps.count_within(&pt2(0.2, 0.2), 0.0), 2);
    }

    #[test]
    fn knn_examples() {
        let line = vec![pt2(0.0, 0.0), pt2(1.0, 0.0), pt2(3.0, 0.0)];
        let ps = PointSet::build(line, 2, 0.7).unwrap();
        assert_eq!(ps.knn_distance(2, 1).unwrap(), 2.0);
        let ps = PointSet::build(square_corners(), 2, 0.25).unwrap();
        for i in 0..4 {
            assert_eq!(ps.knn_distance(i, 1).unwrap(), 1.0);
            assert_eq!(ps.knn_distance(i, 2).unwrap(), 1.0);
            assert!((ps.knn_distance(i, 3).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        }
        assert!(matches!(
            ps.knn_distance(0, 4),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn count_examples() {
        let ps = PointSet::build(square_corners(), 2, 0.4).unwrap();
        assert_eq!(ps.count_within(&pt2(0.0, 0.0), 1.0), 3);
        assert_eq!(ps.count_within(&pt2(1.0, 1.0), 0.0), 1);
        assert_eq!(ps.count_within(&pt2(0.5, 0.5), 0.8), 4);
        assert_eq!(ps.count_within(&pt2(5.0, 5.0), 1.0), 0);
        assert_eq!(ps.count_within_sq_capped(&pt2(0.5, 0.5), 1.0, 1), 2);
    }

    #[test]
    fn empty_set_queries() {
        let ps = PointSet::build(Vec::new(), 2, 1.0).unwrap();
        assert!(ps.is_empty());
        assert_eq!(ps.count_within(&pt2(0.0, 0.0), 1.0), 0);
        assert!(ps.knn_distance(0, 1).is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(PointSet::build(vec![pt2(0.0, 0.0)], 2, 0.0).is_err());
        assert!(PointSet::build(vec![pt2(0.0, 0.0)], 4, 1.0).is_err());
        assert!(PointSet::build(vec![pt2(f64::NAN, 0.0)], 2, 1.0).is_err());
    }

    #[test]
    fn tiny_cells_are_coarsened() {
        let pts = vec![pt2(0.0, 0.0), pt2(1000.0, 1000.0)];
        let ps = PointSet::build(pts, 2, 1e-9).unwrap();
        assert!(ps.grid.starts.len() <= 65);
        assert!((ps.knn_distance(0, 1).unwrap() - 1000.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let pts = vec![[0.1, 0.2, 0.3], [1.0 / 3.0, 2.0, -5e-300]];
        let mut buf = Vec::new();
        PointSet::write_csv(&pts, 3, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,z\n"));
        let (back, dim) = PointSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(dim, 3);
        assert_eq!(back, pts);
        assert!(PointSet::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(PointSet::read_csv("x,y\n1,zz\n".as_bytes()).is_err());
    }
}
