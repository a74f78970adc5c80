//! Exact geometry of the supported domains: the disk, the 3-ball and convex
//! polygons.
//!
//! Points are stored as `[f64; 3]`; planar domains ignore the third
//! coordinate and always produce points with `z = 0`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Planar point helper.
pub const fn pt2(x: f64, y: f64) -> Point {
    [x, y, 0.0]
}

const CONTAINS_EPS: f64 = 1e-12;

/// A compact region `A` of the plane or of 3-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRepr", into = "DomainRepr")]
pub enum Domain {
    /// Disk of the given radius centred at the origin.
    Disk { radius: f64 },
    /// Ball in R^3 of the given radius centred at the origin.
    Ball3 { radius: f64 },
    /// Strictly convex polygon, vertices counter-clockwise.
    Polygon(ConvexPolygon),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum DomainRepr {
    Disk { radius: f64 },
    Ball3 { radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl TryFrom<DomainRepr> for Domain {
    type Error = Error;

    fn try_from(repr: DomainRepr) -> Result<Self> {
        match repr {
            DomainRepr::Disk { radius } => Domain::disk(radius),
            DomainRepr::Ball3 { radius } => Domain::ball3(radius),
            DomainRepr::Polygon { vertices } => Domain::polygon(vertices),
        }
    }
}

impl From<Domain> for DomainRepr {
    fn from(domain: Domain) -> Self {
        match domain {
            Domain::Disk { radius } => DomainRepr::Disk { radius },
            Domain::Ball3 { radius } => DomainRepr::Ball3 { radius },
            Domain::Polygon(p) => DomainRepr::Polygon {
                vertices: p.vertices,
            },
        }
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius.is_finite() && radius > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDomain(format!(
            "radius must be positive, got {radius}"
        )))
    }
}

impl Domain {
    pub fn disk(radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Domain::Disk { radius })
    }

    pub fn ball3(radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Domain::Ball3 { radius })
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        ConvexPolygon::new(vertices).map(Domain::Polygon)
    }

    pub fn unit_square() -> Self {
        Domain::Polygon(ConvexPolygon {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball3 { .. } => 3,
            _ => 2,
        }
    }

    /// Lebesgue measure `|A|`.
    pub fn volume(&self) -> f64 {
        match self {
            Domain::Disk { radius } => PI * radius * radius,
            Domain::Ball3 { radius } => 4.0 / 3.0 * PI * radius.powi(3),
            Domain::Polygon(p) => p.area(),
        }
    }

    /// Boundary measure `|∂A|`.
    pub fn perimeter(&self) -> f64 {
        match self {
            Domain::Disk { radius } => 2.0 * PI * radius,
            Domain::Ball3 { radius } => 4.0 * PI * radius * radius,
            Domain::Polygon(p) => p.perimeter(),
        }
    }

    /// Isoperimetric ratio `|∂A| / |A|^(1 - 1/d)`.
    pub fn isoperimetric_sigma(&self) -> f64 {
        let d = self.dim() as f64;
        self.perimeter() / self.volume().powf(1.0 - 1.0 / d)
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Disk { radius } | Domain::Ball3 { radius } => 2.0 * radius,
            Domain::Polygon(p) => p.diameter(),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Domain::Disk { radius } => ([-radius, -radius, 0.0], [*radius, *radius, 0.0]),
            Domain::Ball3 { radius } => ([-radius; 3], [*radius; 3]),
            Domain::Polygon(p) => {
                let mut lo = [f64::INFINITY, f64::INFINITY, 0.0];
                let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0];
                for v in &p.vertices {
                    for a in 0..2 {
                        lo[a] = lo[a].min(v[a]);
                        hi[a] = hi[a].max(v[a]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Closed-set membership.
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Domain::Disk { radius } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                r2 <= radius * radius * (1.0 + CONTAINS_EPS)
            }
            Domain::Ball3 { radius } => norm2(x) <= radius * radius * (1.0 + CONTAINS_EPS),
            Domain::Polygon(p) => p.contains([x[0], x[1]]),
        }
    }

    /// Euclidean distance from `x ∈ A` to `∂A`.
    pub fn dist_to_boundary(&self, x: &Point) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutsideDomain(x[..self.dim()].to_vec()));
        }
        Ok(match self {
            Domain::Disk { radius } => (radius - x[0].hypot(x[1])).max(0.0),
            Domain::Ball3 { radius } => (radius - norm2(x).sqrt()).max(0.0),
            Domain::Polygon(p) => p.dist_to_boundary([x[0], x[1]]),
        })
    }

    /// Lebesgue measure of `B_r(x) ∩ A` for a centre `x ∈ A`.
    pub fn ball_intersection_measure(&self, x: &Point, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self {
            Domain::Disk { radius } => disk_lens_area(*radius, x[0].hypot(x[1]), r),
            Domain::Ball3 { radius } => ball_lens_volume(*radius, norm2(x).sqrt(), r),
            Domain::Polygon(p) => p.circle_intersection_area([x[0], x[1]], r),
        }
    }

    /// Uniform sample from `A`.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Domain::Disk { radius } => {
                let rho = radius * rng.gen::<f64>().sqrt();
                let phi = 2.0 * PI * rng.gen::<f64>();
                [rho * phi.cos(), rho * phi.sin(), 0.0]
            }
            Domain::Ball3 { radius } => {
                let rho = radius * rng.gen::<f64>().cbrt();
                let z = 2.0 * rng.gen::<f64>() - 1.0;
                let phi = 2.0 * PI * rng.gen::<f64>();
                let s = (1.0 - z * z).max(0.0).sqrt();
                [rho * s * phi.cos(), rho * s * phi.sin(), rho * z]
            }
            Domain::Polygon(p) => {
                let q = p.sample_uniform(rng);
                [q[0], q[1], 0.0]
            }
        }
    }

    /// Smallest ratio `|B_r(x) ∩ A| / r^d` over `x ∈ A` as `r → 0`: half a
    /// ball for smooth boundaries, the sharpest corner sector for polygons.
    pub fn min_ball_fraction(&self) -> f64 {
        match self {
            Domain::Disk { .. } => PI / 2.0,
            Domain::Ball3 { .. } => 2.0 * PI / 3.0,
            Domain::Polygon(p) => {
                let min_angle = p.interior_angles().into_iter().fold(PI, f64::min);
                min_angle / 2.0
            }
        }
    }
}

pub(crate) fn norm2(x: &Point) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
}

/// Squared Euclidean distance (unused coordinates are zero).
pub fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Area of `B_r(c) ∩ B_R(o)` where `|c| = s ≤ R`.
pub fn disk_lens_area(big: f64, s: f64, r: f64) -> f64 {
    if s + r <= big {
        return PI * r * r;
    }
    if s + big <= r {
        return PI * big * big;
    }
    let ca = ((s * s + r * r - big * big) / (2.0 * s * r)).clamp(-1.0, 1.0);
    let cb = ((s * s + big * big - r * r) / (2.0 * s * big)).clamp(-1.0, 1.0);
    let k = (-s + r + big) * (s + r - big) * (s - r + big) * (s + r + big);
    r * r * ca.acos() + big * big * cb.acos() - 0.5 * k.max(0.0).sqrt()
}

/// Volume of `B_r(c) ∩ B_R(o)` in R^3 where `|c| = s ≤ R`.
pub fn ball_lens_volume(big: f64, s: f64, r: f64) -> f64 {
    if s + r <= big {
        return 4.0 / 3.0 * PI * r.powi(3);
    }
    if s + big <= r {
        return 4.0 / 3.0 * PI * big.powi(3);
    }
    // Radical plane at distance `a` from the domain centre along the axis.
    let a = (s * s + big * big - r * r) / (2.0 * s);
    let h_big = big - a;
    let h_small = r - (s - a);
    cap_volume(big, h_big) + cap_volume(r, h_small)
}

fn cap_volume(radius: f64, h: f64) -> f64 {
    let h = h.clamp(0.0, 2.0 * radius);
    PI * h * h * (3.0 * radius - h) / 3.0
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// A strictly convex polygon with counter-clockwise vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidDomain(format!(
                "polygon needs at least 3 vertices, got {n}"
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDomain("non-finite vertex".into()));
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(sub(b, a), sub(c, b)) <= 0.0 {
                return Err(Error::InvalidDomain(format!(
                    "vertices must be strictly convex and counter-clockwise (turn at vertex {})",
                    (i + 1) % n
                )));
            }
        }
        let p = ConvexPolygon { vertices };
        // A star-shaped-but-winding polygon passes the local test; reject
        // anything whose turning number is not one.
        let turning: f64 = p.interior_angles().iter().map(|a| PI - a).sum();
        if (turning - 2.0 * PI).abs() > 1e-9 {
            return Err(Error::InvalidDomain("polygon winds more than once".into()));
        }
        Ok(p)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| cross(a, b)).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges()
            .map(|(a, b)| (b[0] - a[0]).hypot(b[1] - a[1]))
            .sum()
    }

    pub fn diameter(&self) -> f64 {
        let v = &self.vertices;
        let mut best = 0.0f64;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                best = best.max((v[i][0] - v[j][0]).hypot(v[i][1] - v[j][1]));
            }
        }
        best
    }

    /// Interior angle at each vertex, in `(0, π)`.
    pub fn interior_angles(&self) -> Vec<f64> {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let prev = v[(i + n - 1) % n];
                let next = v[(i + 1) % n];
                let e_in = sub(v[i], prev);
                let e_out = sub(next, v[i]);
                let turn = cross(e_in, e_out).atan2(e_in[0] * e_out[0] + e_in[1] * e_out[1]);
                PI - turn
            })
            .collect()
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.edges().all(|(a, b)| {
            let e = sub(b, a);
            let len = e[0].hypot(e[1]);
            cross(e, sub(x, a)) >= -CONTAINS_EPS * len.max(1.0)
        })
    }

    pub fn dist_to_boundary(&self, x: [f64; 2]) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(x, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Area of `B_r(c) ∩ P`, assuming `c ∈ P`.
    ///
    /// Sums the signed areas `B_r(c) ∩ triangle(c, a, b)` over the edges
    /// `(a, b)`; each triangle is split at the circle crossings into straight
    /// pieces (inside) and circular sectors (outside).
    pub fn circle_intersection_area(&self, c: [f64; 2], r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let total: f64 = self
            .edges()
            .map(|(a, b)| triangle_circle_area(sub(a, c), sub(b, c), r))
            .sum();
        total.clamp(0.0, (PI * r * r).min(self.area()))
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let v = &self.vertices;
        let total = self.area();
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut tri = v.len() - 2;
        for i in 1..v.len() - 1 {
            acc += 0.5 * cross(sub(v[i], v[0]), sub(v[i + 1], v[0]));
            if target < acc {
                tri = i;
                break;
            }
        }
        let tri = tri.min(v.len() - 2).max(1);
        let (a, b, c) = (v[0], v[tri], v[tri + 1]);
        let mut u = rng.gen::<f64>();
        let mut w = rng.gen::<f64>();
        if u + w > 1.0 {
            u = 1.0 - u;
            w = 1.0 - w;
        }
        [
            a[0] + u * (b[0] - a[0]) + w * (c[0] - a[0]),
            a[1] + u * (b[1] - a[1]) + w * (c[1] - a[1]),
        ]
    }
}

pub(crate) fn point_segment_distance(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let e = sub(b, a);
    let len2 = e[0] * e[0] + e[1] * e[1];
    let t = if len2 > 0.0 {
        (((x[0] - a[0]) * e[0] + (x[1] - a[1]) * e[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let p = [a[0] + t * e[0], a[1] + t * e[1]];
    (x[0] - p[0]).hypot(x[1] - p[1])
}

/// Signed area of `B_r(o) ∩ triangle(o, a, b)`.
fn triangle_circle_area(a: [f64; 2], b: [f64; 2], r: f64) -> f64 {
    let r2 = r * r;
    let d = sub(b, a);
    // |a + t d|^2 = r^2
    let qa = d[0] * d[0] + d[1] * d[1];
    let qb = 2.0 * (a[0] * d[0] + a[1] * d[1]);
    let qc = a[0] * a[0] + a[1] * a[1] - r2;
    let mut cuts = [0.0; 4];
    let mut m = 0;
    cuts[m] = 0.0;
    m += 1;
    if qa > 0.0 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc > 0.0 {
            let sq = disc.sqrt();
            // Numerically stable roots.
            let q = -0.5 * (qb + qb.signum() * sq);
            let (mut t1, mut t2) = if q != 0.0 {
                (q / qa, qc / q)
            } else {
                (0.0, 0.0)
            };
            if t1 > t2 {
                std::mem::swap(&mut t1, &mut t2);
            }
            for t in [t1, t2] {
                if t > 0.0 && t < 1.0 {
                    cuts[m] = t;
                    m += 1;
                }
            }
        }
    }
    cuts[m] = 1.0;
    m += 1;

    let at = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
    let mut area = 0.0;
    for w in cuts[..m].windows(2) {
        let (p, q) = (at(w[0]), at(w[1]));
        let mid = at(0.5 * (w[0] + w[1]));
        if mid[0] * mid[0] + mid[1] * mid[1] <= r2 {
            area += 0.5 * cross(p, q);
        } else {
            let angle = cross(p, q).atan2(p[0] * q[0] + p[1] * q[1]);
            area += 0.5 * r2 * angle;
        }
    }
    area
}
