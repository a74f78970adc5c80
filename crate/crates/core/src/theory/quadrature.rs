//! `E[ξ_{n,r}] = n ∫_A p_{n,r}(x) ν(dx)` by boundary-layer quadrature, and
//! its root `r_n(β)`.
//!
//! The integrand is constant (uniform case) or smooth away from `∂A`, and
//! decays like `exp(-c n s r^{d-1})` in the distance `s` to the boundary.
//! The layer `s ∈ [0, r]` is cut into geometric shells `r 2^{-j}` and graded
//! towards `s = r` as well, where `ν(B_r(x))` has a `(r - s)^{3/2}` kink.
//! All breakpoints scale with `r`, so the computed expectation is a
//! continuous function of `r` and bisection can hit tight tolerances.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::unit_ball_volume;
use crate::density::{Density, DensitySpec};
use crate::error::{Error, Result};
use crate::geometry::{ball_lens_volume, disk_lens_area, norm2, ConvexPolygon, Domain, Point};

/// Absolute tolerance of [`solve_rn`] on `E[ξ] - e^{-β}`.
pub const SOLVE_TOL: f64 = 1e-9;

/// Shells at depths `r 2^{-j}`, `j = 0..=SHELLS`.
const SHELLS: i32 = 20;
/// Shells at `r (1 - 2^{-j})`, `j = 1..=INNER_GRADING`.
const INNER_GRADING: i32 = 8;
const NODES: usize = 12;
const MASS_NODES: usize = 24;
const INTERIOR_PANELS: usize = 16;
const FAN_PANELS: usize = 16;
const MAX_BISECTIONS: usize = 200;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `m`-point rule; nodes by Newton iteration on `P_m`.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "need at least one node");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mf = m as f64;
        for i in 0..m.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(m, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_a^b f`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }

    /// `∫_a^b f` after the substitution `t = a + (b - a)(3u^2 - 2u^3)`,
    /// which flattens algebraic endpoint singularities.
    pub fn integrate_graded(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let u = 0.5 * (1.0 + x);
            let t = a + h * u * u * (3.0 - 2.0 * u);
            sum += w * f(t) * 6.0 * u * (1.0 - u);
        }
        0.5 * sum * h
    }
}

/// `(P_m(x), P_m'(x))`.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    (p1, m as f64 * (x * p1 - p0) / (x * x - 1.0))
}

pub fn gauss_legendre(m: usize) -> GaussLegendre {
    GaussLegendre::new(m)
}

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NODES))
}

fn mass_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(MASS_NODES))
}

/// `p = P[Po(λ) <= k - 1] = Σ_{j<k} λ^j e^{-λ} / j!`.
pub fn isolated_probability(lambda: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if lambda <= 0.0 {
        return 1.0;
    }
    let ln = lambda.ln();
    let mut log_term = -lambda;
    let mut sum = 0.0;
    for j in 0..k {
        if j > 0 {
            log_term += ln - (j as f64).ln();
        }
        sum += log_term.exp();
    }
    sum.min(1.0)
}

/// `ν(B_r(x)) = ∫_{B_r(x) ∩ A} f`.
pub fn ball_mass(density: &Density, x: &Point, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    match (density.spec(), density.domain()) {
        (DensitySpec::Radial { c0, c2 }, Domain::Disk { radius } | Domain::Ball3 { radius }) => {
            radial_ball_mass(density.domain().dim(), *radius, norm2(x).sqrt(), r, c0, c2)
        }
        _ => density.f0() * density.domain().ball_intersection_measure(x, r),
    }
}

/// Mass of `B_r(x) ∩ B_R(o)` under `c0 + c2 |y|^2`, `|x| = s`.
fn radial_ball_mass(d: usize, big: f64, s: f64, r: f64, c0: f64, c2: f64) -> f64 {
    if s + r <= big {
        let theta_rd = unit_ball_volume(d) * r.powi(d as i32);
        let df = d as f64;
        return theta_rd * (c0 + c2 * s * s) + c2 * df / (df + 2.0) * theta_rd * r * r;
    }
    let lens = if d == 3 {
        ball_lens_volume(big, s, r)
    } else {
        disk_lens_area(big, s, r)
    };
    if c2 == 0.0 {
        return c0 * lens;
    }
    c0 * lens + c2 * second_moment(d, big, s, r)
}

/// `∫_{B_r(x) ∩ B_R(o)} |y|^2 dy` by shells `|y| = ρ`.
fn second_moment(d: usize, big: f64, s: f64, r: f64) -> f64 {
    let full = (r - s).min(big).max(0.0);
    let mut j = if d == 3 {
        4.0 * PI * full.powi(5) / 5.0
    } else {
        PI / 2.0 * full.powi(4)
    };
    let lo = (s - r).abs();
    let hi = (s + r).min(big);
    if s > 0.0 && hi > lo {
        j += mass_rule().integrate_graded(lo, hi, |rho| rho * rho * shell_measure(d, rho, s, r));
    }
    j
}

/// Measure of `{|y| = ρ} ∩ B_r(x)` with `|x| = s > 0`.
fn shell_measure(d: usize, rho: f64, s: f64, r: f64) -> f64 {
    if d == 3 {
        let h = (r * r - (rho - s) * (rho - s)) / (2.0 * s);
        2.0 * PI * rho * h.clamp(0.0, 2.0 * rho)
    } else {
        let c = ((rho * rho + s * s - r * r) / (2.0 * rho * s)).clamp(-1.0, 1.0);
        2.0 * rho * c.acos()
    }
}

/// Sorted breakpoints in `[0, upper]` for a boundary layer of width `r`.
fn layer_breaks(r: f64, upper: f64, extra: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0, upper];
    for j in 0..=SHELLS {
        b.push(r * 2f64.powi(-j));
    }
    for j in 1..=INNER_GRADING {
        b.push(r * (1.0 - 2f64.powi(-j)));
    }
    b.extend_from_slice(extra);
    b.retain(|t| (0.0..=upper).contains(t));
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

fn sum_pieces(breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    breaks
        .windows(2)
        .map(|w| rule().integrate_graded(w[0], w[1], &mut f))
        .sum()
}

/// `∫_{dist(x, ∂A) >= r} p_{n,r}(x) f(x) dx` by quadrature, without the
/// leading factor `n`.
///
/// Disks and balls integrate the radial profile with composite
/// Gauss–Legendre; polygons clip the half-planes `dist(x, edge) >= r`.
pub fn interior_contribution(density: &Density, n: f64, r: f64, k: usize) -> f64 {
    match density.domain() {
        Domain::Disk { radius } | Domain::Ball3 { radius } => {
            let d = density.domain().dim();
            let depth = radius - r;
            if depth <= 0.0 {
                return 0.0;
            }
            let profile = radial_profile(density, d, *radius, n, r, k);
            let h = depth / INTERIOR_PANELS as f64;
            (0..INTERIOR_PANELS)
                .map(|i| rule().integrate(i as f64 * h, (i + 1) as f64 * h, &profile))
                .sum()
        }
        Domain::Polygon(p) => {
            let nu = density.f0() * PI * r * r;
            density.f0() * isolated_probability(n * nu, k) * inner_region_area(p, r)
        }
    }
}

/// `s ↦ p(n ν(B_r(x))) f(x) |S^{d-1}| s^{d-1}` for `|x| = s`.
fn radial_profile(
    density: &Density,
    d: usize,
    big: f64,
    n: f64,
    r: f64,
    k: usize,
) -> impl Fn(f64) -> f64 {
    let (c0, c2) = match density.spec() {
        DensitySpec::Radial { c0, c2 } => (c0, c2),
        DensitySpec::Uniform {} => (density.f0(), 0.0),
    };
    let sphere = d as f64 * unit_ball_volume(d);
    move |s| {
        let nu = radial_ball_mass(d, big, s, r, c0, c2);
        isolated_probability(n * nu, k) * (c0 + c2 * s * s) * sphere * s.powi(d as i32 - 1)
    }
}

/// `E[ξ_{n,r}] = n ∫_A p_{n,r}(x) ν(dx)` for a Poisson process of intensity
/// `n f`.
pub fn expected_isolated(density: &Density, n: f64, r: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if r <= 0.0 {
        return n;
    }
    let integral = match density.domain() {
        Domain::Disk { radius } | Domain::Ball3 { radius } => {
            radial_expectation(density, *radius, n, r, k)
        }
        Domain::Polygon(p) => polygon_expectation(p, density.f0(), n, r, k),
    };
    n * integral
}

fn radial_expectation(density: &Density, big: f64, n: f64, r: f64, k: usize) -> f64 {
    let d = density.domain().dim();
    let interior = if density.is_uniform() && big > r {
        let f0 = density.f0();
        let theta = unit_ball_volume(d);
        let nu = f0 * theta * r.powi(d as i32);
        isolated_probability(n * nu, k) * f0 * theta * (big - r).powi(d as i32)
    } else {
        interior_contribution(density, n, r, k)
    };
    let profile = radial_profile(density, d, big, n, r, k);
    let upper = r.min(big);
    // The ball swallows the domain once s + R <= r.
    let breaks = layer_breaks(r, upper, &[2.0 * big - r]);
    interior + sum_pieces(&breaks, |t| profile(big - t))
}

/// Per-edge frame: origin, unit tangent, inward normal, length and the
/// cotangents of the half angles at both ends.
struct EdgeFrame {
    origin: [f64; 2],
    tangent: [f64; 2],
    normal: [f64; 2],
    len: f64,
    cot_start: f64,
    cot_end: f64,
}

impl EdgeFrame {
    fn at(&self, t: f64, s: f64) -> [f64; 2] {
        [
            self.origin[0] + t * self.tangent[0] + s * self.normal[0],
            self.origin[1] + t * self.tangent[1] + s * self.normal[1],
        ]
    }

    fn coords(&self, x: [f64; 2]) -> (f64, f64) {
        let dx = [x[0] - self.origin[0], x[1] - self.origin[1]];
        (
            dx[0] * self.tangent[0] + dx[1] * self.tangent[1],
            dx[0] * self.normal[0] + dx[1] * self.normal[1],
        )
    }
}

fn edge_frames(p: &ConvexPolygon) -> Vec<EdgeFrame> {
    let v = p.vertices();
    let m = v.len();
    let angles = p.interior_angles();
    (0..m)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % m]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let tangent = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
            EdgeFrame {
                origin: a,
                tangent,
                normal: [-tangent[1], tangent[0]],
                len,
                cot_start: 1.0 / (angles[i] / 2.0).tan(),
                cot_end: 1.0 / (angles[(i + 1) % m] / 2.0).tan(),
            }
        })
        .collect()
}

/// Area of `{x ∈ P : dist(x, ∂P) >= r}` by clipping `P` with the inward
/// offset half-planes of its edges.
fn inner_region_area(p: &ConvexPolygon, r: f64) -> f64 {
    let mut poly: Vec<[f64; 2]> = p.vertices().to_vec();
    for f in edge_frames(p) {
        let side = |x: [f64; 2]| f.coords(x).1 - r;
        let mut next = Vec::with_capacity(poly.len() + 1);
        for i in 0..poly.len() {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            let (sa, sb) = (side(a), side(b));
            if sa >= 0.0 {
                next.push(a);
            }
            if (sa >= 0.0) != (sb >= 0.0) {
                let t = sa / (sa - sb);
                next.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        poly = next;
        if poly.len() < 3 {
            return 0.0;
        }
    }
    let m = poly.len();
    0.5 * (0..m)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % m]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

fn polygon_expectation(p: &ConvexPolygon, f0: f64, n: f64, r: f64, k: usize) -> f64 {
    let frames = edge_frames(p);
    let collapsed = frames.iter().any(|f| f.len < r * (f.cot_start + f.cot_end));
    let g = |x: [f64; 2]| isolated_probability(n * f0 * p.circle_intersection_area(x, r), k);
    if collapsed {
        return f0 * fan_integral(p, g);
    }
    let cot_sum: f64 = frames.iter().map(|f| f.cot_start).sum();
    let inner = p.area() - p.perimeter() * r + r * r * cot_sum;
    let p_inner = isolated_probability(n * f0 * PI * r * r, k);
    let layer: f64 = frames.iter().map(|f| edge_layer(p, f, r, &g)).sum();
    f0 * (p_inner * inner.max(0.0) + layer)
}

/// Integral of `g` over the trapezoid of points within `r` of the edge and
/// closer to it than to any other edge.
fn edge_layer(p: &ConvexPolygon, f: &EdgeFrame, r: f64, g: &impl Fn([f64; 2]) -> f64) -> f64 {
    let verts: Vec<(f64, f64)> = p.vertices().iter().map(|&v| f.coords(v)).collect();
    // Other edge lines `dist_j(x(t, s)) = c + m t + q s`.
    let lines: Vec<(f64, f64, f64)> = edge_frames(p)
        .iter()
        .filter(|o| o.origin != f.origin)
        .map(|o| {
            let c = o.coords(f.origin).1;
            let m = f.tangent[0] * o.normal[0] + f.tangent[1] * o.normal[1];
            let q = f.normal[0] * o.normal[0] + f.normal[1] * o.normal[1];
            (c, m, q)
        })
        .collect();
    let extra: Vec<f64> = verts.iter().flat_map(|&(_, sv)| [sv - r, sv + r]).collect();
    let s_breaks = layer_breaks(r, r, &extra);
    let mut t_breaks = Vec::new();
    sum_pieces(&s_breaks, |s| {
        let (a, b) = (s * f.cot_start, f.len - s * f.cot_end);
        if b <= a {
            return 0.0;
        }
        t_breaks.clear();
        t_breaks.extend([a, b]);
        for &(tv, sv) in &verts {
            let h2 = r * r - (s - sv) * (s - sv);
            if h2 > 0.0 {
                let h = h2.sqrt();
                t_breaks.extend([tv - h, tv + h]);
            }
        }
        for &(c, m, q) in &lines {
            if m.abs() > 1e-14 {
                t_breaks.push((r - c - q * s) / m);
            }
        }
        t_breaks.retain(|t| (a..=b).contains(t));
        t_breaks.sort_by(f64::total_cmp);
        t_breaks.dedup();
        sum_pieces(&t_breaks, |t| g(f.at(t, s)))
    })
}

/// Fallback for large `r`: centroid fan with the Duffy map on each
/// triangle and composite graded Gauss–Legendre.
fn fan_integral(p: &ConvexPolygon, g: impl Fn([f64; 2]) -> f64) -> f64 {
    let v = p.vertices();
    let m = v.len();
    let c = v.iter().fold([0.0, 0.0], |acc, x| {
        [acc[0] + x[0] / m as f64, acc[1] + x[1] / m as f64]
    });
    let h = 1.0 / FAN_PANELS as f64;
    let mut total = 0.0;
    for i in 0..m {
        let (a, b) = (v[i], v[(i + 1) % m]);
        let ea = [a[0] - c[0], a[1] - c[1]];
        let eb = [b[0] - a[0], b[1] - a[1]];
        let jac = (ea[0] * eb[1] - ea[1] * eb[0]).abs();
        for pu in 0..FAN_PANELS {
            for pw in 0..FAN_PANELS {
                let (u0, w0) = (pu as f64 * h, pw as f64 * h);
                total += rule().integrate_graded(u0, u0 + h, |u| {
                    u * jac
                        * rule().integrate_graded(w0, w0 + h, |w| {
                            g([
                                c[0] + u * (ea[0] + w * eb[0]),
                                c[1] + u * (ea[1] + w * eb[1]),
                            ])
                        })
                });
            }
        }
    }
    total
}

/// The unique `r` with `E[ξ_{n,r}] = e^{-β}`, by bisection.
///
/// The upper end starts at `(C log n / n)^{1/d}` with `C = 2/δ_0`, where
/// `2 δ_0 r^d <= ν(B_r(x))` for small `r`, and doubles up to the domain
/// diameter if needed.
pub fn solve_rn(density: &Density, n: f64, k: usize, beta: f64) -> Result<f64> {
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "n must be positive and finite, got {n}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "beta must be finite, got {beta}"
        )));
    }
    let target = (-beta).exp();
    if n <= target {
        return Err(Error::NoBracket(format!(
            "E[ξ] at r = 0 is n = {n} <= e^-β = {target}"
        )));
    }
    let domain = density.domain();
    let d = domain.dim() as f64;
    let diam = domain.diameter();
    let delta0 = 0.5 * density.f0() * domain.min_ball_fraction();
    let guess = if n > 1.0 {
        (2.0 / delta0 * n.ln() / n).powf(1.0 / d)
    } else {
        diam
    };
    let mut hi = guess.min(diam);
    let mut e_hi = expected_isolated(density, n, hi, k);
    while e_hi > target {
        if hi >= diam {
            return Err(Error::NoBracket(format!(
                "E[ξ] never drops below e^-β = {target}: n P[Po(n) <= k-1] = {e_hi}"
            )));
        }
        hi = (2.0 * hi).min(diam);
        e_hi = expected_isolated(density, n, hi, k);
    }
    if (e_hi - target).abs() <= SOLVE_TOL {
        return Ok(hi);
    }
    let (mut lo, mut e_lo) = (0.0, n);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let e = expected_isolated(density, n, mid, k);
        if (e - target).abs() <= SOLVE_TOL {
            return Ok(mid);
        }
        if e > target {
            lo = mid;
            e_lo = e;
        } else {
            hi = mid;
            e_hi = e;
        }
    }
    let (best, err) = if (e_lo - target).abs() < (e_hi - target).abs() {
        (lo, (e_lo - target).abs())
    } else {
        (hi, (e_hi - target).abs())
    };
    if err <= SOLVE_TOL {
        Ok(best)
    } else {
        Err(Error::NoBracket(format!(
            "bisection stalled at r = {best} with |E[ξ] - e^-β| = {err:e}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{centring_radius, expected_isolated_expansion};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for m in [1usize, 2, 5, 12, 24] {
            let gl = GaussLegendre::new(m);
            assert_eq!(gl.len(), m);
            let wsum: f64 = gl.weights().iter().sum();
            assert!((wsum - 2.0).abs() < 1e-14);
            let deg = 2 * m - 1;
            let got = gl.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let want = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!(rel(got, want) < 1e-13, "m={m}: {got} vs {want}");
        }
        let gl = GaussLegendre::new(12);
        let got = gl.integrate_graded(0.0, 1.0, |x| (1.0 - x).powf(1.5));
        assert!(rel(got, 0.4) < 1e-9);
    }

    #[test]
    fn isolated_probability_values() {
        assert_eq!(isolated_probability(0.0, 1), 1.0);
        assert!((isolated_probability(2.0, 1) - (-2.0f64).exp()).abs() < 1e-16);
        assert!((isolated_probability(2.0, 2) - 3.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((isolated_probability(3.0, 3) - 8.5 * (-3.0f64).exp()).abs() < 1e-15);
        assert_eq!(isolated_probability(5.0, 0), 0.0);
    }

    #[test]
    fn radial_ball_mass_matches_fine_grid() {
        let disk = Domain::disk(1.0).unwrap();
        let dens = Density::radial_with_ratio(&disk, 1.5).unwrap();
        let DensitySpec::Radial { c0, c2 } = dens.spec() else {
            unreachable!()
        };
        for (s, r) in [(0.9, 0.3), (0.5, 0.7), (0.2, 1.5), (0.99, 0.05), (0.0, 0.4)] {
            let got = ball_mass(&dens, &[s, 0.0, 0.0], r);
            // midpoint grid over the bounding square of the ball
            let m = 1200;
            let h = 2.0 * r / m as f64;
            let mut want = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let x = s - r + (i as f64 + 0.5) * h;
                    let y = -r + (j as f64 + 0.5) * h;
                    if (x - s).powi(2) + y * y <= r * r && x * x + y * y <= 1.0 {
                        want += (c0 + c2 * (x * x + y * y)) * h * h;
                    }
                }
            }
            assert!(rel(got, want) < 2e-3, "s={s} r={r}: {got} vs {want}");
        }
    }

    #[test]
    fn radial_ball_mass_3d_full_domain() {
        let ball = Domain::ball3(1.0).unwrap();
        let dens = Density::radial_with_ratio(&ball, -0.5).unwrap();
        let got = ball_mass(&dens, &[0.3, 0.1, 0.0], 3.0);
        assert!((got - 1.0).abs() < 1e-12, "{got}");
        let dens2 = Density::radial_with_ratio(&Domain::disk(2.0).unwrap(), 2.0).unwrap();
        let got = ball_mass(&dens2, &[1.0, 0.5, 0.0], 5.0);
        assert!((got - 1.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn trivial_expectations() {
        let sq = Density::uniform(&Domain::unit_square());
        let disk = Density::uniform(&Domain::disk(1.0).unwrap());
        let ball = Density::uniform(&Domain::ball3(1.0).unwrap());
        for dens in [&sq, &disk, &ball] {
            assert_eq!(expected_isolated(dens, 50.0, 0.0, 1), 50.0);
            let n: f64 = 5.0;
            let diam = dens.domain().diameter();
            let got = expected_isolated(dens, n, diam * 1.01, 1);
            assert!(rel(got, n * (-n).exp()) < 1e-6, "{got}");
        }
    }

    #[test]
    fn uniform_disk_interior_strip_matches_closed_form() {
        let disk = Domain::disk(1.0).unwrap();
        let dens = Density::uniform(&disk);
        for (n, r, k) in [(1e4, 0.02, 1), (1e5, 0.008, 2), (300.0, 0.3, 3)] {
            let quad = interior_contribution(&dens, n, r, k);
            let f0 = dens.f0();
            let closed = isolated_probability(n * f0 * PI * r * r, k) * f0 * PI * (1.0 - r).powi(2);
            assert!(
                (quad - closed).abs() <= 1e-9 * closed.max(1e-300),
                "{quad} vs {closed}"
            );
        }
    }

    #[test]
    fn polygon_inner_area_formula() {
        let tri = ConvexPolygon::new(vec![[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]]).unwrap();
        let sq = ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        for p in [&tri, &sq] {
            let cot_sum: f64 = p
                .interior_angles()
                .iter()
                .map(|a| 1.0 / (a / 2.0).tan())
                .sum();
            for r in [0.01, 0.05, 0.1] {
                let want = p.area() - p.perimeter() * r + r * r * cot_sum;
                assert!((inner_region_area(p, r) - want).abs() < 1e-13);
            }
        }
        assert_eq!(inner_region_area(&sq, 0.6), 0.0);
    }

    fn refined_expectation(dens: &Density, n: f64, r: f64, k: usize) -> f64 {
        // Brute force: integrate p(n ν) f over the domain on a fine
        // graded polar/Cartesian grid with plain Gauss–Legendre panels.
        let gl = GaussLegendre::new(20);
        match dens.domain() {
            Domain::Polygon(p) => {
                let (lo, hi) = dens.domain().bounding_box();
                let panels = 100;
                let hx = (hi[0] - lo[0]) / panels as f64;
                let hy = (hi[1] - lo[1]) / panels as f64;
                let f0 = dens.f0();
                let mut total = 0.0;
                for i in 0..panels {
                    let x0 = lo[0] + i as f64 * hx;
                    total += gl.integrate(x0, x0 + hx, |x| {
                        let mut col = 0.0;
                        for j in 0..panels {
                            let y0 = lo[1] + j as f64 * hy;
                            col += gl.integrate(y0, y0 + hy, |y| {
                                if p.contains([x, y]) {
                                    let nu = f0 * p.circle_intersection_area([x, y], r);
                                    isolated_probability(n * nu, k)
                                } else {
                                    0.0
                                }
                            });
                        }
                        col
                    });
                }
                n * f0 * total
            }
            Domain::Disk { radius } | Domain::Ball3 { radius } => {
                let d = dens.domain().dim();
                let profile = radial_profile(dens, d, *radius, n, r, k);
                let panels = 20000;
                let h = radius / panels as f64;
                n * (0..panels)
                    .map(|i| gl.integrate(i as f64 * h, (i + 1) as f64 * h, &profile))
                    .sum::<f64>()
            }
        }
    }

    #[test]
    fn quadrature_matches_refined_reference_radial() {
        let disk = Domain::disk(1.0).unwrap();
        let ball = Domain::ball3(1.0).unwrap();
        let cases = [
            (Density::uniform(&disk), 1e5, 1),
            (Density::uniform(&disk), 1e4, 2),
            (Density::radial_with_ratio(&disk, 1.0).unwrap(), 1e4, 1),
            (Density::radial_with_ratio(&disk, -0.4).unwrap(), 1e4, 2),
            (Density::uniform(&ball), 1e5, 1),
            (Density::radial_with_ratio(&ball, 0.5).unwrap(), 1e4, 2),
        ];
        for (dens, n, k) in cases {
            let d = dens.domain().dim();
            let r = centring_radius(d, k, n, dens.f0(), 0.0).unwrap();
            let got = expected_isolated(&dens, n, r, k);
            let want = refined_expectation(&dens, n, r, k);
            assert!(
                (got - want).abs() <= 1e-6 * want.max(1.0),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn quadrature_matches_refined_reference_polygon() {
        let sq = Density::uniform(&Domain::unit_square());
        let n = 2e3;
        let r = centring_radius(2, 1, n, 1.0, 0.0).unwrap();
        let got = expected_isolated(&sq, n, r, 1);
        let want = refined_expectation(&sq, n, r, 1);
        assert!(
            (got - want).abs() <= 1e-5 * want.max(1.0),
            "{got} vs {want}"
        );
    }

    #[test]
    fn fan_fallback_agrees_with_trapezoids_near_the_switch() {
        // Triangle with inradius ≈ 0.3486: just below it the trapezoid
        // decomposition is used, just above it the fan.
        let tri = Domain::polygon(vec![[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]]).unwrap();
        let dens = Density::uniform(&tri);
        let Domain::Polygon(p) = &tri else {
            unreachable!()
        };
        let frames = edge_frames(p);
        let switch = frames
            .iter()
            .map(|f| f.len / (f.cot_start + f.cot_end))
            .fold(f64::INFINITY, f64::min);
        let below = expected_isolated(&dens, 20.0, switch * (1.0 - 1e-9), 1);
        let above = expected_isolated(&dens, 20.0, switch * (1.0 + 1e-9), 1);
        assert!(rel(below, above) < 1e-5, "{below} vs {above}");
    }

    #[test]
    fn expected_isolated_is_monotone() {
        let sq = Density::uniform(&Domain::unit_square());
        let mut prev = f64::INFINITY;
        for i in 1..60 {
            let r = i as f64 * 0.01;
            let e = expected_isolated(&sq, 500.0, r, 2);
            assert!(e <= prev * (1.0 + 1e-12));
            assert!(e <= expected_isolated(&sq, 500.0, r, 3));
            prev = e;
        }
    }

    #[test]
    fn approaches_expansion_as_n_grows() {
        let disk = Domain::disk(1.0).unwrap();
        let dens = Density::uniform(&disk);
        let sigma = disk.isoperimetric_sigma();
        let r = |n: f64, k| centring_radius(2, k, n, dens.f0(), 0.0).unwrap();
        let n = 1e6;
        let got = expected_isolated(&dens, n, r(n, 1), 1);
        assert!(rel(got, expected_isolated_expansion(2, 1, sigma, n, 0.0)) < 0.01);
        // k = 2 carries an O(1/log n) remainder; the gap only shrinks slowly.
        let gap = |n: f64| {
            rel(
                expected_isolated(&dens, n, r(n, 2), 2),
                expected_isolated_expansion(2, 2, sigma, n, 0.0),
            )
        };
        let (g5, g6, g8) = (gap(1e5), gap(1e6), gap(1e8));
        assert!(g5 > g6 && g6 > g8, "{g5} {g6} {g8}");
    }

    #[test]
    fn solver_plug_back_and_monotone() {
        let sq = Density::uniform(&Domain::unit_square());
        let mut prev = 0.0;
        for beta in [-1.0, 0.0, 2.0] {
            let r = solve_rn(&sq, 1e4, 1, beta).unwrap();
            let e = expected_isolated(&sq, 1e4, r, 1);
            assert!((e - (-beta).exp()).abs() <= SOLVE_TOL);
            assert!(r > prev);
            prev = r;
        }
        let ball = Density::radial_with_ratio(&Domain::ball3(1.0).unwrap(), 1.0).unwrap();
        let r = solve_rn(&ball, 1e4, 2, 0.5).unwrap();
        assert!((expected_isolated(&ball, 1e4, r, 2) - (-0.5f64).exp()).abs() <= SOLVE_TOL);
    }

    #[test]
    fn solver_reports_missing_bracket() {
        let sq = Density::uniform(&Domain::unit_square());
        assert!(matches!(
            solve_rn(&sq, 0.5, 1, 0.0),
            Err(Error::NoBracket(_))
        ));
        assert!(matches!(
            solve_rn(&sq, 2.0, 1, -3.0),
            Err(Error::NoBracket(_))
        ));
        assert!(matches!(
            solve_rn(&sq, 3.0, 4, 0.0),
            Err(Error::NoBracket(_))
        ));
        assert!(solve_rn(&sq, 0.0, 1, 0.0).is_err());
    }
}
