//! Closed-form constants, centring sequences and limit distributions for
//! the k-connectivity threshold and the largest k-NN link.

mod quadrature;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::density::{Density, Regime};
use crate::error::{Error, Result};
use crate::geometry::Domain;

pub use quadrature::{
    ball_mass, expected_isolated, gauss_legendre, interior_contribution, isolated_probability,
    solve_rn, GaussLegendre, SOLVE_TOL,
};

/// `-log(log 2)`: the median of the standard Gumbel law.
pub fn gumbel_median() -> f64 {
    -(2f64.ln()).ln()
}

/// Volume of the unit ball `θ_d = π^{d/2} / Γ(1 + d/2)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        // θ_d = 2π/d · θ_{d-2}
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// `c_{d,k} = θ_{d-1}^{-1} θ_d^{1-1/d} (2-2/d)^{k-2+1/d} 2^{1-k} / (k-1)!`.
pub fn cdk(d: usize, k: usize) -> f64 {
    assert!(d >= 2 && k >= 1, "cdk needs d >= 2 and k >= 1");
    let df = d as f64;
    let kf = k as f64;
    unit_ball_volume(d).powf(1.0 - 1.0 / df) / unit_ball_volume(d - 1)
        * (2.0 - 2.0 / df).powf(kf - 2.0 + 1.0 / df)
        * 2f64.powf(1.0 - kf)
        / factorial(k - 1)
}

/// Centring `a_n = (2-2/d) log n + (2k-4+2/d) 1{d>=3 or k>=2} log log n`.
pub fn centring_offset(d: usize, k: usize, n: f64) -> f64 {
    let df = d as f64;
    let ln = n.ln();
    let mut a = (2.0 - 2.0 / df) * ln;
    if d >= 3 || k >= 2 {
        a += (2.0 * k as f64 - 4.0 + 2.0 / df) * ln.ln();
    }
    a
}

/// Explicit uniform-case radius: `f0 n θ_d r^d = max(a_n + β, 0)`.
pub fn centring_radius(d: usize, k: usize, n: f64, f0: f64, beta: f64) -> Result<f64> {
    if !(n > 1.0) {
        return Err(Error::InvalidArgument(format!("n must exceed 1, got {n}")));
    }
    let rhs = (centring_offset(d, k, n) + beta).max(0.0);
    Ok((rhs / (f0 * n * unit_ball_volume(d))).powf(1.0 / d as f64))
}

/// Limit of `θ_d n M_k^d / log n`.
///
/// Smooth domains: `max(1/f0, (2-2/d)/f1)`. Convex polygons: `θ_2` times the
/// maximum over faces of `D(φ) / (f_φ ρ_φ d)` with the interior
/// (`D = 2`, `ρ = π`), the edges (`D = 1`, `ρ = π/2`) and the corners
/// (`D = 0`).
pub fn slln_constant(density: &Density, d: usize) -> Result<f64> {
    let domain = density.domain();
    if d != domain.dim() {
        return Err(Error::InvalidArgument(format!(
            "dimension {d} does not match the domain ({})",
            domain.dim()
        )));
    }
    let df = d as f64;
    Ok(match domain {
        Domain::Disk { .. } | Domain::Ball3 { .. } => {
            (1.0 / density.f0()).max((2.0 - 2.0 / df) / density.f1())
        }
        Domain::Polygon(_) => {
            let interior = 2.0 / (density.f0() * PI * 2.0);
            let edges = 1.0 / (density.f1() * (PI / 2.0) * 2.0);
            PI * interior.max(edges)
        }
    })
}

/// Sample size for [`limit_cdf`]: a finite `n` (with finite-`n` correction)
/// or the pure limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleSize {
    Finite(f64),
    Infinite,
}

/// The limiting law attached to a (d, k, density) triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `d = 2, k = 1`: Gumbel, scale 1.
    GumbelScale1,
    /// `d = 2, k = 2`: product of scale-1 and scale-2 Gumbel factors.
    Tcev,
    /// `d >= 3` or `k >= 3`: Gumbel, scale 2.
    GumbelScale2,
    /// Median-centred non-uniform law `α (Gu + log log 2)`.
    NonUniformGumbel { alpha: f64 },
    /// `f1 = f0 (2-2/d)`: only tightness is known.
    Critical,
}

/// Theoretical side of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSpec {
    pub d: usize,
    pub k: usize,
    pub sigma_a: f64,
    pub f0: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub family: Family,
}

impl LimitSpec {
    /// Uniform density on `domain`, explicit centring.
    pub fn uniform(domain: &Domain, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let d = domain.dim();
        let f0 = 1.0 / domain.volume();
        let family = match (d, k) {
            (2, 1) => Family::GumbelScale1,
            (2, 2) => Family::Tcev,
            _ => Family::GumbelScale2,
        };
        Ok(LimitSpec {
            d,
            k,
            sigma_a: domain.isoperimetric_sigma(),
            f0,
            f1: f0,
            family,
        })
    }

    /// Median-centred law for a general density.
    pub fn non_uniform(density: &Density, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let domain = density.domain();
        let d = domain.dim();
        let theta = unit_ball_volume(d);
        let family = match density.regime(d) {
            Regime::InteriorDominated => Family::NonUniformGumbel {
                alpha: 1.0 / (theta * density.f0()),
            },
            Regime::BoundaryDominated => Family::NonUniformGumbel {
                alpha: 2.0 / (theta * density.f1()),
            },
            Regime::Critical => Family::Critical,
        };
        Ok(LimitSpec {
            d,
            k,
            sigma_a: domain.isoperimetric_sigma(),
            f0: density.f0(),
            f1: density.f1(),
            family,
        })
    }

    /// Centring `a_n` of the explicit uniform statistic.
    pub fn centring(&self, n: f64) -> f64 {
        centring_offset(self.d, self.k, n)
    }

    /// Explicit statistic `n θ_d f0 v^d - a_n`.
    pub fn transform(&self, v: f64, n: f64) -> f64 {
        n * unit_ball_volume(self.d) * self.f0 * v.powi(self.d as i32) - self.centring(n)
    }

    fn no_law(&self) -> Error {
        Error::Infeasible(
            "f1 = f0(2-2/d): only tightness holds in this regime (Theorem 1.2(iii)); no limit law"
                .into(),
        )
    }

    /// Multiplicative finite-`n` correction factor of the uniform limit
    /// CDFs (1 at `n = ∞`).
    pub fn correction(&self, beta: f64, n: SampleSize) -> Result<f64> {
        let SampleSize::Finite(n) = n else {
            return match self.family {
                Family::Critical => Err(self.no_law()),
                _ => Ok(1.0),
            };
        };
        if !(n > std::f64::consts::E) {
            return Err(Error::InvalidArgument(format!("n must exceed e, got {n}")));
        }
        let ln = n.ln();
        let lln = ln.ln();
        let s = self.sigma_a;
        let half = (-beta / 2.0).exp();
        Ok(match self.family {
            Family::GumbelScale1 => (-s * PI.sqrt() * half / (2.0 * ln.sqrt())).exp(),
            Family::Tcev => {
                (-PI.sqrt() * s * half * lln / (8.0 * ln) - (-beta).exp() * lln / ln).exp()
            }
            Family::GumbelScale2 => {
                let d = self.d as f64;
                let c = cdk(self.d, self.k);
                let m = self.k as f64 - 2.0 + 1.0 / d;
                (-c * s * half * m * m * lln / ((1.0 - 1.0 / d) * ln)).exp()
            }
            Family::NonUniformGumbel { .. } => 1.0,
            Family::Critical => return Err(self.no_law()),
        })
    }

    /// Limit law of the explicit uniform statistic, times its correction.
    pub fn limit_cdf(&self, beta: f64, n: SampleSize) -> Result<f64> {
        let s = self.sigma_a;
        let pure = match self.family {
            Family::GumbelScale1 => (-(-beta).exp()).exp(),
            Family::Tcev => (-(-beta).exp() - PI.sqrt() * s * (-beta / 2.0).exp() / 4.0).exp(),
            Family::GumbelScale2 => (-cdk(self.d, self.k) * s * (-beta / 2.0).exp()).exp(),
            Family::NonUniformGumbel { .. } => {
                return Err(Error::InvalidArgument(
                    "non-uniform laws are median-centred; use nonuniform_limit_cdf".into(),
                ))
            }
            Family::Critical => return Err(self.no_law()),
        };
        Ok(pure * self.correction(beta, n)?)
    }

    /// CDF of `α (Gu + log log 2)` at `z`.
    pub fn nonuniform_limit_cdf(&self, z: f64) -> Result<f64> {
        match self.family {
            Family::NonUniformGumbel { alpha } => Ok(nonuniform_limit_cdf(alpha, z)),
            Family::Critical => Err(self.no_law()),
            _ => Err(Error::InvalidArgument(
                "explicit uniform law; use limit_cdf".into(),
            )),
        }
    }
}

/// `P[α (Gu + log log 2) <= z] = exp(-exp(-(z/α - log log 2)))`; median 0.
pub fn nonuniform_limit_cdf(alpha: f64, z: f64) -> f64 {
    (-(-(z / alpha + gumbel_median())).exp()).exp()
}

/// Leading terms of `E[ξ_{n,r_n(β)}]` at the explicit centring radius
/// (uniform case), used as a cross-check of the quadrature.
pub fn expected_isolated_expansion(d: usize, k: usize, sigma_a: f64, n: f64, beta: f64) -> f64 {
    let ln = n.ln();
    let lln = ln.ln();
    let eb = (-beta).exp();
    let half = (-beta / 2.0).exp();
    let sp = PI.sqrt();
    if d == 2 {
        match k {
            1 => eb + sigma_a * half * sp / 2.0 / ln.sqrt(),
            2 => eb + sigma_a * half * sp / 4.0 * (1.0 + lln / (2.0 * ln)) + eb * lln / ln,
            _ => {
                let kf = k as f64;
                sigma_a * half * sp / (factorial(k - 1) * 2f64.powi(k as i32))
                    * (1.0 + (2.0 * kf - 3.0).powi(2) * lln / (2.0 * ln))
            }
        }
    } else {
        let df = d as f64;
        let m = k as f64 - 2.0 + 1.0 / df;
        half * cdk(d, k)
            * sigma_a
            * (1.0
                + m * m * lln / ((1.0 - 1.0 / df) * ln)
                + (m * beta + 4.0 * k as f64 - 4.0) / ((2.0 - 2.0 / df) * ln))
    }
}
