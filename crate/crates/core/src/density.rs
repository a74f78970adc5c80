//! Sampling densities on a [`Domain`].

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm2, Domain, Point};

const NORMALISATION_TOL: f64 = 1e-9;
const CRITICAL_REL_TOL: f64 = 1e-12;
/// Consecutive rejections after which the rejection sampler reports failure.
pub const MAX_REJECTIONS: usize = 1_000_000;

/// JSON form of a density: `{"kind":"uniform"}` or
/// `{"kind":"radial","c0":..,"c2":..}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform {},
    /// `f(x) = c0 + c2 |x|^2` on a disk or ball centred at the origin.
    Radial {
        c0: f64,
        c2: f64,
    },
}

/// Which boundary/interior balance governs the threshold fluctuations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `f1 > f0 (2 - 2/d)`
    InteriorDominated,
    /// `f1 < f0 (2 - 2/d)`
    BoundaryDominated,
    /// `f1 = f0 (2 - 2/d)`; only tightness is available.
    Critical,
}

/// A probability density on a fixed domain together with its extremal values.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    spec: DensitySpec,
    domain: Domain,
    f0: f64,
    f1: f64,
    fmax: f64,
}

impl Density {
    pub fn uniform(domain: &Domain) -> Self {
        let f = 1.0 / domain.volume();
        Density {
            spec: DensitySpec::Uniform {},
            domain: domain.clone(),
            f0: f,
            f1: f,
            fmax: f,
        }
    }

    /// Binds a spec to a domain, checking positivity and normalisation.
    pub fn new(spec: DensitySpec, domain: &Domain) -> Result<Self> {
        let (c0, c2) = match spec {
            DensitySpec::Uniform {} => return Ok(Self::uniform(domain)),
            DensitySpec::Radial { c0, c2 } => (c0, c2),
        };
        let radius = match domain {
            Domain::Disk { radius } | Domain::Ball3 { radius } => *radius,
            Domain::Polygon(_) => {
                return Err(Error::InvalidDensity(
                    "radial densities are only defined on disks and balls".into(),
                ))
            }
        };
        if !(c0.is_finite() && c2.is_finite()) {
            return Err(Error::InvalidDensity("non-finite coefficient".into()));
        }
        let mass = radial_mass(domain, c0, c2);
        if (mass - 1.0).abs() > NORMALISATION_TOL {
            return Err(Error::InvalidDensity(format!(
                "density integrates to {mass}, not 1"
            )));
        }
        let edge = c0 + c2 * radius * radius;
        let (f0, fmax) = if c2 >= 0.0 { (c0, edge) } else { (edge, c0) };
        if f0 <= 0.0 {
            return Err(Error::InvalidDensity(format!(
                "density must stay positive, inf is {f0}"
            )));
        }
        Ok(Density {
            spec,
            domain: domain.clone(),
            f0,
            f1: edge,
            fmax,
        })
    }

    /// Normalised radial density with `c2 = ratio * c0`.
    pub fn radial_with_ratio(domain: &Domain, ratio: f64) -> Result<Self> {
        let c0 = 1.0 / radial_mass(domain, 1.0, ratio);
        Self::new(DensitySpec::Radial { c0, c2: ratio * c0 }, domain)
    }

    pub fn spec(&self) -> DensitySpec {
        self.spec
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.spec, DensitySpec::Uniform {})
    }

    /// Infimum over `A`.
    pub fn f0(&self) -> f64 {
        self.f0
    }

    /// Infimum over `∂A`.
    pub fn f1(&self) -> f64 {
        self.f1
    }

    pub fn fmax(&self) -> f64 {
        self.fmax
    }

    /// Density value at `x ∈ A`.
    pub fn evaluate(&self, x: &Point) -> Result<f64> {
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain(x[..self.domain.dim()].to_vec()));
        }
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &Point) -> f64 {
        match self.spec {
            DensitySpec::Uniform {} => self.f0,
            DensitySpec::Radial { c0, c2 } => c0 + c2 * norm2(x),
        }
    }

    /// Classifies `f1` against `f0 (2 - 2/d)`.
    pub fn regime(&self, d: usize) -> Regime {
        let pivot = self.f0 * (2.0 - 2.0 / d as f64);
        if (self.f1 - pivot).abs() <= CRITICAL_REL_TOL * pivot.abs().max(self.f1.abs()) {
            Regime::Critical
        } else if self.f1 > pivot {
            Regime::InteriorDominated
        } else {
            Regime::BoundaryDominated
        }
    }

    /// Draws one point with this density.
    ///
    /// Non-uniform densities use rejection from the uniform proposal with
    /// acceptance probability `f(x) / fmax`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point> {
        if self.is_uniform() {
            return Ok(self.domain.sample_uniform(rng));
        }
        for _ in 0..MAX_REJECTIONS {
            let x = self.domain.sample_uniform(rng);
            if rng.gen::<f64>() * self.fmax <= self.value_unchecked(&x) {
                return Ok(x);
            }
        }
        Err(Error::RejectionLimit(MAX_REJECTIONS))
    }

    /// Mass `∫_{B_s(o) ∩ A} f` of the centred ball of radius `s`.
    pub fn centred_ball_mass(&self, s: f64) -> f64 {
        let s = match self.domain {
            Domain::Disk { radius } | Domain::Ball3 { radius } => s.min(radius),
            Domain::Polygon(_) => return f64::NAN,
        };
        match self.spec {
            DensitySpec::Uniform {} => self.f0 * ball_volume(self.domain.dim(), s),
            DensitySpec::Radial { c0, c2 } => radial_mass_radius(self.domain.dim(), s, c0, c2),
        }
    }
}

fn ball_volume(d: usize, s: f64) -> f64 {
    if d == 3 {
        4.0 / 3.0 * PI * s.powi(3)
    } else {
        PI * s * s
    }
}

fn radial_mass_radius(d: usize, s: f64, c0: f64, c2: f64) -> f64 {
    if d == 3 {
        4.0 * PI * (c0 * s.powi(3) / 3.0 + c2 * s.powi(5) / 5.0)
    } else {
        2.0 * PI * (c0 * s * s / 2.0 + c2 * s.powi(4) / 4.0)
    }
}

fn radial_mass(domain: &Domain, c0: f64, c2: f64) -> f64 {
    match domain {
        Domain::Disk { radius } => radial_mass_radius(2, *radius, c0, c2),
        Domain::Ball3 { radius } => radial_mass_radius(3, *radius, c0, c2),
        Domain::Polygon(_) => f64::NAN,
    }
}
