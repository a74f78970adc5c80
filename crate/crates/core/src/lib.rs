//! Connectivity thresholds and largest k-nearest-neighbour links of random
//! geometric graphs on bounded domains, with the matching extreme-value
//! limit theory and a reproducible Monte Carlo harness.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod oracle;
pub mod spatial;
pub mod theory;
pub mod thresholds;

pub use density::{Density, DensitySpec, Regime};
pub use error::{Error, Result};
pub use geometry::{pt2, Domain, Point};
pub use spatial::PointSet;
pub use thresholds::ThresholdResult;
