//! Monte Carlo tests of conformal invariance for the three-dimensional
//! self-avoiding walk.
//!
//! The pivot algorithm ([`pivot`]) samples fixed-length walks on ℤ³
//! ([`lattice`]); [`ensembles`] turns each walk into a weighted hitting-angle
//! sample for one of three geometries, [`predictions`] holds the closed-form
//! distribution functions those samples should follow, and [`stats`] compares
//! the two. [`pipeline`] and [`io`] run whole simulations and persist them.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod ensembles;
pub mod error;
pub mod io;
pub mod lattice;
pub mod pipeline;
pub mod pivot;
pub mod predictions;
pub mod stats;

pub use ensembles::{Ensemble, ExponentSet, SphereSpec, WeightScheme, WeightedSample};
pub use error::{Error, Result};
pub use lattice::{LatticePoint, OctahedralSymmetry, Walk};
pub use pivot::{Chain, ChainConfig, Constraint};
pub use predictions::{Density, PredictedCdf};
pub use stats::{ComparisonReport, CorrectionProfile, EmpiricalCdf};

/// Version string recorded in every metadata sidecar.
pub const VERSION: &str = concat!("sawlab ", env!("CARGO_PKG_VERSION"));
