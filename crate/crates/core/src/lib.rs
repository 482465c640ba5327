//! Minkowski symmetrization of convex bodies, computed through support functions.
//!
//! A convex body is only ever touched through its support function
//! `h_K(x) = sup_{y in K} <x, y>`. Symmetrizing `K` with respect to a unit
//! vector `u` replaces it by `(pi_u K + K) / 2`, whose support function is the
//! average `(h_K(x) + h_K(pi_u x)) / 2`. Stacks of such symmetrizations are kept
//! lazily and evaluated either by exact enumeration of sign patterns or by
//! Monte Carlo over sign vectors.
//!
//! The crate is organised as:
//!
//! - [`linalg`]: unit vectors, orthogonal bases, Haar sampling, Walsh-flat bases.
//! - [`bodies`]: support-function bodies and the lazily symmetrized body.
//! - [`norms`]: the inf-convolution norm, its tail-l2 surrogate, psi-alpha estimates.
//! - [`estimators`]: mean width, circumradius, diameter, sandwich ratio, defects.
//! - [`pipeline`]: symmetrization schedules and staged experiments.
//! - [`probes`]: standalone concentration experiments.
//!
//! With the default `parallel` feature the Monte Carlo inner loops, multi-start
//! searches and probe trials run on rayon; without it everything runs on the
//! calling thread and produces bit-identical results.

pub mod bodies;
pub mod error;
pub mod estimators;
mod kernels;
pub mod linalg;
pub mod norms;
mod par;
pub mod pipeline;
pub mod probes;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{OrthogonalBasis, Seed, UnitVector};
pub use stats::EstimateWithCI;

/// Library version, embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
