//! Executable lower-bound constructions for geodesically convex
//! optimization on hyperbolic space.

// `!(x > 0.0)` is used on purpose so that NaN falls into the error branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cutting_planes;
pub mod error;
pub mod harness;
pub mod hyperboloid;
pub mod interpolation;
mod qp;
pub mod resisting;
pub mod sample;
pub mod solvers;
pub mod tol;
pub mod zoo;

pub use error::{Error, Result};
pub use hyperboloid::{HPoint, HTangent, HalfSpace, TotallyGeodesicSub};
