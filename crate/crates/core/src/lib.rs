//! Planar multibody dynamics with Newmark integration in the tangent space of
//! the constraint manifold.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod config;
pub mod error;
pub mod export;
pub mod integrators;
pub mod linsolve;
pub mod model;
pub mod repro;
pub mod scenarios;
pub mod stability;
pub mod tangent;

pub use error::{Error, Result};
