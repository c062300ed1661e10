//! Numerical laboratory for near-flat asymptotically flat manifolds.
//!
//! The crate computes ADM masses of harmonically flat ends, solves the
//! conformal Laplace equation on spherically symmetric metrics, runs the
//! Ricci-deformation mass flow `m(s)`, and measures the weighted estimates
//! that tie small mass to uniform closeness of the conformal factor to one.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod banded;
pub mod deformation;
pub mod error;
pub mod experiments;
pub mod fd;
pub mod field;
pub mod harmonic;
pub mod mass;
pub mod metric;
pub mod norms;
pub mod quadrature;
pub mod solver;
pub mod sphere;

pub use error::{Error, Result};
