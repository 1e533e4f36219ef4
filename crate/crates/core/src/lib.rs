//! Numerical verification of the inhomogeneous T-Q solution of the open
//! spin-1/2 XXX chain with non-diagonal boundary terms, plus symbolic
//! expansion of the higher-spin T-Q generating function.

// `!(x <= tol)` is used so that NaN fails tolerance checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod error;
pub mod fusion;
pub mod lattice;
pub mod spectrum;
pub mod tq;

pub use error::{Error, Result};
