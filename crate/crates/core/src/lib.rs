//! Orthogonal-preserving quadratic stochastic operators on a finite index
//! window, with tail mass tracked for truncated infinite-dimensional objects.

// `!(x > y)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod construct;
pub mod dynamics;
pub mod error;
pub mod heredity;
pub mod io;
pub mod opcheck;
pub mod orthosys;
pub mod qso;
pub mod report;
pub mod rng;
pub mod simplex;

pub use error::{Error, Result};
