//! Numerical laboratory for the Doi-Edwards / K-BKZ shear-flow model.

// `!(x > 0.0)` guards reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod kernels;
pub mod numerics;
pub mod spectral;
pub mod solver;
pub mod volterra;

pub use error::{Error, Result};
