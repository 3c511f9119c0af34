//! Fractional Dirichlet Laplacian eigenvalue and torsion laboratory on
//! one-dimensional domains.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cg;
pub mod cli;
pub mod domain;
pub mod error;
pub mod fracop;
pub mod isoperimetry;
pub mod par;
pub mod quadrature;
pub mod rearrange;
pub mod spectral;
pub mod specfun;
pub mod toeplitz;
pub mod torsion;

pub use error::{Error, Result};
