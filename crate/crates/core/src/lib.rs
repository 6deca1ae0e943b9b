#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Disordered infinite-range-hopping Bose-Hubbard model.
//!
//! Single-site traces, the variational pressure and its order parameter,
//! critical-temperature curves, closed-form critical constants and
//! brute-force finite-volume checks.

pub mod cli;
pub mod disorder;
pub mod error;
pub mod optimize;
pub mod oracle;
pub mod phase;
pub mod pressure;
pub mod quadrature;
pub mod singlesite;
pub mod tridiag;

pub use error::{Error, Result};
