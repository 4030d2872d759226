//! Equi-energy Metropolis samplers for mean-field spin systems, with exact
//! spectral analysis of the resulting reversible chains.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod kernel;
pub mod model;
pub mod sim;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
