//! IO, file formats and the command-line front end for the energy-time QKD
//! link simulator (`etqkd-core` holds the model itself).

// NaN-rejecting bound checks, as in the core crate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod formats;
pub mod provenance;
pub mod runner;

pub use commands::{run, Cli};
