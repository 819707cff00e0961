//! Simulation core for HfO₂-based ferroelectric capacitors with interface
//! depolarization and oxygen-vacancy trapping.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod constants;
pub mod energy;
pub mod error;
pub mod instrument;
pub mod kinetics;
pub mod traps;

pub use error::{Error, Result};
