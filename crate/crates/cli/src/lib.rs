//! Configuration parsing and subcommand drivers behind the `fecap` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
