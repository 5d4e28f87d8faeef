#![cfg_attr(not(test), no_std)]

//! Exact log-domain machinery for the log-gamma directed polymer with
//! boundary weights.
//!
//! The crate has four layers, each usable on its own:
//!
//! * [`specfun`]: digamma and trigamma, the variance kernel `phi`,
//!   characteristic directions, exact means and free energies.
//! * [`randenv`]: reproducible gamma-distributed weight environments keyed
//!   by a master seed and a stream id.
//! * [`lattice`]: partition-function recursions in the log domain, ratio
//!   and dual weight fields, reversal, and streaming variants that hold a
//!   single row in memory.
//! * [`polymer`]: exact quenched path laws on a fixed environment: path
//!   sampling, exit and crossing distributions, path functionals.
//!
//! All floating-point work goes through `libm`, so results are bit-identical
//! across platforms, and the crate runs without `std` (allocation is
//! required). [`stats`] carries the estimator and test kernels shared by the
//! simulation drivers built on top.

extern crate alloc;

pub mod lattice;
pub mod polymer;
pub mod randenv;
pub mod specfun;
pub mod stats;

mod error;

pub use error::Error;
pub use randenv::{Environment, RngStream};
pub use specfun::{CharacteristicShape, ModelParams};
