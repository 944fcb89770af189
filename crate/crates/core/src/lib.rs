//! Hyper-differential sensitivity analysis (HDSA) for PDE-constrained
//! optimization.
//!
//! Given an optimization problem `min J(u, z, θ) s.t. c(u, z, θ) = 0` whose
//! solution depends on auxiliary parameters `θ`, this crate computes the
//! Fréchet derivative of the optimal `z` with respect to `θ`, its leading
//! singular triples in mass-matrix-weighted inner products, and the local,
//! set and sampled-global sensitivity indices derived from them.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the command line or threads lives in the companion `hdsa`
//! crate; parallel loops are expressed through the [`Executor`] trait.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

mod error;
mod exec;
pub mod hdsa;
pub mod linalg;
pub(crate) mod math;
pub mod optimizer;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};

/// Total stacked dimension at or below which dense factorizations are used
/// for KKT solves and the verification oracle.
pub const DENSE_THRESHOLD: usize = 2000;
