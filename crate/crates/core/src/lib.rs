//! Nonparametric functional regression with functional responses.
//!
//! The crate provides the pieces of a desk-scale verification workbench for
//! local-weighting regression on function spaces:
//!
//! - [`curves`]: discretized curves as Hilbert-space elements and the
//!   semi-metrics of the predictor space;
//! - [`orlicz`]: ψ function families and Orlicz norm estimation;
//! - [`datagen`]: seeded generators for independent and weakly dependent
//!   sequences, coupled copies, and coupling-decay estimates;
//! - [`estimator`]: the k-NN / kernel k-NN / Nadaraya-Watson estimator and
//!   its weight statistics;
//! - [`smallball`]: empirical small-ball probabilities and concentration
//!   checks for the neighbor radius and count;
//! - [`ratebench`]: end-to-end Monte Carlo rate experiments and slope fits;
//! - [`io`]: the CSV formats shared by the library and the CLI.

// `!(x > 0.0)` is the NaN-rejecting form of a positivity check; `x <= 0.0`
// would silently accept NaN parameters
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod datagen;
pub mod error;
pub mod estimator;
pub mod io;
pub mod orlicz;
pub mod ratebench;
pub mod rng;
pub mod smallball;

pub use error::{Error, ErrorClass, Result};
