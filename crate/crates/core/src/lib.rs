//! Numerical laboratory for Gabor systems and Haar-based frames in L^p(ℝ).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod commands;
pub mod counterexamples;
pub mod error;
pub mod fourier;
pub mod frame;
pub mod gabor;
pub mod grid;
pub mod haar;
pub mod inequalities;
pub mod report;
pub mod rng;
pub mod stochastic;

pub use error::{Error, Result};
pub use grid::{Exponent, Grid, SampledFunction, SparseFunction};
