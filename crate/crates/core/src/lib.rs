//! Multilevel Monte Carlo finite elements for elliptic problems whose
//! log-diffusion coefficient is a Besov-type random tree field.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod fem;
pub mod galton_watson;
pub mod grid;
pub mod mlmc;
pub mod prior;
pub mod rng;
pub mod wavelet;

pub use error::{Error, Result};
pub use grid::{DyadicGrid, GridField, GridKind};
