//! Adaptive sampling and domain learning for multivariate polynomial
//! approximation over an unknown domain of interest.
//!
//! The ambient box `[-1, 1]^d` is replaced by a fixed random grid ([`grid`]).
//! A black-box function ([`blackbox`]) together with an indicator defines the
//! domain of interest as the set of grid points where the indicator accepts
//! the function value. The driver ([`driver`]) alternates between drawing
//! samples from Christoffel-function measures ([`measures`]) built over the
//! current domain estimate, fitting a weighted least-squares approximation in
//! a hyperbolic-cross Legendre space ([`polyspace`], [`lsq`]), and updating
//! the domain estimate from the fitted values. [`metrics`] holds the error,
//! domain mismatch, rejection rate and stability diagnostics reported per
//! level.

pub mod blackbox;
pub mod driver;
pub mod error;
pub mod grid;
pub(crate) mod linalg;
pub mod lsq;
pub mod measures;
pub mod metrics;
pub mod polyspace;

pub use error::{Error, Result};
