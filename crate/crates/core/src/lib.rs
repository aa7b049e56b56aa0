//! Stochastic parallel transport under a gauge connection, its path-space
//! derivatives, and Monte Carlo checks of the Lévy Laplacian, Lévy divergence
//! and Yang–Mills action identities built on top of it.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod gauge;
pub mod levyops;
pub mod liealg;
pub mod montecarlo;
pub mod paths;
pub mod quadrature;
pub mod transport;
pub mod variation;

pub use error::{ConfigError, Error, Result};
