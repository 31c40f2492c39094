//! Late-time tails of small solutions of the radial semilinear wave equation
//! `□u = u^p` in three dimensions.
//!
//! - [`profiles`]: compactly supported data and the free-wave profile `h`.
//! - [`asymptotics`]: moments of `h`, tail coefficients, the two-parameter
//!   attractor and the scaling bookkeeping.
//! - [`solver`]: fourth-order method-of-lines evolution with observers.
//! - [`analysis`]: exponents and fits on observer series.
//! - [`config`], [`pipeline`]: the `tailwave` command line.

pub mod analysis;
pub mod asymptotics;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod profiles;
pub mod solver;

pub use error::{Error, Result};
