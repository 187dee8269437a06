//! Stein operators for one-dimensional densities, Stein-equation solutions,
//! Fisher-information distances, classical probability metrics, and an audit
//! harness that checks the identities and bounds linking them.
//!
//! `DensityModel` carries a target or reference density, `stein` solves and
//! verifies, `metrics` measures, `bounds` assembles `lhs <= kappa * sqrt(J)`
//! reports, and `harness` runs them in batches from a JSON config.

pub mod densities;
pub mod error;
mod numdiff;
pub mod quadrature;
pub mod metrics;
pub mod stein;
pub mod acceptance;
pub mod bounds;
pub mod harness;

pub use error::{Error, Result};
