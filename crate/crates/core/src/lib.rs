//! Numerical laboratory for heat kernels of linear parabolic equations on
//! evolving metrics.
//!
//! The operator is `d/dtau - Delta_{g(tau)} + nabla_X + Q`, discretised on a
//! circle, an interval or a conformally flat 2-torus. Kernels are computed by
//! an implicit midpoint scheme and checked against closed-form oracles and
//! integral identities.

pub mod check;
pub mod coefficients;
pub mod config;
pub mod convergence;
pub mod cutoff;
pub mod distance;
pub mod error;
pub mod experiment;
pub mod expr;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod metric;
pub mod operators;
pub mod oracle;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
