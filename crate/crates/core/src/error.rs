use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("degenerate metric at tau = {tau}: density {value} at node {node}")]
    DegenerateMetric { tau: f64, node: usize, value: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(
        "linear solve did not converge: relative residual {residual:e} after {iterations} iterations \
         (diagonal ratio {condition_estimate:e}, dt = {dt}, spacing = {spacing})"
    )]
    LinearSolve {
        residual: f64,
        iterations: usize,
        condition_estimate: f64,
        dt: f64,
        spacing: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{field}: {source}")]
    Expression {
        field: String,
        #[source]
        source: ExprError,
    },
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
