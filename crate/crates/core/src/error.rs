use thiserror::Error;

/// Errors raised by the estimation, sampling and quadrature routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} = {value} is outside the admissible range [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },

    #[error("no pair survived truncation")]
    EmptySample,

    #[error("tied observations at x = {0}")]
    TiedObservations(f64),

    #[error("pair {index} violates x <= y (x = {x}, y = {y})")]
    NotTruncated { index: usize, x: f64, y: f64 },

    #[error("degenerate denominator M2 - 2 M1^2 = {value:e} (M1 = {m1})")]
    DegenerateDenominator { value: f64, m1: f64 },

    #[error("statistic s = {s} is outside the admissible region for alpha = {alpha}")]
    NotAdmissible { s: f64, alpha: f64 },

    #[error("bisection did not converge: residual {residual:e} after {iterations} steps")]
    Convergence { residual: f64, iterations: usize },

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("singular parameter: {0}")]
    Singular(String),

    #[error("empty selection range: kmin = {kmin} exceeds kmax = {kmax}")]
    EmptyRange { kmin: usize, kmax: usize },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
