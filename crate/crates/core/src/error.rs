use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the kernels, solvers and loaders in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("{0}")]
    Shape(String),

    #[error("degenerate matrix in {op}: Frobenius norm {norm:e} is below the threshold {threshold:e}")]
    Degenerate {
        op: &'static str,
        norm: f64,
        threshold: f64,
    },

    #[error("steplength denominator {denominator:e} vanished at iteration {k}")]
    Stagnation { k: usize, denominator: f64 },

    #[error("degenerate iterate at iteration {k}: normalizing factor {norm:e} is below {threshold:e}")]
    DegenerateIterate { k: usize, norm: f64, threshold: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid sparse structure: {0}")]
    Structure(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
