use std::path::PathBuf;

use thiserror::Error;

use crate::hamiltonian::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} outside sampled range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("invalid target Hamiltonian: {}", join(.0))]
    InvalidHamiltonian(Vec<Violation>),

    #[error("singular matrix element: {0}")]
    Singular(&'static str),

    #[error("coupling tensor is not normalizable (J_xx + J_yy = 0)")]
    NotNormalizable,

    #[error("{n} qubits exceeds the dense-matrix capacity of {max}")]
    Capacity { n: usize, max: usize },

    #[error("infeasible schedule: {quantity} slew on segment {segment} (t = {t:e}) still violates its limit after {passes} passes")]
    Infeasible {
        segment: usize,
        t: f64,
        quantity: String,
        passes: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unit mismatch: Hamiltonian is {hamiltonian}, constraints are {constraints}")]
    UnitMismatch {
        hamiltonian: &'static str,
        constraints: &'static str,
    },

    #[error("generator not Hermitian at t = {t:e} (deviation {deviation:e})")]
    NonHermitian { t: f64, deviation: f64 },

    #[error("matrix not unitary (defect {defect:e})")]
    NonUnitary { defect: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for numeric infeasibility, 2 for configuration and I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible { .. }
            | Error::NonHermitian { .. }
            | Error::NonUnitary { .. }
            | Error::Domain(_) => 1,
            _ => 2,
        }
    }
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
