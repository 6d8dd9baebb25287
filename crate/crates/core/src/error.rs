use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("state trace is {0}, expected 1")]
    NotUnitTrace(f64),
    #[error("POVM elements sum to identity only within {0:e}")]
    IncompletePovm(f64),
    #[error("no sifted rounds in the {0} basis")]
    EmptyStratum(&'static str),
    #[error("infeasible dimensions: {0}")]
    InfeasibleDimensions(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("parameter file line {line}: {msg}")]
    Config { line: usize, msg: String },
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    range: &'static str,
) -> Result<f64> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::OutOfRange { name, value, range })
    }
}
