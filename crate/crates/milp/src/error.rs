use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("column {0} has an infinite bound")]
    UnboundedColumn(usize),
    #[error("column {column} has lower bound {lower} above upper bound {upper}")]
    InvalidBounds { column: usize, lower: f64, upper: f64 },
    #[error("row {row} references missing column {column}")]
    BadColumnIndex { row: usize, column: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("bound vector length {got} does not match {expected} columns")]
    BoundLength { expected: usize, got: usize },
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("simplex hit the iteration limit ({0})")]
    IterationLimit(usize),
    #[error("basis became singular during refactorization")]
    SingularBasis,
}
