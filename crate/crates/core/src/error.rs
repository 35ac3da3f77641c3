//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural validation of CSR arrays failed.
    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    /// An operand has the wrong length or shape.
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    /// An index list that must be a permutation is not one.
    #[error("index list is not a permutation of 0..{n}")]
    NotAPermutation { n: usize },

    /// A sweep needs a nonzero diagonal entry that is absent or zero.
    #[error("zero or missing diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    /// Dense LU hit a zero pivot after partial pivoting.
    #[error("matrix is singular to working precision (zero pivot at step {step})")]
    SingularMatrix { step: usize },

    /// A block factorization hit a singular pivot block.
    #[error("singular pivot block for cell {cell}")]
    SingularPivotBlock { cell: usize },

    /// A coloring plan does not fit the matrix it is used with.
    #[error("invalid coloring plan: {0}")]
    InvalidPlan(String),

    /// A block layout does not describe the matrix it is paired with.
    #[error("invalid block layout: {0}")]
    InvalidLayout(String),

    /// A configuration value is out of its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Matrix or vector file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// GMRES stalled: the Krylov basis collapsed while the residual was still
    /// above tolerance.
    #[error("krylov basis breakdown at iteration {iteration} (relative residual {residual:.3e})")]
    Breakdown { iteration: usize, residual: f64 },

    /// A step of a matrix-sequence solve failed to converge.
    #[error("step {step} did not converge (relative residual {residual:.3e})")]
    StepDidNotConverge { step: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
