//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by construction, arithmetic and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A generator family has an entry whose shape is incompatible with its
    /// neighbours. `index` is the block index of the offending generator.
    #[error("generator `{family}` at block {index} has shape {found:?}, expected {expected:?}")]
    GeneratorShape {
        family: &'static str,
        index: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },

    /// Two operands do not share the same block partition.
    #[error("block partitions differ: left has {left} blocks / dimension {left_dim}, right has {right} blocks / dimension {right_dim}")]
    PartitionMismatch {
        left: usize,
        left_dim: usize,
        right: usize,
        right_dim: usize,
    },

    /// A vector length does not match the matrix dimension.
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A pivot block turned out (numerically) singular during elimination.
    /// This signals that the matrix is not strongly regular.
    #[error("singular pivot at block {block} (reciprocal condition estimate {rcond:.3e})")]
    SingularPivot { block: usize, rcond: f64 },

    /// Banded construction found a nonzero entry outside the declared band.
    #[error("entry ({row}, {col}) = {value:.3e} lies outside the declared band")]
    OutsideBand { row: usize, col: usize, value: f64 },

    /// The conjugate gradient iteration hit a direction of non-positive
    /// curvature; the operator or preconditioner is not positive definite.
    #[error("indefinite operator detected in PCG at iteration {iteration} (p'Ap = {curvature:.3e})")]
    IndefiniteOperator { iteration: usize, curvature: f64 },

    /// Two-level elimination requires outer pivot blocks holding a single
    /// inner matrix; a wider outer block was encountered.
    #[error("outer pivot block {block} is a {rows}x{cols} array; elimination supports 1x1 outer pivots")]
    UnsupportedOuterPivot {
        block: usize,
        rows: usize,
        cols: usize,
    },

    /// Invalid experiment or solver configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
