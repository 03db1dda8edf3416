use thiserror::Error;

/// Errors raised by the bound and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("transition matrix is empty")]
    EmptyMatrix,
    #[error("row {row} has {found} entries, expected {expected}")]
    NotRectangular {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row} sums to {sum}, not 1")]
    RowNotStochastic { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) is negative or not finite: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("distribution is not normalized (sum {sum})")]
    NotNormalized { sum: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("output {output} has zero marginal but positive reachable mass")]
    UnreachableOutputWithMass { output: usize },
    #[error("auxiliary distribution vanishes on reachable output {output}")]
    SupportViolation { output: usize },
    #[error("confidence parameter delta = {0} outside (0, 1)")]
    InvalidDelta(f64),
    #[error("target error epsilon = {0} outside the admissible range")]
    InvalidEpsilon(f64),
    #[error("alpha = {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("pmf would need {atoms} atoms, budget is {cap}")]
    AtomBudgetExceeded { atoms: usize, cap: usize },
    #[error("Blahut-Arimoto gap {gap} above tolerance after {iterations} iterations")]
    NotConverged { gap: f64, iterations: usize },
    #[error("capacity-achieving input polytope is empty at every slack tried")]
    InfeasibleLp,
    #[error("argument {0} outside the function domain")]
    DomainError(f64),
    #[error("information density has zero variance")]
    ZeroVariance,
    #[error("sub-blocklength n0 = {n0} invalid for n = {n}")]
    InvalidN0 { n0: usize, n: usize },
    #[error("mini codebook needs {rows} rows, cap is {cap}")]
    CodebookTooLarge { rows: f64, cap: usize },
    #[error("received sequence has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
