//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]; the variants carry the
//! numbers a caller needs to act on the rejection (required bytes, leaked
//! mass, residuals, ...) rather than prose alone.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right} in {context}")]
    DimensionMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    #[error("matrix is not Hermitian: max |A - A^dag| = {asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not a density matrix: {reason} (value {value:.3e})")]
    NotDensity { reason: &'static str, value: f64 },

    #[error("result dimension {required} exceeds the configured cap {cap}")]
    SizeOverflow { required: usize, cap: usize },

    #[error("memory budget exceeded: {required_bytes} bytes required, {budget_bytes} allowed")]
    MemoryBudget {
        required_bytes: usize,
        budget_bytes: usize,
    },

    #[error("eigensolver failed to converge within {iterations} QL iterations")]
    EigConvergence { iterations: usize },

    #[error("support violation: rho carries mass {leaked_mass:.3e} outside sigma's support (tolerance {tolerance:.3e})")]
    SupportViolation { leaked_mass: f64, tolerance: f64 },

    #[error("operators do not commute: residual {residual:.3e} exceeds {tolerance:.3e}")]
    NonCommuting { residual: f64, tolerance: f64 },

    #[error("matrix is not diagonal in the required eigenbasis: off-diagonal mass {off_diagonal:.3e}")]
    NotDiagonal { off_diagonal: f64 },

    #[error("unitarity violated: ||U U^dag - I|| = {residual:.3e} exceeds {tolerance:.3e}")]
    NotUnitary { residual: f64, tolerance: f64 },

    #[error("probabilities sum to {sum:.17} (must be 1 within {tolerance:.3e})")]
    BadProbabilities { sum: f64, tolerance: f64 },

    #[error("energy conservation violated by unitary {index}: commutator norm {residual:.3e} exceeds {tolerance:.3e}")]
    EnergyNotConserved {
        index: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("inverse temperature must be finite (got {beta})")]
    NonFiniteBeta { beta: f64 },

    #[error("target energy {target:.6} outside the attainable open interval ({min:.6}, {max:.6})")]
    EnergyOutOfRange { target: f64, min: f64, max: f64 },

    #[error("bisection failed to reach tolerance {tolerance:.3e} within {iterations} iterations (residual {residual:.3e})")]
    BisectionFailed {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("smoothing parameter epsilon = {epsilon} outside [0, 1)")]
    BadEpsilon { epsilon: f64 },

    #[error("no state within the epsilon-ball fits under any finite 2^lambda sigma: unremovable mass {unremovable:.3e} > eps/2 = {budget:.3e}")]
    SmoothingInfeasible { unremovable: f64, budget: f64 },

    #[error("Poisson series truncation order {required} exceeds cap {cap}; reduce t or the rates")]
    SeriesTruncation { required: usize, cap: usize },

    #[error("chain length {l} outside supported range {min}..={max}")]
    BadChainLength { l: usize, min: usize, max: usize },

    #[error("region [{anchor}, {end}) does not fit a chain of length {l}")]
    BadRegion { anchor: usize, end: usize, l: usize },

    #[error("disorder strength must be >= 0 (got {delta})")]
    BadDisorderStrength { delta: f64 },

    #[error("energy subspace condition violated at n = {n}: compositions {lhs:?} and {rhs:?} share total energy {energy:.12}")]
    EscViolated {
        n: usize,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
        energy: f64,
    },

    #[error("enumeration budget exceeded: {required} composition pairs, cap {cap}")]
    EnumerationBudget { required: u128, cap: u128 },

    #[error("thermal population p1 = {p1:.6} exceeds 1/2; the counterexample identity requires p1 <= 1/2")]
    PopulationTooLarge { p1: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("runtime failure threshold exceeded: {failed} of {total} items failed (limit {limit_percent}%)")]
    FailureThreshold {
        failed: usize,
        total: usize,
        limit_percent: u8,
    },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
