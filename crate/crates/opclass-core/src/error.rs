use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Constructor input violates a type invariant.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two sequences (or the operators built on them) do not share the
    /// head-length / strand-count layout required for entrywise algebra.
    #[error("sequence shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Operands live on different spaces.
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    /// Operation requires an infinite-dimensional space.
    #[error("operation undefined on a finite-dimensional space: {0}")]
    FiniteSpace(&'static str),

    /// A classification precondition failed: the operator is not positive.
    #[error("operator is not positive: {0}")]
    NotPositive(String),

    /// A leading-block eigenvalue sits within tolerance of a decision
    /// threshold; refusing to guess.
    #[error("borderline eigenvalue: {0}")]
    Borderline(String),

    /// A product or sum leaves the representable family.
    #[error("unrepresentable product: {0}")]
    UnrepresentableProduct(String),

    /// Requested witness class was classified No or Indeterminate.
    #[error("operator is not in class {0}")]
    NotInClass(&'static str),

    /// The exact machinery cannot decide this instance.
    #[error("indeterminate: {0}")]
    Indeterminate(String),

    /// Eigensolver failed to converge within the sweep cap.
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal {offdiag:.3e})")]
    ConvergenceFailure { sweeps: usize, offdiag: f64 },

    /// An exact scan would exceed the enumeration budget.
    #[error("exact enumeration budget exceeded while {0}")]
    ScanBudget(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
