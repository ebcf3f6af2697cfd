use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes of operations, vectors or coefficient arrays do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A value violates a type invariant (non-finite entry, bad parameter).
    #[error("validation error: {0}")]
    Validation(String),

    /// A composition slot index outside `0..=|f|`.
    #[error("slot index {index} out of range 0..={max}")]
    Index { index: usize, max: usize },

    /// An operation has the wrong arity for the requested construction.
    #[error("arity error: {0}")]
    Arity(String),

    /// The zero-energy phase point, where the auxiliary functions degenerate.
    #[error("degenerate energy: H = 0 at q = {q}, p = {p}")]
    DegenerateState { q: f64, p: f64 },

    /// A finite-difference stencil straddles the principal branch cut.
    #[error("finite-difference stencil crosses the branch cut (angular margin {margin:.3e} < {required:.3e})")]
    BranchCut { margin: f64, required: f64 },

    /// The integrator produced a non-finite value.
    #[error("integration diverged at t = {t}")]
    Divergence { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
