use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Inputs whose shapes do not conform (vector lengths, stage layouts, matrix sizes).
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A probability space or partition violating its invariants.
    #[error("invalid probability space: {0}")]
    InvalidSpace(String),
    /// Measure parameters outside their admissible range.
    #[error("invalid measure parameters: {0}")]
    InvalidMeasure(String),
    /// The requested operation is not defined for this measure kind.
    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),
    /// The trade-off `y + V(X - y)` is unbounded below, so `V` induces no risk measure.
    #[error("regret does not induce a risk measure: y + V(X - y) is unbounded below")]
    UnboundedBelow,
    /// A one-dimensional root or minimum search failed to bracket or converge.
    #[error("search did not converge: {0}")]
    NoConvergence(String),
    /// A scenario subproblem has no feasible point.
    #[error("scenario {id} subproblem is infeasible")]
    ScenarioInfeasible { id: u64 },
    /// A scenario subproblem hit the inner iteration cap.
    #[error("scenario {id} subproblem did not converge")]
    ScenarioNotSolved { id: u64 },
    /// Invalid algorithm configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// The extensive form would exceed the dense size guard.
    #[error("extensive form too large: {vars} variables (limit {limit})")]
    TooLarge { vars: usize, limit: usize },
}
