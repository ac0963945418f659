use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("expected {expected} components, found {found}")]
    ComponentCount { expected: usize, found: usize },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("domain error in component {component}: {msg}")]
    Domain { component: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("frame degenerate: smallest singular value {sigma:.3e}")]
    DegenerateFrame { sigma: f64 },

    #[error("vector not in distribution: residual {residual:.3e} exceeds {tol:.1e}")]
    Membership { residual: f64, tol: f64 },

    #[error("integration failed at t = {t}: {msg}")]
    Integration { t: f64, msg: String },

    #[error("L tangent to W: rho = {rho:.3e} at t = {t}")]
    TangentToW { rho: f64, t: f64 },

    #[error("flow does not preserve the distribution numerically: residual {residual:.3e} at t = {t}")]
    FlowNotPreserving { residual: f64, t: f64 },

    #[error("angle unwrapping failed after {refinements} refinements")]
    Unwrap { refinements: usize },

    #[error("closure defect {defect:.3e} exceeds orbit tolerance {tol:.1e}")]
    ClosureDefect { defect: f64, tol: f64 },

    #[error("degenerate induced map: |det| = {det:.3e}")]
    DegenerateMonodromy { det: f64 },

    #[error("monodromy not normalized: |det| = {det}")]
    NotNormalized { det: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("degenerate return map: {0}")]
    DegenerateReturn(String),

    #[error("ambiguous orbit class for `{0}`: refusing to decide")]
    AmbiguousOrbit(String),

    #[error("cycle in orbit graph: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid mismatch: {0} vs {1} samples")]
    GridMismatch(usize, usize),

    #[error("unknown scene `{0}`")]
    UnknownScene(String),

    #[error("unknown orbit `{0}`")]
    UnknownOrbit(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("scene validation failed ({check}): {msg}")]
    Validation { check: String, msg: String },

    #[error("io: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
