use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} is out of range 1..={n}")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("node sets overlap: {0:?}")]
    Overlap(Vec<usize>),

    /// A disturbance-to-target path contains no node that may carry an actuator.
    #[error("infeasible placement: path {path:?} contains no admissible cut node")]
    Infeasible { path: Vec<usize> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("coupling graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("total damping must be positive, got {0}")]
    ZeroDamping(f64),

    #[error(
        "equilibrium solver did not converge: residual {residual:e} after {iterations} iterations"
    )]
    NoConvergence { residual: f64, iterations: usize },

    #[error("equilibrium is not cohesive: max edge phase gap {margin} >= pi/2")]
    NotCohesive { margin: f64 },

    #[error("singular mass matrix: diagonal entry {index} is {value}")]
    SingularE { index: usize, value: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("invalid case: {0}")]
    InvalidCase(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("eigenvalue computation failed")]
    Eigen,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
