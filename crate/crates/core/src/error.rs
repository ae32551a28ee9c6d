use thiserror::Error;

/// Everything that can go wrong while parsing, solving or verifying.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },

    #[error("derivative order {order} of x{index} exceeds problem order {max}")]
    OrderExceeded { index: usize, order: usize, max: usize },

    #[error("component index x{index} exceeds dimension {max}")]
    IndexExceeded { index: usize, max: usize },

    #[error("unknown identifier `{name}` at column {column}")]
    UnknownIdentifier { name: String, column: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid interval [{a}, {b}]: need a < b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("variable out of bounds: {0}")]
    VariableOutOfBounds(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite state at node {node}")]
    NonFiniteState { node: usize },

    #[error("grid too coarse: {nodes} nodes cannot support derivative order {order}")]
    GridTooCoarse { nodes: usize, order: usize },

    #[error("singular control: d2L/du2 is not invertible ({0})")]
    SingularControl(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("family is not the identity at s = 0 (deviation {deviation:e} at node {node})")]
    IdentityViolation { node: usize, deviation: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
