use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input carries no mass or is otherwise degenerate.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Inconsistent problem instance (grid, family, marginals).
    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    /// Numerical failure inside the simplex solver.
    #[error("solver error: {0}")]
    Solver(String),

    #[error("LP with {variables} variables exceeds the budget of {budget}; {suggestion}")]
    Budget {
        variables: usize,
        budget: usize,
        suggestion: String,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
