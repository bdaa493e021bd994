use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("lambda applied to {got} arguments but takes {expected}")]
    LambdaArity { expected: usize, got: usize },

    #[error("not a lambda: {0}")]
    NotLambda(String),

    #[error("unsupported proposition form `{0}`")]
    UnsupportedQuery(String),

    #[error("proposition is not ground: {0}")]
    NotGround(String),

    #[error("unknown plan {0}")]
    UnknownPlan(String),

    #[error("unknown node {node} in plan {plan}")]
    UnknownNode { plan: String, node: String },

    #[error("node {0} cannot be substituted (primitive or constraint)")]
    NotSubstitutable(String),

    #[error("unintelligible rejection: no node of {plan} yields {actions}")]
    UnintelligibleRejection { plan: String, actions: String },

    #[error("no plan achieves {0}")]
    NoPlan(String),

    #[error("could not rebuild plan {plan}: {reason}")]
    Rebuild { plan: String, reason: String },

    #[error("not understood: {0}")]
    NotUnderstood(String),

    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },

    #[error("scenario: {0}")]
    Validation(String),

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
