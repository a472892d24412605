use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("action has {got} entries, network has {expected} intersections")]
    ActionArity { expected: usize, got: usize },
    #[error("configuration index {index} at intersection #{intersection} out of range (has {available})")]
    ActionIndex {
        intersection: usize,
        index: usize,
        available: usize,
    },
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("disturbance outside the admissible box")]
    DisturbanceOutOfBox,
    #[error("plan length mismatch: {actions} actions, {inflows} inflow vectors")]
    PlanLength { actions: usize, inflows: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("active-set iteration limit reached")]
    IterationLimit,
    #[error("invalid problem: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver failed: {0}")]
    Solve(#[from] SolveError),
    #[error("invalid controller input: {0}")]
    Input(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("network is invalid:\n{0}")]
    Network(String),
}

impl ScenarioError {
    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Field {
            field: field.into(),
            message: message.into(),
        }
    }
}
