use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum DobError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numeric range exceeded: {0}")]
    NumericRange(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("ill-posed plant: {0}")]
    IllPosedPlant(String),

    #[error("normal-form conversion failed: {0}")]
    Conversion(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("design infeasible: {0}")]
    DesignInfeasible(String),

    #[error("unmodelled dynamics: {0}")]
    UnmodelledDynamics(String),

    #[error("controller realization failed: {0}")]
    Realization(String),

    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
}

impl DobError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        DobError::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DobError>;
