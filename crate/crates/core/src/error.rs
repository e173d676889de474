use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("bracket failure: {0}")]
    BracketFailure(String),
    #[error("root not found: {0}")]
    RootNotFound(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    #[error("step-size collapse at t = {t}: {msg}")]
    StepCollapse { t: f64, msg: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("case mismatch: {0}")]
    CaseMismatch(String),
    #[error("missing derivative: {0}")]
    MissingDerivative(String),
    #[error("population cap of {cap} exceeded at generation {generation}")]
    PopulationCap { cap: usize, generation: usize },
    #[error("no survivors: {0}")]
    NoSurvivors(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
