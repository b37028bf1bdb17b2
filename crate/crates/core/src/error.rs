use thiserror::Error;

/// Everything that can go wrong between parsing a model and emitting a witness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),
    #[error("initial state {0} is not among the kept states")]
    InitialStateDropped(String),
    #[error("initial distribution puts mass on target state {0}")]
    InitialInTarget(String),
    #[error("product exceeds the state cap of {cap}")]
    BlowupLimit { cap: usize },
    #[error("end component {0} carries heterogeneous (u,v) components")]
    InconsistentMec(usize),
    #[error("this system needs an EC-free model")]
    EcFreeRequired,
    #[error("solver gave no usable answer: {0}")]
    SolverUnknown(String),
    #[error("certificate shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("strict bounds are not supported here: {0}")]
    StrictUnsupported(String),
    #[error("weight vector does not separate: {0}")]
    SeparationFailed(String),
    #[error("expected frequencies diverge at state {0}")]
    Divergent(String),
    #[error("chain is not strongly connected")]
    NotStronglyConnected,
    #[error("not a distribution: {0}")]
    NotDistribution(String),
    #[error("end component {0} receives no entry mass")]
    NoEntryMass(usize),
    #[error("solver backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("exact arithmetic requested but {0} has no exact value")]
    InexactValue(String),
    #[error("the query does not hold, so it has no witness")]
    NotSatisfied,
    #[error("numerical check failed: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
