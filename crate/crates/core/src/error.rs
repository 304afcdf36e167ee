use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("gate acts twice on qubit {0}")]
    DuplicateTarget(usize),
    #[error("non-finite rotation angle {0}")]
    NonFiniteAngle(f64),
    #[error("register must contain at least one qubit")]
    EmptyRegister,
    #[error("register of {0} qubits exceeds the dense simulation limit")]
    RegisterTooLarge(usize),
    #[error("diagonal phase of length {got} does not match register dimension {expected}")]
    PhaseLength { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shot count must be positive")]
    ZeroShots,
    #[error("probability distribution is not normalized (sum = {0})")]
    Unnormalized(f64),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("solver did not converge after {iterations} pair updates (violation {violation:e})")]
    NotConverged { iterations: usize, violation: f64 },
    #[error("dual objective is unbounded after {iterations} pair updates; the kernel plus I/C is not positive semidefinite")]
    Unbounded { iterations: usize },
    #[error("class {label} has {available} members, {required} required")]
    InsufficientClass { label: i8, available: usize, required: usize },
    #[error("qubit {0} was never prepared in both basis states")]
    Coverage(usize),
    #[error("graph has no simple path with {0} nodes")]
    NoPath(usize),
    #[error("nodes {0} and {1} are not adjacent")]
    NotAdjacent(u32, u32),
    #[error("path visits node {0} twice")]
    RepeatedNode(u32),
    #[error("unknown node {0}")]
    UnknownNode(u32),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
