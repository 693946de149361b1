use crate::schedule::Qubit;
use crate::time::RationalTime;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("self-coupling on qubit {0}")]
    SelfCoupling(Qubit),

    #[error("coupling ({0}, {1}) references a qubit outside the device")]
    CouplingOutOfRange(Qubit, Qubit),

    #[error("duplicate coupling ({0}, {1})")]
    DuplicateCoupling(Qubit, Qubit),

    #[error("granularity must be positive, got {0}")]
    NonPositiveGranularity(i64),

    #[error("invalid device: {0}")]
    InvalidDevice(String),

    #[error("unknown qubit {qubit} (circuit has {num_qubits})")]
    UnknownQubit { qubit: Qubit, num_qubits: usize },

    #[error("invalid instruction: {0}")]
    InvalidInstruction(String),

    #[error("overlap on qubit {qubit}: instructions at {first} and {second}")]
    Overlap {
        qubit: Qubit,
        first: RationalTime,
        second: RationalTime,
    },

    #[error("inserted gate on qubit {qubit} at {time} collides with an existing instruction")]
    Collision { qubit: Qubit, time: RationalTime },

    #[error("window [{start}, {end}) cannot hold {gates} gates on the device grid")]
    WindowTooSmall {
        start: RationalTime,
        end: RationalTime,
        gates: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dense simulation supports at most {max} qubits, circuit has {actual}")]
    TooManyQubits { max: usize, actual: usize },

    #[error("dense simulation accepts only delays, barriers and X gates; found {0:?}")]
    UnsupportedGate(String),

    #[error("gate on ({0}, {1}) does not follow device coupling")]
    CouplingViolation(Qubit, Qubit),

    #[error("width {width} exceeds device size {available}")]
    WidthTooLarge { width: usize, available: usize },

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),
}

pub type Result<T> = std::result::Result<T, Error>;
