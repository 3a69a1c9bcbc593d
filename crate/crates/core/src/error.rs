use thiserror::Error;

/// Errors raised by the scenario, channel, allocation and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid geometry: link distance {distance} m must be positive")]
    InvalidGeometry { distance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("phase vector entry {index} has modulus {modulus}, expected 1")]
    NotUnitModulus { index: usize, modulus: f64 },

    #[error("augmented phase vector must end in exactly 1, found {0}")]
    BadAugmentedTail(String),

    #[error("negative time budget {0}")]
    NegativeBudget(f64),

    #[error("device {0} has no slot assignment")]
    UnassignedDevice(usize),

    #[error("device {device} assigned to slot {slot}, but only {slots} slots exist")]
    SlotOutOfRange {
        device: usize,
        slot: usize,
        slots: usize,
    },

    #[error("number of phase-shift vectors {requested} exceeds number of devices {devices}")]
    TooManyVectors { requested: usize, devices: usize },

    #[error("subproblem start point is not strictly feasible: {0}")]
    InfeasibleStart(String),

    #[error("lifted matrix is degenerate: tau0 = {0}")]
    DegenerateLift(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
