use thiserror::Error;

/// Errors shared across the simulation and verification layers.
#[derive(Debug, Error)]
pub enum SimError {
    /// Malformed caller input: bad lengths, signs, ranges, or file contents.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A vector or matrix dimension does not match the expected one.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The requested state would exceed the dense-amplitude qubit cap.
    #[error("resource limit: {qubits} qubits requested, cap is {cap}")]
    ResourceLimit { qubits: usize, cap: usize },

    /// A gate or register matrix failed the unitarity check.
    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NonUnitary { deviation: f64 },

    /// A register name was not found in the layout.
    #[error("unknown register: {0}")]
    UnknownRegister(String),

    /// Target and control qubit sets overlap or repeat.
    #[error("overlapping or repeated qubits in gate application")]
    OverlappingQubits,

    /// Post-selection was requested on an outcome of negligible weight.
    #[error("post-selection impossible: outcome probability {probability:.3e}")]
    PostSelectionImpossible { probability: f64 },

    /// A quantity strayed outside its contract bound.
    #[error("{what} = {value:.6e} outside tolerance {bound:.6e}")]
    OutOfTolerance {
        what: String,
        value: f64,
        bound: f64,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;
