use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state of {requested} bytes exceeds the memory cap of {cap} bytes")]
    Capacity { requested: u128, cap: u64 },

    #[error("qubit {qubit} out of range for a {num_qubits}-qubit state")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("states are incompatible: {0}")]
    Mismatch(String),

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("qubit {qubit} carries auxiliary-level weight {weight:e}; measurement is undefined")]
    AuxiliaryWeight { qubit: usize, weight: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("deviation {deviation:e} exceeds tolerance {tolerance:e}")]
    Tolerance { deviation: f64, tolerance: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
