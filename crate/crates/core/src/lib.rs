//! Pulse-level simulation of the Cirac–Zoller trapped-ion quantum computer.
//!
//! Two state-space models are provided. The full model keeps all three ion
//! levels (`g`, `e0`, `e1`) per qubit plus one shared phonon mode, so a state
//! over `M` qubits holds `2·3^M` amplitudes. The reduced model keeps two
//! levels per qubit and lumps every excursion through the auxiliary level into
//! one extra amplitude plane, for `2^(M+2)` amplitudes in total.
//!
//! Gates are lowered to sequences of laser pulses (`V`, `U`, `Û`, `Ũ`), each
//! of which may carry injected angle errors, and every pulse may be followed
//! by a phonon decoherence step. Benchmark circuits (table-lookup and
//! repeated-squaring modular exponentiation, Grover search) live in
//! [`circuits`]; fidelity, correlation and sweep machinery in [`analysis`].
//!
//! All state-vector math is generic over the floating-point type through
//! [`Scalar`]; the aliases at the crate root pick the usual instantiations.

// `!(x > 0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod circuits;
mod error;
pub mod errors;
pub mod gates;
pub mod oracle;
pub mod pulse;
mod scalar;
pub mod statespace;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use num_complex::Complex;

/// Double-precision state, the default for every experiment.
pub type State = statespace::QuantumState<f64>;
/// Single-precision state, useful for memory-bound sweeps.
pub type StateF32 = statespace::QuantumState<f32>;
/// Double-precision complex amplitude.
pub type Amplitude = Complex<f64>;
