//! Protection of a single cavity-mode state by atom-mediated feedback.
//!
//! Two feedback schemes are modelled on a truncated Fock basis:
//!
//! * [`continuous`]: photodetection feedback for optical cavities, where each
//!   detected photon triggers the injection of an atom that returns exactly one
//!   photon by adiabatic passage. The resulting master equation is vacuum
//!   damping at rate `(1-eta) gamma` plus square-root phase diffusion.
//! * [`strobo`]: the microwave variant, where dispersive probe atoms measure
//!   photon-number parity every interval `T` and a resonant atom is injected
//!   after each parity flip.
//!
//! Supporting modules provide the Fock-space primitives ([`fock`]), Wigner
//! functions ([`wigner`]), polarization-qubit protection analysis ([`qubit`])
//! and a numerical check of the three-level adiabatic transfer that realises
//! the one-photon feedback ([`adiabatic`]).

pub mod adiabatic;
pub mod continuous;
pub mod error;
pub mod expm;
pub mod fock;
pub mod qubit;
pub mod strobo;
pub mod wigner;

mod special;

pub use error::{Error, Result};
pub use fock::{CatParity, DensityMatrix, FockDim, StateVector};

pub use num_complex::Complex64 as C64;

/// Library version recorded in output provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
