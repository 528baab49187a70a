//! Phase estimation with squeezed-displaced probes under phase diffusion.
//!
//! The crate builds single-mode states in a truncated Fock basis, applies the
//! Gaussian phase-diffusion channel either after squeezing (scenario a) or
//! between displacement and squeezing (scenario b), and evaluates
//!
//! * the quantum Fisher information from the fidelity between neighbouring
//!   phase-encoded states,
//! * the classical Fisher information of Ŷ-homodyne detection,
//! * Wigner functions, from the Fock matrix or as a Gaussian mixture.
//!
//! The [`sweep`] module drives parameter grids and writes CSV/JSON data.

pub mod channels;
pub mod error;
pub mod fock;
pub mod homodyne;
pub mod linalg;
pub mod metrology;
pub mod sweep;
pub mod verify;
pub mod wigner;

pub use channels::{Ordering, PhaseNoise, ScenarioSpec};
pub use error::{Error, Result};
pub use fock::{DensityMatrix, ProbeParams, TruncatedOperator, TruncationConfig};
pub use metrology::{FiEstimate, QfiEstimate};
pub use sweep::{SweepConfig, SweepResult};
pub use wigner::{PhaseSpaceGrid, WignerField};
