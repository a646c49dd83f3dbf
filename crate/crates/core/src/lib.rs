//! Non-Hermitian coupled-resonator model of photon modes sharing one
//! microstrip channel.
//!
//! * [`model`]: effective Hamiltonian, eigenvalue branches, S21 synthesis
//! * [`analysis`]: Friedrich-Wintgen BIC location, regime labels, spectral features
//! * [`sweep`]: split-gap calibration, 2D sweeps and the two device presets
//! * [`fit`]: bounded simplex least-squares estimation of model parameters
//! * [`io`]: Touchstone, spectrum CSV, model configuration and sweep export

pub mod analysis;
pub mod error;
pub mod fit;
pub mod io;
pub mod linalg;
pub mod model;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{ComplexFrequency, CouplingModel, ModeParams, SpectrumGrid};
