//! Simulation toolkit for the driven, dissipative, time-modulated Kerr
//! (quantum Duffing) oscillator.

pub mod analytic;
pub mod check;
pub mod cli;
pub mod config;
pub mod density;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod model;
pub mod qsd;
pub mod semiclassical;
pub mod wigner;

pub use density::DensityMatrix;
pub use error::{Error, Result};
pub use fock::FockVector;
pub use model::OscillatorParams;
pub use num_complex::Complex64;
