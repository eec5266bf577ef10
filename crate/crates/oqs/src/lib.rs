//! Open-quantum-system dynamics for qubits and collective spins coupled to
//! bosonic or spin environments.
//!
//! * [`qcore`] – density matrices and small-space linear algebra
//! * [`bath`] – spectral densities, influence functions, correlation functions
//! * [`spinspin_exact`] – exact qubit dynamics in a spin environment
//! * [`dephasing_exact`] – exact collective pure dephasing with correlated preparations
//! * [`corrme`] – second-order master equation with initial-correlation term
//! * [`probe`] – qubit probes: quantum and classical Fisher information
//! * [`fcs`] – counting statistics of energy exchange with the bath

pub mod error;
pub mod fcs;
pub mod bath;
pub mod corrme;
pub mod dephasing_exact;
pub mod probe;
pub mod qcore;
pub mod spinspin_exact;

pub use error::{Error, Result};
pub use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMat = qcore::CMatrix<f64>;
pub type DensityMatrix = qcore::DensityMatrix<f64>;
pub type BlochVector = qcore::BlochVector<f64>;
pub type CollectiveSpinOps = qcore::CollectiveSpinOps<f64>;
