//! Quantum kernel support vector machines on a statevector simulator.
//!
//! The crate covers the full pipeline: feature preprocessing, circuit
//! encoders, exact and shot-sampled kernel estimation, readout-error
//! mitigation, SVM training with cross validation, and qubit selection on a
//! device graph. The experiment drivers used by the command line live in
//! [`experiments`].

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod encoders;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod kernel;
pub mod preprocess;
pub mod qubit_select;
pub mod readout;
pub mod rng;
pub mod simulator;
pub mod svm;

pub use encoders::{Ansatz, Type1Config, Type2Config};
pub use error::{Error, Result};
pub use exec::Execution;
pub use kernel::{KernelEvaluator, KernelMatrix, Shots};
pub use readout::BitflipRates;
pub use simulator::{Gate, StateVector};
pub use svm::{Penalty, SvmModel};
