//! Recurrent state estimators for noisy discrete-time dynamical systems.
//!
//! The crate compares four recurrent architectures against model-based
//! Kalman filtering on three benchmark systems:
//!
//! * [`dynamics`] builds the benchmark systems (a chain of ten damped springs,
//!   a damped pendulum and a reversed Van der Pol oscillator), discretizes them
//!   and generates noisy trajectory datasets.
//! * [`filters`] holds the Kalman filter and extended Kalman filter baselines.
//! * [`networks`] implements Elman and Jordan recurrent networks (ERN, JRN)
//!   and their LSTM counterparts (ELSTM, JLSTM), with exact gradients by
//!   backpropagation through time.
//! * [`training`] runs Adam with early stopping on validation loss.
//! * [`evaluation`] computes per-step error curves, NMSE and inference timing.
//! * [`experiment`] wires everything into reproducible end-to-end runs; the
//!   `jlstm` binary is a thin command-line front end over it.

pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod filters;
pub mod linalg;
pub mod networks;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
