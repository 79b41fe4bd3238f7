//! Simulation library for iterative-learning-control (ILC) digital
//! pre-distortion with a reference-level-controlled capture path.
//!
//! The signal chain mirrors a DPD lab bench: an OFDM stimulus drives a
//! behavioral power amplifier, the output is captured through a model of
//! the analyzer front end (noise, fractional delay, resampling, and a
//! uniform or logarithmic-companding quantizer), and an ILC loop refines
//! the drive waveform until the captured output tracks the reference.
//! A generalized memory polynomial can then be fitted to the converged
//! ILC trajectories by least squares to obtain a standalone predistorter.
//!
//! Modules follow the chain: [`waveform`] generation, [`pa`] behavioral
//! amplifier, [`capture`] front end and quantizer, [`align`] delay/gain
//! estimation, [`ilc`] iteration engine, [`gmp`] polynomial fitting, and
//! [`metrics`] scoring (NMSE, EVM, PSD, AM-AM/AM-PM).

// Validation guards are written `!(x > 0.0)` instead of `x <= 0.0` so that
// NaN fails them too; the negated form is load-bearing.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod capture;
pub mod error;
pub mod gmp;
pub mod ilc;
pub mod io;
pub mod metrics;
pub mod pa;
pub mod waveform;

mod fft;
mod sinc;

pub use error::{Error, Result};
pub use waveform::ComplexWaveform;
