//! Simulation and analysis toolkit for long-fiber Sagnac interferometers.
//!
//! The crate models Rayleigh backscatter in a fiber ring as a linear
//! time-invariant system, synthesizes length-scaled phase noise, converts
//! both into detector observables (classical traces or single-photon
//! timestamps) and provides the estimators used to analyze them: phase
//! extraction, subset variance, power-law and OTDR fits, Welch PSD,
//! Fourier burst-timing recovery and windowed visibility.

pub mod analysis;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod fiber;
pub mod noise;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod signal;
pub mod units;

pub use error::{Error, Result};
