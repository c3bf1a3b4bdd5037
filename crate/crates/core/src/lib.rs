//! Modulation design toolkit for dual active bridge converters: phase-shift
//! modulation, steady-state simulation, waveform metrics, metaheuristic
//! search and the design loop that ties them together.

pub mod converter;
pub mod dataset;
pub mod design;
pub mod error;
pub mod metrics;
pub mod optim;
pub mod sim;

pub use error::{Error, Result};
