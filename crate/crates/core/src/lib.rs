//! Tilted empirical risk minimization between the mean-loss (utilitarian)
//! and worst-case-loss (Rawlsian) objectives.
//!
//! The tilted objective `(1/lambda) ln((1/n) sum exp(lambda l_i))` of
//! per-sample losses `l_i` is implemented in [`loss_core`]; [`models`]
//! provides differentiable model families, [`solver`] minimizes the
//! objective and sweeps the tilt, [`frontier`] turns sweeps into
//! average-versus-worst-case loss records, and [`verify`] runs numerical
//! checks of the objective's theoretical properties.

pub mod cli;
pub mod data;
pub mod error;
pub mod frontier;
pub mod loss_core;
pub mod models;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
