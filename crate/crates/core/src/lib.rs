//! Prediction, optimization and event-level simulation for polarization-entangled
//! two-photon Clauser-Horne tests.
//!
//! All angles are radians measured from the vertical polarization axis; all
//! rates are per second. See [`state`] for the angle convention.

pub mod ch;
pub mod cli;
pub mod config;
pub mod error;
pub mod lhv;
pub mod montecarlo;
pub mod optimize;
pub mod state;

pub use error::{ModelError, Result};
