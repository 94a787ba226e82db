//! Simulation and analysis library for co-frequency interference management in
//! spectrum-sharing satellite-ground integrated networks.
//!
//! Two LEO constellations (NGSO 1 and NGSO 2) share a band with a terrestrial
//! cellular layer. The crate covers orbit geometry and beam coverage, antenna
//! and propagation models, Shadowed-Rician and Rayleigh fading, per-user SINR
//! assembly, beam shut-off/switching, learned power allocation, and closed-form
//! and Monte Carlo outage probability.

pub mod allocation;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod link;
pub mod outage;
pub mod rf;
pub mod scenario;
pub mod scheduling;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
