//! Data-driven variable speed limits for a chain-of-cells highway, with a
//! Wasserstein distributionally robust performance certificate.
//!
//! The crate is organised bottom-up:
//!
//! - [`network`]: fundamental diagrams, critical densities, admissible speed bands.
//! - [`sampling`]: disturbance samples and the linear trajectory propagator.
//! - [`certificate`]: exact evaluation of `J(u)` for a fixed profile.
//! - [`lp`]: LP / mixed-binary model types on top of the `microlp` engine.
//! - [`reformulation`]: the mixed-integer reformulation, `UBP_k` and `LBP_k`.
//! - [`issa`]: the integer solution search loop.
//! - [`validation`]: brute force, out-of-sample checks, CTM simulator.
//! - [`config`] and [`io`]: scenario files and CSV outputs.

pub mod certificate;
pub mod config;
pub mod error;
pub mod io;
pub mod issa;
pub mod lp;
pub mod network;
pub mod reformulation;
pub mod sampling;
pub mod validation;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
