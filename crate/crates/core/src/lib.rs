//! Oscillation-mode identification with dynamic mode decomposition (DMD)
//! and its multi-resolution variant (MR-DMD).
//!
//! Pipeline: [`ingest`] a measurement, [`stacking::delay_embed`] it into a
//! Hankel snapshot matrix, then run [`dmd::dmd`] over the whole window or
//! [`mrdmd::decompose`] over dyadic time bins. [`modes`] turns discrete
//! eigenvalues into frequencies, growth rates, and importance rankings.

pub mod dmd;
pub mod error;
pub mod ingest;
pub mod modes;
pub mod mrdmd;
pub mod siggen;
pub mod stacking;

pub use error::{Error, Result};
