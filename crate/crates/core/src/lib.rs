//! Synthetic testbed for vision-aided mmWave beam selection.
//!
//! Camera frames and per-beam power profiles are generated from one shared
//! street geometry, then fed through transmitter identification, tracking and
//! vanishing-point-aware top-N beam prediction, and scored against an
//! exhaustive beam sweep.

pub mod bbox;
pub mod beamnet;
pub mod channel;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod harness;
pub mod identify;
pub mod nn;
pub mod ranking;
pub mod scene;
pub mod track;

pub use bbox::BBox;
pub use error::{Error, Result};
