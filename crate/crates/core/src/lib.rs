//! People-counting pipeline for entry/exit monitoring.
//!
//! The crate ingests raw video (PGM/PPM sequences or YUV4MPEG2), separates
//! moving people from the scene with a per-pixel adaptive Gaussian-mixture
//! background model, groups foreground pixels into blobs, associates blobs
//! across frames into tracks, and converts track trajectories into enter/exit
//! events at a configurable counting line. A synthetic scene generator and a
//! precision/recall/F1 evaluation harness make every stage testable against
//! exact ground truth end to end.

pub mod blob;
pub mod config;
pub mod counter;
mod error;
pub mod eval;
pub mod mog2;
pub mod pipeline;
pub mod synth;
pub mod tracker;
pub mod video_io;

pub use error::{Error, Result};
