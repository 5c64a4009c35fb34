//! Next-frame video prediction on Game-of-Life worlds and natural frames.
//!
//! - [`engine`]: reverse-mode tensor engine (convolutions, pooling, losses, Adam)
//! - [`gol`]: exact Game-of-Life simulator, pattern library and dataset generator
//! - [`data`]: frames, episodes and datasets
//! - [`models`]: the conv/deconv predictor and the hierarchical predictive-coding network
//! - [`training`]: training loops for both model families
//! - [`eval`]: next-frame MSE, the previous-frame baseline and report tables
//! - [`io`]: PGM/PPM frames, dataset manifests, checkpoints and frame ingestion

pub mod data;
pub mod engine;
pub mod error;
pub mod eval;
pub mod gol;
pub mod io;
pub mod models;
pub mod presets;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
