//! Two-stage camera/LiDAR multi-object tracking with cross-stream correction.
//!
//! Each sensor stream is tracked on its own first. The two sets of tracks are
//! then linked by projected overlap, and a track that lost its detection in
//! one stream can be carried by the other. [`sim`] produces deterministic
//! scenes with injected faults and [`eval`] scores the output with CLEAR-MOT.

pub mod affinity;
pub mod association;
pub mod cli;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod motion;
pub mod sim;
pub mod suite;
pub mod tracker;
pub mod types;

pub use error::{Error, Result};
