//! Adaptive auxin transport networks on graphs.
pub mod analysis;
pub mod config;
pub mod continuum;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod render;
pub mod solver;
pub use error::{Error, Result};
