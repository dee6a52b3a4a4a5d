//! File formats, configuration and the command-line pipeline around
//! `distill-core`.

pub mod checkpoint;
pub mod config;
pub mod csvio;
pub mod error;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{Result, TwinError};
