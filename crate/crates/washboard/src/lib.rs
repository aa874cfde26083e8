//! Configuration, CSV output, parallel sweeps and the command line for
//! `washboard-core`.

pub mod cli;
pub mod config;
mod error;
pub mod presets;
pub mod sweep;
pub mod table;

pub use error::{Error, Result};
