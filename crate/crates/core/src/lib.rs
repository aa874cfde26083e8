#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dense;
mod error;
pub mod expansion;
pub mod hermite_fourier;
pub mod model;
pub mod montecarlo;
pub mod overdamped;
pub mod quadrature;
pub mod transport;

pub use error::{Error, Result};
