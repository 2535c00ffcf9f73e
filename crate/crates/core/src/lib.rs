//! Bayesian regression under informative sampling designs.

pub mod designs;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod splines;

pub use error::{Error, Result};
