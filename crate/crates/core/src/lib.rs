pub mod app;
pub mod config;
pub mod coupling;
pub mod discretize;
mod error;
pub mod evolve;
pub mod io;
pub mod kernels;
pub mod modulus;
mod quad;
pub mod spectral;

pub use error::{Error, Result};
