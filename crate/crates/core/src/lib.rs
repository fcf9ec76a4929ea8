//! Certified randomness from phase-diffusion quantum random number
//! generators: simulation, detector characterization, predictability bounds
//! and randomness extraction.

pub mod campaign;
pub mod cdf;
pub mod characterization;
pub mod detection;
pub mod entropy;
pub mod error;
pub mod extractor;
pub mod io;
pub mod laser;
pub mod numeric;
pub mod plot;
pub mod reference;

pub use error::{Error, Result};
