//! Scattering-type transforms of stationary Gaussian processes: spectral
//! models, analytic wavelets, chaos expansions of radial nonlinearities,
//! Gaussian path synthesis and quantitative CLT bounds.

pub mod bounds;
pub mod chaos;
pub mod error;
pub mod gpsim;
pub mod harness;
pub mod quad;
pub mod spectra;
pub mod transform;
pub mod wavelets;

pub use error::{Error, Result};
