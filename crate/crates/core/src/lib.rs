//! Numerical model of a photon-photon controlled-phase gate built from a
//! chirally coupled V-system emitter with linear-cavity compensation.

pub mod channel;
pub mod error;
pub mod metrics;
pub mod pmpdev;
pub mod quadrature;
pub mod rational;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};
