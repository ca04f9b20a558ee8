//! Strain gradient plasticity model of micro-pillar compression with
//! variance-based sensitivity analysis, Bayesian calibration by MCMC and
//! forward uncertainty propagation.

pub mod curve;
pub mod data;
pub mod error;
pub mod fem;
pub mod inference;
pub mod material;
pub mod model;
pub mod qoi;
pub mod rng;
pub mod sampling;
pub mod sensitivity;

pub use curve::StressStrainCurve;
pub use error::{Error, Result};
pub use material::SgpParams;
