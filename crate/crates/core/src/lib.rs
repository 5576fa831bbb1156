//! Surrogate models for thermophysical property maps.
//!
//! Density is learned as a function of pressure, temperature and carbon count
//! from tabulated data, with exact Gaussian-process regression
//! ([`gp`]), an adversarially trained conditional generative regressor
//! ([`generative`]), and two-level multi-fidelity fusion ([`multifidelity`]).
//! [`metrics`] holds the accuracy and uncertainty scores, [`synthdata`] an
//! analytic density oracle that stands in for expensive simulation data.

pub mod dataset;
pub mod generative;
pub mod gp;
pub mod metrics;
pub mod model;
pub mod multifidelity;
pub mod numerics;
pub mod plot;
pub mod surrogate;
pub mod synthdata;

pub use model::{DensityModel, Prediction};
