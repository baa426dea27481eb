//! Positive-P simulation and moment analytics for the three-mode optical
//! parametric oscillator below threshold.
//!
//! The crate integrates the full nonlinear Ito equations for the pump,
//! signal and idler amplitudes, estimates centered moments up to fourth
//! order with batch error bars, and evaluates Cauchy-Schwarz and related
//! nonclassicality criteria against closed-form perturbative predictions.

pub mod analytic;
pub mod criteria;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod moments;
pub mod noise;
pub mod sde;

pub use error::{Error, Result};
pub use model::{derive_params, ModelParams, PhaseSpaceState, QuadratureSample};
pub use moments::{Estimate, Moment, MomentAccumulator, MomentEstimate, MomentReport};
pub use sde::{Scheme, SimConfig, TrajectoryResult};
