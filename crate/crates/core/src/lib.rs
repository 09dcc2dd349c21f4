//! Coverage probability of a single-antenna link assisted by several
//! distributed intelligent reflecting surfaces (IRSs) under spatially
//! correlated Rayleigh fading.
//!
//! * [`scenario`]: geometry, radio parameters and path-loss gains.
//! * [`spatialcorr`]: sinc-kernel correlation matrices and sampling factors.
//! * [`dequiv`]: deterministic-equivalent aggregates and closed-form coverage.
//! * [`montecarlo`]: channel sampling and empirical coverage.
//! * [`optimizer`]: projected gradient ascent over unit-modulus phases.
//! * [`config`]: the JSON scenario file.

pub mod config;
pub mod dequiv;
mod error;
pub mod model;
pub mod montecarlo;
pub mod optimizer;
pub mod scenario;
pub mod spatialcorr;

pub use num_complex::Complex64;

pub use crate::dequiv::{DeResult, PhaseConfig, Regime};
pub use crate::error::{Error, Result};
pub use crate::model::SystemModel;
pub use crate::montecarlo::{McConfig, McEstimate};
pub use crate::optimizer::{CoverageProblem, OptimizerConfig};
pub use crate::scenario::{PanelGeometry, PathLossModel, Position, RadioConfig, Scenario};
pub use crate::spatialcorr::{CorrelationMatrix, CorrelationOptions, CorrelationSet};
