//! Decentralized EV charging coordination for voltage regulation on
//! low-voltage radial feeders.
//!
//! The numerical core ([`network`], [`fleet`], [`metrics`], [`coordination`],
//! [`baselines`]) is generic over a [`Real`] scalar; the aliases below fix it
//! to `f64`, which is what the [`scenario`] driver and the CLI use.

pub mod baselines;
pub mod coordination;
pub mod error;
pub mod fleet;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Feeder = network::FeederModel<f64>;
pub type FeederF32 = network::FeederModel<f32>;
pub type Solution = network::LoadFlowSolution<f64>;
pub type Sensitivity = network::SensitivityMatrix<f64>;
pub type Vehicle = fleet::Vehicle<f64>;
pub type Bounds = fleet::PowerBounds<f64>;
pub type Context = metrics::ObjectiveContext<f64>;
pub type Band = metrics::VoltageBand<f64>;
pub type Profile = coordination::ChargingProfile<f64>;
pub type Droop = baselines::DroopCurve<f64>;
