//! Feeder model, AC load flow and voltage sensitivities.

mod admittance;
mod feeder;
mod jacobian;
mod loadflow;
mod sensitivity;
pub mod surrogate;

pub use admittance::{assemble_admittance, Admittance};
pub use feeder::{Bus, FeederModel, Line};
pub use jacobian::{compute_jacobian, jacobian_at, Jacobian, JacobianBlocks};
pub use loadflow::{
    load_injections, power_injections, solve_load_flow, solve_load_flow_with, LoadFlowOptions, LoadFlowSolution,
};
pub use sensitivity::{extract_sensitivity, SensitivityMatrix};
