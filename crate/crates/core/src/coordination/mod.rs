//! Best-response dynamics between the aggregator and the connected vehicles.
//!
//! Within a slot every vehicle scores candidate powers with the linearized
//! voltage prediction held in an [`ObjectiveContext`](crate::metrics::ObjectiveContext).
//! The aggregator recomputes predicted pilot voltages after each asynchronous
//! update, or once per round when all vehicles move together.

mod best_response;
mod brd;
mod trace;

pub use best_response::{best_response, Game, Player};
pub use brd::{run_slot_brd, BrdOutcome, ChargingProfile, Schedule, Scope, PolicyConfig, TerminationCause, UpdateOrder};
pub use trace::{detect_cycle, quantize_profile, IterationTrace, TraceEntry, Updater};

/// Minimum decrease of a vehicle's own objective for an update to be applied.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-10;
/// Resolution (kW) at which profiles are compared for cycle detection.
pub const PROFILE_QUANTUM_KW: f64 = 1e-9;
