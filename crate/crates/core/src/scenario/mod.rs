//! Scenario driver: configuration, per-slot simulation, Monte Carlo studies,
//! feeder calibration and CSV output.

mod calibrate;
mod config;
mod montecarlo;
pub mod output;
mod run;

pub use calibrate::{calibrate, calibration_voltage, CalibrationResult};
pub use config::{CalibrationSettings, FleetSource, MonteCarloSettings, PolicyKind, ScenarioConfig, CONFIG_VERSION};
pub use montecarlo::{draw_seed, run_monte_carlo, CellStats, DrawResult, MonteCarloReport};
pub use run::{resolve_fleet, run_scenario, simulate, BrdSlot, RunSummary, ScenarioRun, SlotResult, VehicleOutcome};
