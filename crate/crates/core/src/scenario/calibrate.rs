//! Fits a uniform impedance scale so the uncoordinated regime hits a target
//! reference-node voltage.

use crate::error::{Error, Result};
use crate::network::FeederModel;

use super::config::{PolicyKind, ScenarioConfig};
use super::montecarlo::run_monte_carlo;

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub feeder: FeederModel<f64>,
    pub scale: f64,
    pub achieved_v: f64,
    pub iterations: usize,
}

/// Mean reference-node minimum voltage of uncoordinated charging with
/// `settings.vehicles` EVs over the configured Monte Carlo draws, on `feeder`.
pub fn calibration_voltage(config: &ScenarioConfig, feeder: &FeederModel<f64>) -> Result<f64> {
    let mut cfg = config.clone();
    cfg.feeder = feeder.clone();
    let n = config.calibrate.vehicles;
    let report = run_monte_carlo(&cfg, config.montecarlo.draws, &[n], &[PolicyKind::Uncoordinated])?;
    Ok(report.cells[0].mean)
}

/// Bisects the impedance scale of `config.feeder` on
/// `[scale_lo, scale_hi]` (geometric midpoints; the voltage falls as the scale
/// grows) until the calibration voltage is within tolerance of the target.
pub fn calibrate(config: &ScenarioConfig) -> Result<CalibrationResult> {
    let s = &config.calibrate;
    let at = |scale: f64| -> Result<(FeederModel<f64>, f64)> {
        let feeder = config.feeder.with_impedance_scale(scale)?;
        // Heavy scales may not have a load-flow solution; treat that as "too low".
        match calibration_voltage(config, &feeder) {
            Ok(v) => Ok((feeder, v)),
            Err(Error::Divergence { .. }) | Err(Error::Numerical(_)) => Ok((feeder, f64::NEG_INFINITY)),
            Err(e) => Err(e),
        }
    };
    let (mut lo, mut hi) = (s.scale_lo, s.scale_hi);
    let (_, v_lo) = at(lo)?;
    let (_, v_hi) = at(hi)?;
    if !(v_lo >= s.target_v && v_hi <= s.target_v) {
        return Err(Error::Config(format!(
            "target {} pu is not bracketed by scales [{lo}, {hi}] (voltages {v_lo:.4}, {v_hi:.4})",
            s.target_v
        )));
    }
    for iterations in 1..=200 {
        let mid = (lo * hi).sqrt();
        let (feeder, v) = at(mid)?;
        if (v - s.target_v).abs() <= s.tolerance {
            return Ok(CalibrationResult { feeder, scale: mid, achieved_v: v, iterations });
        }
        if v > s.target_v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical(format!("calibration did not reach {} pu within 200 bisections", s.target_v)))
}
