//! Comparison policies: uncoordinated charging and voltage-droop charging.

use crate::coordination::ChargingProfile;
use crate::fleet::{PowerBounds, SocState, Vehicle};
use crate::error::{Error, Result};
use crate::network::{FeederModel, LoadFlowSolution};
use crate::scalar::Real;

/// Piecewise-linear droop characteristic: zero power up to `v_zero`, a linear
/// ramp to `p_ceiling` at `v_full`, flat afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopCurve<T> {
    pub v_zero: T,
    pub v_full: T,
    pub p_ceiling: T,
}

impl<T: Real> DroopCurve<T> {
    pub fn new(v_zero: T, v_full: T, p_ceiling: T) -> Result<Self> {
        if !(v_zero < v_full) || !(p_ceiling > T::zero()) {
            return Err(Error::Config(format!(
                "droop curve needs v_zero < v_full and p_ceiling > 0 (got {v_zero}, {v_full}, {p_ceiling})"
            )));
        }
        Ok(Self { v_zero, v_full, p_ceiling })
    }

    /// Curve value before any bounds are applied.
    pub fn raw(&self, v: T) -> T {
        if v <= self.v_zero {
            T::zero()
        } else if v >= self.v_full {
            self.p_ceiling
        } else {
            self.p_ceiling * (v - self.v_zero) / (self.v_full - self.v_zero)
        }
    }
}

impl<T: Real> Default for DroopCurve<T> {
    /// The 0.90 / 0.95 pu, 3.3 kW profile.
    fn default() -> Self {
        Self {
            v_zero: T::lit(0.90),
            v_full: T::lit(0.95),
            p_ceiling: T::lit(3.3),
        }
    }
}

/// Droop response to a local voltage, clamped into the vehicle's bounds.
/// The bounds win: a deadline floor lifts the power above the curve.
pub fn droop_power<T: Real>(v_local: T, curve: &DroopCurve<T>, bounds: &PowerBounds<T>) -> T {
    bounds.clamp(curve.raw(v_local))
}

/// Charge as fast as allowed from the moment of connection.
pub fn uncoordinated_power<T: Real>(vehicle: &Vehicle<T>, state: &SocState<T>, slot: usize, bounds: &PowerBounds<T>) -> T {
    if !vehicle.is_present(slot) || state.soc_now >= vehicle.soc_max {
        return T::zero();
    }
    bounds.p_hi
}

/// Droop for every connected vehicle, reading each one's bus voltage from the
/// previous slot's load flow.
///
/// `vehicles` pairs each vehicle with its bounds for this slot.
pub fn run_slot_droop<T: Real>(
    model: &FeederModel<T>,
    vehicles: &[(&Vehicle<T>, PowerBounds<T>)],
    previous: &LoadFlowSolution<T>,
    curve: &DroopCurve<T>,
) -> Result<ChargingProfile<T>> {
    let mut profile = ChargingProfile {
        vehicle_ids: Vec::with_capacity(vehicles.len()),
        p_kw: Vec::with_capacity(vehicles.len()),
    };
    for (v, bounds) in vehicles {
        let idx = model
            .index_of(v.node)
            .ok_or_else(|| Error::Config(format!("vehicle {} sits on unknown node {}", v.id, v.node)))?;
        profile.vehicle_ids.push(v.id);
        profile.p_kw.push(droop_power(previous.v_mag[idx], curve, bounds));
    }
    Ok(profile)
}
