//! Electric-vehicle population: state of charge, per-slot power bounds and
//! seeded fleet sampling.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const BATTERY_KWH: f64 = 24.0;
pub const RANGE_KM: f64 = 150.0;
pub const DEFAULT_P_MAX_KW: f64 = 3.3;
pub const P_MAX_RANGE_KW: (f64, f64) = (3.0, 48.0);

/// Energy in kWh to drive `distance_km` with a 24 kWh / 150 km battery.
pub fn energy_need_from_distance(distance_km: f64) -> Result<f64> {
    if !(distance_km >= 0.0) {
        return Err(Error::Domain(format!("distance must be non-negative, got {distance_km}")));
    }
    Ok(distance_km * (BATTERY_KWH / RANGE_KM))
}

/// Slack allowed on state-of-charge comparisons, scaled to battery size and precision.
pub fn soc_tolerance<T: Real>(soc_max: T) -> T {
    soc_max.max(T::one()) * T::epsilon().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle<T> {
    pub id: usize,
    /// Bus id the charger is connected to.
    pub node: usize,
    pub soc_init: T,
    /// Energy required at departure (kWh).
    pub soc_min: T,
    pub soc_max: T,
    pub p_max: T,
    /// First slot the vehicle may charge in.
    pub arrival_slot: usize,
    /// First slot after the vehicle has left.
    pub departure_slot: usize,
}

impl<T: Real> Vehicle<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("vehicle {}: {msg}", self.id)));
        if !(self.soc_init >= T::zero() && self.soc_init <= self.soc_max) {
            return bad(format!("soc_init {} outside [0, {}]", self.soc_init, self.soc_max));
        }
        if !(self.soc_min <= self.soc_max) {
            return bad(format!("soc_min {} exceeds soc_max {}", self.soc_min, self.soc_max));
        }
        if self.arrival_slot >= self.departure_slot {
            return bad(format!("arrival slot {} not before departure slot {}", self.arrival_slot, self.departure_slot));
        }
        let (lo, hi) = P_MAX_RANGE_KW;
        if !(self.p_max >= T::lit(lo) && self.p_max <= T::lit(hi)) {
            return bad(format!("p_max {} kW outside [{lo}, {hi}]", self.p_max));
        }
        Ok(())
    }

    pub fn is_present(&self, slot: usize) -> bool {
        self.arrival_slot <= slot && slot < self.departure_slot
    }

    pub fn initial_state(&self) -> SocState<T> {
        SocState {
            vehicle: self.id,
            soc_now: self.soc_init,
            slot: self.arrival_slot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocState<T> {
    pub vehicle: usize,
    pub soc_now: T,
    pub slot: usize,
}

/// Admissible charging power for one slot, `p_lo ≤ p ≤ p_hi` (kW).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBounds<T> {
    pub p_lo: T,
    pub p_hi: T,
}

impl<T: Real> PowerBounds<T> {
    pub fn contains(&self, p: T) -> bool {
        p >= self.p_lo && p <= self.p_hi
    }

    pub fn clamp(&self, p: T) -> T {
        p.max(self.p_lo).min(self.p_hi)
    }
}

/// Bounds that keep the departure requirement reachable and the battery
/// below capacity:
/// `p_hi = min(p_max, (soc_max − soc)/Δt)`,
/// `p_lo = max(0, (soc_min − soc)/Δt − p_max·r)` with `r` slots left after this one.
pub fn power_bounds<T: Real>(vehicle: &Vehicle<T>, state: &SocState<T>, slot: usize, slot_hours: T) -> Result<PowerBounds<T>> {
    if !vehicle.is_present(slot) {
        return Err(Error::Contract(format!(
            "vehicle {} is not connected in slot {slot} (window {}..{})",
            vehicle.id, vehicle.arrival_slot, vehicle.departure_slot
        )));
    }
    let after = T::lit((vehicle.departure_slot - slot - 1) as f64);
    let deficit = vehicle.soc_min - state.soc_now;
    let reachable = vehicle.p_max * slot_hours * (after + T::one());
    if deficit > reachable + soc_tolerance(vehicle.soc_max) {
        return Err(Error::Infeasible {
            vehicle: vehicle.id,
            detail: format!("needs {deficit} kWh by slot {} but at most {reachable} kWh is deliverable", vehicle.departure_slot),
        });
    }
    let p_hi = vehicle.p_max.min((vehicle.soc_max - state.soc_now) / slot_hours).max(T::zero());
    let p_lo = (deficit / slot_hours - vehicle.p_max * after).max(T::zero()).min(p_hi);
    Ok(PowerBounds { p_lo, p_hi })
}

/// Advances one slot at unit efficiency.
pub fn step_soc<T: Real>(state: &SocState<T>, p_kw: T, bounds: &PowerBounds<T>, slot_hours: T, soc_max: T) -> Result<SocState<T>> {
    let slack = (bounds.p_hi.abs() + T::one()) * T::epsilon() * T::lit(16.0);
    if !(p_kw >= bounds.p_lo - slack && p_kw <= bounds.p_hi + slack) {
        return Err(Error::Contract(format!(
            "vehicle {}: {p_kw} kW outside [{}, {}]",
            state.vehicle, bounds.p_lo, bounds.p_hi
        )));
    }
    Ok(SocState {
        vehicle: state.vehicle,
        soc_now: (state.soc_now + p_kw * slot_hours).min(soc_max),
        slot: state.slot + 1,
    })
}

/// Charging window in clock hours; the end may exceed 24 for next-day times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub start_hour: f64,
    pub end_hour: f64,
    pub slot_hours: f64,
}

impl Default for Horizon {
    /// 17:00 to 10:00 the next day in half-hour slots.
    fn default() -> Self {
        Self {
            start_hour: 17.0,
            end_hour: 34.0,
            slot_hours: 0.5,
        }
    }
}

impl Horizon {
    pub fn n_slots(&self) -> usize {
        ((self.end_hour - self.start_hour) / self.slot_hours).round() as usize
    }

    /// Clock time at the start of `slot`, as `HH:MM`.
    pub fn label(&self, slot: usize) -> String {
        let minutes = ((self.start_hour + slot as f64 * self.slot_hours) * 60.0).round() as i64;
        format!("{:02}:{:02}", (minutes / 60) % 24, minutes % 60)
    }

    fn slot_position(&self, hour: f64) -> f64 {
        (hour - self.start_hour) / self.slot_hours
    }
}

/// How vehicles are attached to buses.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Uniform draw without replacement over the candidate buses.
    Random,
    /// Explicit bus ids, one vehicle each.
    Nodes(Vec<usize>),
}

/// Fleet statistics; times are clock hours, spreads in hours.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub n_vehicles: usize,
    pub battery_kwh: f64,
    pub range_km: f64,
    pub need_km_mean: f64,
    pub need_km_std: f64,
    pub arrival_mean_hour: f64,
    pub arrival_std_hours: f64,
    pub departure_mean_hour: f64,
    pub departure_std_hours: f64,
    pub p_max_kw: f64,
    pub placement: Placement,
}

impl Default for FleetSpec {
    fn default() -> Self {
        Self {
            n_vehicles: 30,
            battery_kwh: BATTERY_KWH,
            range_km: RANGE_KM,
            need_km_mean: 30.0,
            need_km_std: 3.0,
            arrival_mean_hour: 18.75,
            arrival_std_hours: 1.0,
            departure_mean_hour: 32.0,
            departure_std_hours: 0.75,
            p_max_kw: DEFAULT_P_MAX_KW,
            placement: Placement::Random,
        }
    }
}

/// Sampled vehicles plus notes on anything clipped to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Fleet<T> {
    pub vehicles: Vec<Vehicle<T>>,
    pub warnings: Vec<String>,
}

impl<T> std::ops::Deref for Fleet<T> {
    type Target = [Vehicle<T>];
    fn deref(&self) -> &[Vehicle<T>] {
        &self.vehicles
    }
}

/// Draws a fleet deterministically from `seed`.
///
/// Trip distances, arrivals and departures are normal draws rejected until
/// physically meaningful (distance within battery range, departure slot after
/// arrival slot). Each vehicle starts at `soc_max − need` and must be full at
/// departure. Windows that spill outside the horizon are clipped and reported.
pub fn sample_fleet<T: Real>(spec: &FleetSpec, horizon: &Horizon, candidates: &[usize], seed: u64) -> Result<Fleet<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<usize> = match &spec.placement {
        Placement::Random => {
            if spec.n_vehicles > candidates.len() {
                return Err(Error::Config(format!(
                    "{} vehicles requested but only {} buses can host one",
                    spec.n_vehicles,
                    candidates.len()
                )));
            }
            let mut pool = candidates.to_vec();
            pool.shuffle(&mut rng);
            pool.truncate(spec.n_vehicles);
            pool
        }
        Placement::Nodes(list) => {
            if list.len() != spec.n_vehicles {
                return Err(Error::Config(format!(
                    "{} placement nodes given for {} vehicles",
                    list.len(),
                    spec.n_vehicles
                )));
            }
            let mut seen = HashSet::new();
            for n in list {
                if !candidates.contains(n) {
                    return Err(Error::Config(format!("placement node {n} cannot host a vehicle")));
                }
                if !seen.insert(*n) {
                    return Err(Error::Config(format!("placement node {n} listed twice")));
                }
            }
            list.clone()
        }
    };

    let normal = |mean: f64, std: f64| {
        Normal::new(mean, std).map_err(|e| Error::Config(format!("bad normal({mean}, {std}): {e}")))
    };
    let need = normal(spec.need_km_mean, spec.need_km_std)?;
    let arrive = normal(spec.arrival_mean_hour, spec.arrival_std_hours)?;
    let depart = normal(spec.departure_mean_hour, spec.departure_std_hours)?;
    let n_slots = horizon.n_slots();
    let kwh_per_km = spec.battery_kwh / spec.range_km;

    let mut vehicles = Vec::with_capacity(nodes.len());
    let mut warnings = Vec::new();
    for (k, node) in nodes.into_iter().enumerate() {
        let id = k + 1;
        let distance = rejection(&mut rng, &need, |d| (0.0..=spec.range_km).contains(&d));
        let (arrival_slot, departure_slot, clipped) = loop {
            let a = horizon.slot_position(arrive.sample(&mut rng)).ceil();
            let d = horizon.slot_position(depart.sample(&mut rng)).floor();
            let (a_c, d_c) = (a.max(0.0), d.min(n_slots as f64));
            if a_c < d_c {
                break (a_c as usize, d_c as usize, a < 0.0 || d > n_slots as f64);
            }
        };
        if clipped {
            warnings.push(format!(
                "vehicle {id}: window clipped to the horizon (slots {arrival_slot}..{departure_slot})"
            ));
        }
        let need_kwh = distance * kwh_per_km;
        let v = Vehicle {
            id,
            node,
            soc_init: T::lit(spec.battery_kwh - need_kwh),
            soc_min: T::lit(spec.battery_kwh),
            soc_max: T::lit(spec.battery_kwh),
            p_max: T::lit(spec.p_max_kw),
            arrival_slot,
            departure_slot,
        };
        v.validate()?;
        vehicles.push(v);
    }
    Ok(Fleet { vehicles, warnings })
}

fn rejection<D: Distribution<f64>>(rng: &mut ChaCha8Rng, dist: &D, accept: impl Fn(f64) -> bool) -> f64 {
    loop {
        let x = dist.sample(rng);
        if accept(x) {
            return x;
        }
    }
}

const FLEET_HEADER: &str = "id,node,soc_init_kwh,soc_min_kwh,soc_max_kwh,p_max_kw,arrival_slot,departure_slot";

pub fn parse_fleet<T: Real>(text: &str, origin: &str) -> Result<Vec<Vehicle<T>>> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match rows.next() {
        Some((_, h)) if h.split(',').map(str::trim).eq(FLEET_HEADER.split(',')) => {}
        Some((n, _)) => return Err(Error::parse(origin, n, format!("expected header `{FLEET_HEADER}`"))),
        None => return Err(Error::parse(origin, 0, "empty fleet file")),
    }
    let mut out: Vec<Vehicle<T>> = Vec::new();
    let mut nodes = HashSet::new();
    for (n, line) in rows {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 8 {
            return Err(Error::parse(origin, n, format!("expected 8 fields, found {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(origin, n, format!("bad integer `{s}`: {e}")));
        let num = |s: &str| s.parse::<T>().map_err(|e| Error::parse(origin, n, format!("bad number `{s}`: {e}")));
        let v = Vehicle {
            id: int(f[0])?,
            node: int(f[1])?,
            soc_init: num(f[2])?,
            soc_min: num(f[3])?,
            soc_max: num(f[4])?,
            p_max: num(f[5])?,
            arrival_slot: int(f[6])?,
            departure_slot: int(f[7])?,
        };
        v.validate().map_err(|e| Error::parse(origin, n, e.to_string()))?;
        if !nodes.insert(v.node) {
            return Err(Error::parse(origin, n, format!("second vehicle at node {}", v.node)));
        }
        if out.iter().any(|o| o.id == v.id) {
            return Err(Error::parse(origin, n, format!("duplicate vehicle id {}", v.id)));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn read_fleet<T: Real>(path: impl AsRef<Path>) -> Result<Vec<Vehicle<T>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fleet(&text, &path.display().to_string())
}

pub fn serialize_fleet<T: Real>(vehicles: &[Vehicle<T>]) -> String {
    let mut out = format!("{FLEET_HEADER}\n");
    for v in vehicles {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            v.id, v.node, v.soc_init, v.soc_min, v.soc_max, v.p_max, v.arrival_slot, v.departure_slot
        );
    }
    out
}
