//! Slot-by-slot simulation of one charging policy over the horizon.

use std::collections::BTreeMap;

use crate::baselines::run_slot_droop;
use crate::coordination::{run_slot_brd, ChargingProfile, IterationTrace, Player, PolicyConfig, TerminationCause};
use crate::error::{Error, Result};
use crate::fleet::{power_bounds, sample_fleet, soc_tolerance, step_soc, PowerBounds, SocState, Vehicle};
use crate::metrics::{penalty, ObjectiveContext, PenaltyKind};
use crate::network::{compute_jacobian, extract_sensitivity, load_injections, solve_load_flow, FeederModel, LoadFlowSolution};

use super::config::{FleetSource, PolicyKind, ScenarioConfig};

/// Coordination details of one BRD slot.
#[derive(Debug, Clone)]
pub struct BrdSlot {
    pub termination: TerminationCause,
    pub updates: usize,
    pub vehicle_updates: usize,
    pub rounds: usize,
    pub trace: IterationTrace<f64>,
}

#[derive(Debug, Clone)]
pub struct SlotResult {
    pub slot: usize,
    /// Powers applied to the connected vehicles, ascending id.
    pub profile: ChargingProfile<f64>,
    /// True (nonlinear) load flow with the applied profile.
    pub solution: LoadFlowSolution<f64>,
    pub penalty_quadratic: f64,
    pub penalty_crenel: f64,
    pub brd: Option<BrdSlot>,
}

impl SlotResult {
    pub fn ev_kw(&self) -> f64 {
        self.profile.p_kw.iter().fold(0.0, |a, p| a + p)
    }

    pub fn penalty(&self, kind: PenaltyKind) -> f64 {
        match kind {
            PenaltyKind::Quadratic => self.penalty_quadratic,
            PenaltyKind::Crenel => self.penalty_crenel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleOutcome {
    pub id: usize,
    pub node: usize,
    pub arrival_slot: usize,
    pub departure_slot: usize,
    pub soc_init: f64,
    pub soc_final: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// Σ p·Δt over the connected slots.
    pub energy_kwh: f64,
}

impl VehicleOutcome {
    pub fn target_met(&self) -> bool {
        self.soc_final >= self.soc_min - soc_tolerance(self.soc_max)
    }

    /// |ΔSoC − delivered energy|, which is zero at unit efficiency.
    pub fn energy_imbalance(&self) -> f64 {
        ((self.soc_final - self.soc_init) - self.energy_kwh).abs()
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub n_vehicles: usize,
    pub reference_node: usize,
    /// Lowest true voltage at the reference node over the horizon.
    pub min_v_reference: f64,
    pub min_v_reference_slot: usize,
    /// Lowest true voltage anywhere, and where.
    pub min_v_any: f64,
    pub min_v_any_node: usize,
    /// Lowest voltage per bus id over the horizon.
    pub node_min_v: BTreeMap<usize, f64>,
    pub penalty_quadratic: f64,
    pub penalty_crenel: f64,
    pub energy_delivered_kwh: f64,
    pub brd_updates: usize,
    pub cycle_slots: usize,
    pub round_cap_slots: usize,
    pub vehicles: Vec<VehicleOutcome>,
}

impl RunSummary {
    pub fn all_targets_met(&self) -> bool {
        self.vehicles.iter().all(VehicleOutcome::target_met)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub policy: PolicyKind,
    pub vehicles: Vec<Vehicle<f64>>,
    pub warnings: Vec<String>,
    pub slots: Vec<SlotResult>,
    pub summary: RunSummary,
}

/// Vehicles for a run: the fleet file, or a draw of `n_vehicles` (the fleet spec's
/// own count when `None`) from `seed`.
pub fn resolve_fleet(config: &ScenarioConfig, n_vehicles: Option<usize>, seed: u64) -> Result<(Vec<Vehicle<f64>>, Vec<String>)> {
    match &config.fleet {
        FleetSource::File(v) => {
            if n_vehicles.is_some_and(|n| n != v.len()) {
                return Err(Error::Config("fleet size cannot be changed when the fleet comes from a file".into()));
            }
            Ok((v.clone(), Vec::new()))
        }
        FleetSource::Sampled(spec) => {
            let mut spec = spec.clone();
            if let Some(n) = n_vehicles {
                spec.n_vehicles = n;
            }
            let fleet = sample_fleet(&spec, &config.horizon, &config.candidate_nodes(), seed)?;
            Ok((fleet.vehicles, fleet.warnings))
        }
    }
}

/// Runs the configured policy on the configured fleet.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let (vehicles, warnings) = resolve_fleet(config, None, config.seed)?;
    let mut run = simulate(config, config.policy, &vehicles)?;
    run.warnings = warnings;
    Ok(run)
}

fn ev_loads(model: &FeederModel<f64>, profile: &ChargingProfile<f64>, fleet: &BTreeMap<usize, &Vehicle<f64>>) -> Vec<f64> {
    let mut ev = vec![0.0; model.len()];
    for (id, p) in profile.vehicle_ids.iter().zip(&profile.p_kw) {
        let idx = model.index_of(fleet[id].node).expect("vehicle nodes are validated");
        ev[idx] += p;
    }
    ev
}

fn solve_with_ev(model: &FeederModel<f64>, ev: &[f64]) -> Result<LoadFlowSolution<f64>> {
    let (p, q) = load_injections(model, ev);
    solve_load_flow(model, &p, &q)
}

/// Runs `policy` over the horizon for `vehicles`.
///
/// Per slot: compute every connected vehicle's bounds, choose powers, solve
/// the true load flow with them, score it, then advance the batteries. BRD
/// linearizes at the base load plus each connected vehicle's power from the
/// previous slot (zero for new arrivals); droop reads the previous slot's
/// true voltages, starting from the no-EV solution.
pub fn simulate(config: &ScenarioConfig, policy: PolicyKind, vehicles: &[Vehicle<f64>]) -> Result<ScenarioRun> {
    let model = &config.feeder;
    let dt = config.horizon.slot_hours;
    let n_slots = config.horizon.n_slots();
    let mut by_id = BTreeMap::new();
    for v in vehicles {
        v.validate()?;
        if model.index_of(v.node).is_none() || v.node == model.slack_id() {
            return Err(Error::Config(format!("vehicle {} is on node {}, which cannot host one", v.id, v.node)));
        }
        if v.departure_slot > n_slots {
            return Err(Error::Config(format!("vehicle {} departs after the horizon", v.id)));
        }
        if by_id.insert(v.id, v).is_some() {
            return Err(Error::Config(format!("duplicate vehicle id {}", v.id)));
        }
    }
    let pilot_idx: Vec<usize> = config
        .pilot_nodes
        .iter()
        .map(|&p| model.index_of(p).expect("pilots are validated"))
        .collect();

    let mut states: BTreeMap<usize, SocState<f64>> = by_id.iter().map(|(&id, v)| (id, v.initial_state())).collect();
    let mut energy: BTreeMap<usize, f64> = by_id.keys().map(|&id| (id, 0.0)).collect();
    let mut previous_p: BTreeMap<usize, f64> = BTreeMap::new();
    let mut previous_solution = solve_with_ev(model, &vec![0.0; model.len()])?;
    let mut slots = Vec::with_capacity(n_slots);

    for slot in 0..n_slots {
        let connected: Vec<(&Vehicle<f64>, PowerBounds<f64>)> = by_id
            .values()
            .filter(|v| v.is_present(slot))
            .map(|v| {
                let state = SocState { slot, ..states[&v.id] };
                power_bounds(v, &state, slot, dt).map(|b| (*v, b))
            })
            .collect::<Result<_>>()?;

        let mut brd = None;
        let profile = match policy {
            PolicyKind::Uncoordinated => ChargingProfile {
                vehicle_ids: connected.iter().map(|(v, _)| v.id).collect(),
                p_kw: connected.iter().map(|(_, b)| b.p_hi).collect(),
            },
            PolicyKind::Droop => run_slot_droop(model, &connected, &previous_solution, &config.droop)?,
            PolicyKind::Brd(schedule, scope) => {
                if connected.is_empty() {
                    ChargingProfile { vehicle_ids: Vec::new(), p_kw: Vec::new() }
                } else {
                    let players: Vec<Player<f64>> = connected
                        .iter()
                        .map(|(v, b)| Player {
                            vehicle_id: v.id,
                            node: v.node,
                            bounds: *b,
                            p_ref: previous_p.get(&v.id).copied().unwrap_or(0.0),
                        })
                        .collect();
                    let reference = ChargingProfile {
                        vehicle_ids: players.iter().map(|p| p.vehicle_id).collect(),
                        p_kw: players.iter().map(|p| p.p_ref).collect(),
                    };
                    let operating = solve_with_ev(model, &ev_loads(model, &reference, &by_id))?;
                    let jac = compute_jacobian(model, &operating)?;
                    let controls: Vec<usize> = players.iter().map(|p| p.node).collect();
                    let sens = extract_sensitivity(&jac, &config.pilot_nodes, &controls)?;
                    let ctx = ObjectiveContext::from_sensitivity(model, &sens, config.band, config.brd.penalty_kind)?
                        .with_v_ref(config.v_ref)
                        .with_neighborhoods(&config.neighborhoods);
                    let cfg = PolicyConfig { schedule, scope, ..config.brd };
                    let out = run_slot_brd(&players, &ctx, &cfg)?;
                    brd = Some(BrdSlot {
                        termination: out.termination,
                        updates: out.updates,
                        vehicle_updates: out.vehicle_updates,
                        rounds: out.rounds,
                        trace: out.trace,
                    });
                    out.profile
                }
            }
        };

        let solution = solve_with_ev(model, &ev_loads(model, &profile, &by_id))?;
        let score = |kind| {
            pilot_idx
                .iter()
                .map(|&i| penalty(solution.v_mag[i] - config.v_ref, &config.band, kind))
                .fold(0.0, |a, x| a + x)
        };
        let (penalty_quadratic, penalty_crenel) = (score(PenaltyKind::Quadratic), score(PenaltyKind::Crenel));

        previous_p.clear();
        for ((v, bounds), &p) in connected.iter().zip(&profile.p_kw) {
            let state = SocState { slot, ..states[&v.id] };
            let next = step_soc(&state, p, bounds, dt, v.soc_max)?;
            states.insert(v.id, next);
            *energy.get_mut(&v.id).expect("known id") += p * dt;
            previous_p.insert(v.id, p);
        }

        slots.push(SlotResult {
            slot,
            profile,
            solution: solution.clone(),
            penalty_quadratic,
            penalty_crenel,
            brd,
        });
        previous_solution = solution;
    }

    let outcomes: Vec<VehicleOutcome> = by_id
        .values()
        .map(|v| VehicleOutcome {
            id: v.id,
            node: v.node,
            arrival_slot: v.arrival_slot,
            departure_slot: v.departure_slot,
            soc_init: v.soc_init,
            soc_final: states[&v.id].soc_now,
            soc_min: v.soc_min,
            soc_max: v.soc_max,
            energy_kwh: energy[&v.id],
        })
        .collect();
    if let Some(miss) = outcomes.iter().find(|o| !o.target_met()) {
        return Err(Error::Infeasible {
            vehicle: miss.id,
            detail: format!("left with {} kWh, needed {}", miss.soc_final, miss.soc_min),
        });
    }
    let summary = summarize(config, policy, &slots, outcomes);
    Ok(ScenarioRun {
        policy,
        vehicles: by_id.into_values().cloned().collect(),
        warnings: Vec::new(),
        slots,
        summary,
    })
}

fn summarize(config: &ScenarioConfig, policy: PolicyKind, slots: &[SlotResult], vehicles: Vec<VehicleOutcome>) -> RunSummary {
    let model = &config.feeder;
    let ref_idx = model.index_of(config.reference_node).expect("reference node is validated");
    let mut node_min_v: BTreeMap<usize, f64> = model.buses().iter().map(|b| (b.id, f64::INFINITY)).collect();
    let (mut min_ref, mut min_ref_slot) = (f64::INFINITY, 0);
    for s in slots {
        for (i, &v) in s.solution.v_mag.iter().enumerate() {
            let e = node_min_v.get_mut(&model.id_of(i)).expect("bus id");
            *e = e.min(v);
        }
        if s.solution.v_mag[ref_idx] < min_ref {
            min_ref = s.solution.v_mag[ref_idx];
            min_ref_slot = s.slot;
        }
    }
    let (min_v_any_node, min_v_any) = node_min_v
        .iter()
        .fold((0, f64::INFINITY), |best, (&id, &v)| if v < best.1 { (id, v) } else { best });
    let brd = slots.iter().filter_map(|s| s.brd.as_ref());
    RunSummary {
        policy,
        n_vehicles: vehicles.len(),
        reference_node: config.reference_node,
        min_v_reference: min_ref,
        min_v_reference_slot: min_ref_slot,
        min_v_any,
        min_v_any_node,
        node_min_v,
        penalty_quadratic: slots.iter().map(|s| s.penalty_quadratic).fold(0.0, |a, x| a + x),
        penalty_crenel: slots.iter().map(|s| s.penalty_crenel).fold(0.0, |a, x| a + x),
        energy_delivered_kwh: vehicles.iter().map(|v| v.energy_kwh).fold(0.0, |a, x| a + x),
        brd_updates: brd.clone().map(|b| b.updates).sum(),
        cycle_slots: brd
            .clone()
            .filter(|b| matches!(b.termination, TerminationCause::CycleDetected(_)))
            .count(),
        round_cap_slots: brd.filter(|b| b.termination == TerminationCause::RoundCap).count(),
        vehicles,
    }
}
