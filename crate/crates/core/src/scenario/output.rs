//! CSV writers. Column order is fixed; floats use the shortest exact
//! representation so files are byte-stable across runs.

use std::fmt::Write;

use crate::coordination::Updater;

use super::config::ScenarioConfig;
use super::montecarlo::MonteCarloReport;
use super::run::{RunSummary, ScenarioRun};

/// `slot,time,ev_kw,min_v,min_v_node,v_ref_node,penalty_quadratic,penalty_crenel,brd_updates,brd_rounds,termination`
pub fn slots_csv(config: &ScenarioConfig, run: &ScenarioRun) -> String {
    let model = &config.feeder;
    let ref_idx = model.index_of(config.reference_node).expect("reference node");
    let mut out = String::from(
        "slot,time,ev_kw,min_v,min_v_node,v_ref_node,penalty_quadratic,penalty_crenel,brd_updates,brd_rounds,termination\n",
    );
    for s in &run.slots {
        let (i, v) = s.solution.min_voltage();
        let (updates, rounds, term) = match &s.brd {
            Some(b) => (b.updates.to_string(), b.rounds.to_string(), b.termination.name()),
            None => (String::new(), String::new(), "n/a"),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.slot,
            config.horizon.label(s.slot),
            s.ev_kw(),
            v,
            model.id_of(i),
            s.solution.v_mag[ref_idx],
            s.penalty_quadratic,
            s.penalty_crenel,
            updates,
            rounds,
            term
        );
    }
    out
}

/// `slot,time,v_<bus>...` true voltages of every bus.
pub fn voltages_csv(config: &ScenarioConfig, run: &ScenarioRun) -> String {
    let model = &config.feeder;
    let mut out = String::from("slot,time");
    for b in model.buses() {
        let _ = write!(out, ",v_{}", b.id);
    }
    out.push('\n');
    for s in &run.slots {
        let _ = write!(out, "{},{}", s.slot, config.horizon.label(s.slot));
        for v in &s.solution.v_mag {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// `slot,time,p_<vehicle>...` applied kW; zero while disconnected.
pub fn profiles_csv(config: &ScenarioConfig, run: &ScenarioRun) -> String {
    let mut out = String::from("slot,time");
    for v in &run.vehicles {
        let _ = write!(out, ",p_{}", v.id);
    }
    out.push('\n');
    for s in &run.slots {
        let _ = write!(out, "{},{}", s.slot, config.horizon.label(s.slot));
        for v in &run.vehicles {
            let p = s
                .profile
                .vehicle_ids
                .iter()
                .position(|&id| id == v.id)
                .map_or(0.0, |k| s.profile.p_kw[k]);
            let _ = write!(out, ",{p}");
        }
        out.push('\n');
    }
    out
}

/// `slot,iter,updater,potential,min_v_pred,p_<vehicle>...` for every BRD
/// iteration; disconnected vehicles have empty cells.
pub fn trace_csv(run: &ScenarioRun) -> String {
    let mut out = String::from("slot,iter,updater,potential,min_v_pred");
    for v in &run.vehicles {
        let _ = write!(out, ",p_{}", v.id);
    }
    out.push('\n');
    for s in &run.slots {
        let Some(brd) = &s.brd else { continue };
        let cols: Vec<Option<usize>> = run
            .vehicles
            .iter()
            .map(|v| s.profile.vehicle_ids.iter().position(|&id| id == v.id))
            .collect();
        for e in &brd.trace.entries {
            let min_v = e.predicted.iter().copied().fold(f64::INFINITY, f64::min);
            let updater = match e.updater {
                Updater::Vehicle(id) => id.to_string(),
                other => other.to_string(),
            };
            let _ = write!(out, "{},{},{},{},{}", s.slot, e.iter, updater, e.potential, min_v);
            for c in &cols {
                match c {
                    Some(k) => {
                        let _ = write!(out, ",{}", e.profile[*k]);
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
    out
}

/// `id,node,arrival_slot,departure_slot,soc_init_kwh,soc_final_kwh,soc_min_kwh,soc_max_kwh,energy_kwh,target_met`
pub fn vehicles_csv(summary: &RunSummary) -> String {
    let mut out = String::from(
        "id,node,arrival_slot,departure_slot,soc_init_kwh,soc_final_kwh,soc_min_kwh,soc_max_kwh,energy_kwh,target_met\n",
    );
    for v in &summary.vehicles {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            v.id,
            v.node,
            v.arrival_slot,
            v.departure_slot,
            v.soc_init,
            v.soc_final,
            v.soc_min,
            v.soc_max,
            v.energy_kwh,
            v.target_met()
        );
    }
    out
}

/// `key,value` pairs followed by `node_min_v,<bus>,<v>` rows.
pub fn summary_csv(summary: &RunSummary) -> String {
    let mut out = String::from("key,value\n");
    let rows: [(&str, String); 14] = [
        ("policy", summary.policy.to_string()),
        ("vehicles", summary.n_vehicles.to_string()),
        ("reference_node", summary.reference_node.to_string()),
        ("min_v_reference", summary.min_v_reference.to_string()),
        ("min_v_reference_slot", summary.min_v_reference_slot.to_string()),
        ("min_v_any", summary.min_v_any.to_string()),
        ("min_v_any_node", summary.min_v_any_node.to_string()),
        ("penalty_quadratic", summary.penalty_quadratic.to_string()),
        ("penalty_crenel", summary.penalty_crenel.to_string()),
        ("energy_delivered_kwh", summary.energy_delivered_kwh.to_string()),
        ("brd_updates", summary.brd_updates.to_string()),
        ("cycle_slots", summary.cycle_slots.to_string()),
        ("round_cap_slots", summary.round_cap_slots.to_string()),
        ("all_targets_met", summary.all_targets_met().to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    for (id, v) in &summary.node_min_v {
        let _ = writeln!(out, "node_min_v_{id},{v}");
    }
    out
}

/// Reference-node voltage per slot, one column per run (Fig. 4 style).
pub fn comparison_csv(config: &ScenarioConfig, runs: &[ScenarioRun]) -> String {
    let ref_idx = config.feeder.index_of(config.reference_node).expect("reference node");
    let mut out = String::from("slot,time");
    for r in runs {
        let _ = write!(out, ",{}", r.policy);
    }
    out.push('\n');
    for slot in 0..config.horizon.n_slots() {
        let _ = write!(out, "{slot},{}", config.horizon.label(slot));
        for r in runs {
            let _ = write!(out, ",{}", r.slots[slot].solution.v_mag[ref_idx]);
        }
        out.push('\n');
    }
    out
}

/// Per-cell statistics: `policy,fleet_size,mean_min_v,std_min_v,min_min_v,max_min_v,draws`.
pub fn report_csv(report: &MonteCarloReport) -> String {
    let mut out = String::from("policy,fleet_size,mean_min_v,std_min_v,min_min_v,max_min_v,draws\n");
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.policy, c.fleet_size, c.mean, c.std, c.min, c.max, report.n_draws
        );
    }
    out
}

/// One row per draw and policy: `fleet_size,draw,seed,policy,min_v_reference,penalty_quadratic,penalty_crenel,energy_kwh,brd_updates`.
pub fn draws_csv(report: &MonteCarloReport) -> String {
    let mut out =
        String::from("fleet_size,draw,seed,policy,min_v_reference,penalty_quadratic,penalty_crenel,energy_kwh,brd_updates\n");
    for d in &report.draws {
        for s in &d.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                d.fleet_size,
                d.draw,
                d.seed,
                s.policy,
                s.min_v_reference,
                s.penalty_quadratic,
                s.penalty_crenel,
                s.energy_delivered_kwh,
                s.brd_updates
            );
        }
    }
    out
}
