//! Acceptance checks, one line per criterion. Run with `cargo test --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use common::{antagonistic, fd_jacobian, grid_min, max_residual, oracle_cost, random_context, random_radial_feeder, rng, slot_instance};
use evcoord::baselines::{droop_power, DroopCurve};
use evcoord::coordination::{best_response, run_slot_brd, Game, PolicyConfig, Schedule, Scope, TerminationCause, IMPROVEMENT_THRESHOLD};
use evcoord::fleet::{soc_tolerance, PowerBounds};
use evcoord::metrics::PenaltyKind;
use evcoord::network::surrogate::bundled_feeder;
use evcoord::network::{compute_jacobian, extract_sensitivity, jacobian_at, load_injections, solve_load_flow, Bus, FeederModel, Line};
use evcoord::scenario::{calibrate, output, resolve_fleet, run_monte_carlo, simulate, MonteCarloReport, PolicyKind, RunSummary, ScenarioConfig};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn load_flow() -> Outcome {
    let start = Instant::now();
    // Two-bus closed form on 1 kV / 1 MVA bases.
    let (r, x, p, q): (f64, f64, f64, f64) = (0.05, 0.05, 100.0, 20.0);
    let model = FeederModel::new(
        vec![
            Bus { id: 1, base_load_p: 0.0, base_load_q: 0.0, is_slack: true },
            Bus { id: 2, base_load_p: p, base_load_q: q, is_slack: false },
        ],
        vec![Line { from_bus: 1, to_bus: 2, resistance: r, reactance: x }],
        1000.0,
        1e6,
    )
    .map_err(|e| e.to_string())?;
    let (pi, qi) = load_injections(&model, &[0.0, 0.0]);
    let sol = solve_load_flow(&model, &pi, &qi).map_err(|e| e.to_string())?;
    let (pp, qq) = (p / 1000.0, q / 1000.0);
    let b = 2.0 * (pp * r + qq * x) - 1.0;
    let c = (pp * pp + qq * qq) * (r * r + x * x);
    let exact = ((-b + (b * b - 4.0 * c).sqrt()) / 2.0).sqrt();
    check((sol.v_mag[1] - exact).abs() < 1e-8, || format!("two-bus {} vs {exact}", sol.v_mag[1]))?;
    let mut worst = max_residual(&model, &sol.v_mag, &sol.v_ang, &pi, &qi);
    let mut g = rng(1);
    for k in 0..20 {
        let n = 2 + (k * 7) % 33;
        let f = random_radial_feeder(&mut g, n);
        let (p, q) = load_injections(&f, &vec![0.0; n]);
        let s = solve_load_flow(&f, &p, &q).map_err(|e| format!("feeder {k}: {e}"))?;
        worst = worst.max(max_residual(&f, &s.v_mag, &s.v_ang, &p, &q));
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-8, || format!("residual {worst:e}"))?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("max residual {worst:.1e} pu over 21 feeders in {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn sensitivity() -> Outcome {
    let model = bundled_feeder::<f64>();
    let pilots = model.non_slack_ids();
    let mut g = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (ev, op) = loop {
            let ev: Vec<f64> = (0..model.len())
                .map(|i| if i != model.slack_index() && g.random_bool(0.3) { g.random_range(0.0..3.3) } else { 0.0 })
                .collect();
            let (p, q) = load_injections(&model, &ev);
            let op = solve_load_flow(&model, &p, &q).map_err(|e| e.to_string())?;
            if op.min_voltage().1 >= 0.85 {
                break (ev, op);
            }
        };
        let control = g.random_range(2..=34);
        let dp = if g.random_bool(0.5) { 1e-3 } else { -1e-3 };
        let sens = extract_sensitivity(&compute_jacobian(&model, &op).map_err(|e| e.to_string())?, &pilots, &[control])
            .map_err(|e| e.to_string())?;
        let predicted = sens.predict(&[dp]);
        let (mut p, q) = load_injections(&model, &ev);
        p[model.index_of(control).unwrap()] += dp * model.base_power() / 1000.0;
        let moved = solve_load_flow(&model, &p, &q).map_err(|e| e.to_string())?;
        let (mut err, mut scale) = (0.0f64, 0.0f64);
        for (k, &id) in pilots.iter().enumerate() {
            let i = model.index_of(id).unwrap();
            let actual = moved.v_mag[i] - op.v_mag[i];
            scale = scale.max(actual.abs());
            err = err.max((predicted[k] - actual).abs());
        }
        worst = worst.max(err / scale);
    }
    check(worst <= 1e-3, || format!("relative error {worst:.2e}"))?;
    Ok(format!("worst relative error {worst:.2e} over 100 pairs"))
}

fn jacobian() -> Outcome {
    let mut g = rng(3);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let n = g.random_range(2..=34);
        let model = if k % 2 == 0 { bundled_feeder() } else { random_radial_feeder(&mut g, n) };
        let v: Vec<f64> = (0..model.len()).map(|i| if i == model.slack_index() { 1.0 } else { g.random_range(0.88..1.05) }).collect();
        let a: Vec<f64> = (0..model.len()).map(|i| if i == model.slack_index() { 0.0 } else { g.random_range(-0.1..0.1) }).collect();
        let an = jacobian_at(&model, &v, &a).full();
        for (i, row) in fd_jacobian(&model, &v, &a, 1e-6).iter().enumerate() {
            for (j, &num) in row.iter().enumerate() {
                worst = worst.max((an[(i, j)] - num).abs() / an[(i, j)].abs().max(1.0));
            }
        }
    }
    check(worst < 1e-5, || format!("relative error {worst:.2e}"))?;
    Ok(format!("worst relative error {worst:.2e} at 20 points"))
}

fn potential_convergence() -> Outcome {
    let (mut updates, mut players_total) = (0usize, 0usize);
    for seed in 0..50 {
        let (ctx, players) = slot_instance(1000 + seed, 30, PenaltyKind::Quadratic);
        let out = run_slot_brd(&players, &ctx, &PolicyConfig::default()).map_err(|e| e.to_string())?;
        check(out.termination == TerminationCause::Converged, || format!("instance {seed}: {:?}", out.termination))?;
        let pots = out.trace.potentials();
        check(pots.windows(2).all(|w| w[1] < w[0]), || format!("instance {seed}: potential rose"))?;
        let game = Game::new(&ctx, &players, Scope::Global, 331).map_err(|e| e.to_string())?;
        for k in 0..players.len() {
            let mut trial = out.profile.p_kw.clone();
            trial[k] = best_response(&game, k, &out.profile.p_kw).map_err(|e| e.to_string())?;
            let gain = game.cost(k, &out.profile.p_kw) - game.cost(k, &trial);
            check(gain <= IMPROVEMENT_THRESHOLD, || format!("instance {seed}: vehicle {k} can gain {gain:e}"))?;
        }
        updates += out.vehicle_updates;
        players_total += players.len();
    }
    let per_ev = updates as f64 / players_total as f64;
    check(per_ev <= 10.0, || format!("{per_ev:.2} updates per vehicle"))?;
    Ok(format!("50/50 converged, {per_ev:.2} updates per vehicle"))
}

fn best_response_exactness() -> Outcome {
    let mut g = rng(5);
    let mut worst = f64::NEG_INFINITY;
    for case in 0..100 {
        let (ctx, players, profile) = random_context(&mut g, PenaltyKind::Quadratic);
        let scope = if case % 2 == 0 { Scope::Global } else { Scope::Local };
        let game = Game::new(&ctx, &players, scope, 331).map_err(|e| e.to_string())?;
        for k in 0..players.len() {
            let local = match scope {
                Scope::Global => None,
                Scope::Local => Some(ctx.local_scope(players[k].node).map_err(|e| e.to_string())?.to_vec()),
            };
            let cost = |x: f64| oracle_cost(&ctx, &players, &profile, k, x, local.as_deref());
            let x = best_response(&game, k, &profile).map_err(|e| e.to_string())?;
            let b = players[k].bounds;
            worst = worst.max(cost(x) - grid_min(100_001, b.p_lo, b.p_hi, cost));
        }
    }
    check(worst <= 1e-12, || format!("objective gap {worst:e}"))?;
    Ok(format!("largest gap over a 1e5 grid {worst:.1e}"))
}

fn synchronous_safety() -> Outcome {
    let (ctx, players) = antagonistic();
    let cfg = PolicyConfig { schedule: Schedule::Synchronous, max_rounds: 20, ..PolicyConfig::default() };
    let out = run_slot_brd(&players, &ctx, &cfg).map_err(|e| e.to_string())?;
    match out.termination {
        TerminationCause::CycleDetected(start) => Ok(format!("cycle back to iteration {start} after {} rounds", out.rounds)),
        other => Err(format!("{other:?}")),
    }
}

fn droop() -> Outcome {
    let c = DroopCurve::<f64>::default();
    let open = PowerBounds { p_lo: 0.0, p_hi: 3.3 };
    for (v, want) in [(0.85, 0.0), (0.90, 0.0), (0.95, 3.3), (1.05, 3.3)] {
        let got = droop_power(v, &c, &open);
        check(got == want, || format!("{v} -> {got}"))?;
    }
    let mid = droop_power(0.925, &c, &open);
    check((mid - 1.65).abs() <= 1e-12, || format!("0.925 -> {mid}"))?;
    Ok("breakpoints exact, midpoint 1.65 kW".into())
}

fn table_ordering(report: &MonteCarloReport, elapsed: Duration) -> Outcome {
    let [unc, droop, glob, local] = PolicyKind::TABLE;
    let mean = |p, n| report.cell(p, n).map(|c| c.mean).ok_or_else(|| format!("missing cell {p}/{n}"));
    let mut rows = Vec::new();
    let mut previous = f64::INFINITY;
    for &n in &report.fleet_sizes {
        let (u, d, g, l) = (mean(unc, n)?, mean(droop, n)?, mean(glob, n)?, mean(local, n)?);
        check(u < d && d <= g, || format!("{n} EV: uncoordinated {u:.4}, droop {d:.4}, global {g:.4}"))?;
        check((l - g).abs() <= 0.01, || format!("{n} EV: local {l:.4} vs global {g:.4}"))?;
        check(u < previous, || format!("uncoordinated does not fall with fleet size at {n} EV"))?;
        previous = u;
        rows.push(format!("{n} EV {u:.3}<{d:.3}<={g:.3} (local {l:.3})"));
    }
    check(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("{}; {:.1} s", rows.join(", "), elapsed.as_secs_f64()))
}

fn soc_guarantee(summaries: &[&RunSummary]) -> Outcome {
    let mut checked = 0;
    for s in summaries {
        for v in &s.vehicles {
            checked += 1;
            if v.soc_final < v.soc_min - soc_tolerance(v.soc_max) || v.soc_final > v.soc_max {
                return Err(format!("{}: vehicle {} ends at {} kWh", s.policy, v.id, v.soc_final));
            }
        }
    }
    Ok(format!("{checked} vehicle outcomes over {} runs, zero violations", summaries.len()))
}

fn render_scenario(cfg: &ScenarioConfig) -> Result<Vec<String>, String> {
    let (vehicles, _) = resolve_fleet(cfg, None, cfg.seed).map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    let mut runs = Vec::new();
    for p in PolicyKind::ALL {
        let run = simulate(cfg, p, &vehicles).map_err(|e| e.to_string())?;
        files.extend([
            output::slots_csv(cfg, &run),
            output::voltages_csv(cfg, &run),
            output::profiles_csv(cfg, &run),
            output::trace_csv(&run),
            output::summary_csv(&run.summary),
            output::vehicles_csv(&run.summary),
        ]);
        runs.push(run);
    }
    files.push(output::comparison_csv(cfg, &runs));
    Ok(files)
}

fn determinism(cfg: &ScenarioConfig) -> Outcome {
    let twice = |f: &dyn Fn() -> Result<Vec<String>, String>| -> Result<usize, String> {
        let (a, b) = (f()?, f()?);
        check(a == b, || "outputs differ between runs".into())?;
        Ok(a.len())
    };
    let mut files = twice(&|| render_scenario(cfg))?;
    files += twice(&|| {
        let r = run_monte_carlo(cfg, 2, &[10, 20], &PolicyKind::TABLE).map_err(|e| e.to_string())?;
        Ok(vec![output::report_csv(&r), output::draws_csv(&r)])
    })?;
    files += twice(&|| {
        let c = calibrate(cfg).map_err(|e| e.to_string())?;
        Ok(vec![c.feeder.serialize(), format!("{}", c.scale)])
    })?;
    files += twice(&|| {
        let m = &cfg.feeder;
        let (p, q) = load_injections(m, &vec![0.0; m.len()]);
        let s = solve_load_flow(m, &p, &q).map_err(|e| e.to_string())?;
        let sens = extract_sensitivity(&compute_jacobian(m, &s).map_err(|e| e.to_string())?, &cfg.pilot_nodes, &m.non_slack_ids())
            .map_err(|e| e.to_string())?;
        Ok(vec![format!("{:?}", s.v_mag), format!("{:?}", sens.s_vp_pc.row(0))])
    })?;
    Ok(format!("{files} outputs byte-identical across reruns"))
}

fn main() {
    let cfg = ScenarioConfig::bundled();
    let started = Instant::now();
    let mc = run_monte_carlo(&cfg, 10, &[10, 20, 30], &PolicyKind::TABLE);
    let mc_time = started.elapsed();
    let (vehicles, _) = resolve_fleet(&cfg, None, cfg.seed).expect("bundled fleet");
    let scenario_runs: Vec<_> = PolicyKind::ALL.iter().map(|&p| simulate(&cfg, p, &vehicles)).collect();

    let results: Vec<(&str, Outcome)> = vec![
        ("load-flow correctness", load_flow()),
        ("sensitivity fidelity", sensitivity()),
        ("jacobian vs finite differences", jacobian()),
        ("potential monotonicity and convergence", potential_convergence()),
        ("best-response exactness", best_response_exactness()),
        ("synchronous safety", synchronous_safety()),
        ("droop curve exactness", droop()),
        (
            "policy ordering",
            mc.as_ref().map_err(|e| e.to_string()).and_then(|r| table_ordering(r, mc_time)),
        ),
        ("soc guarantee", {
            match (&mc, scenario_runs.into_iter().collect::<Result<Vec<_>, _>>()) {
                (Ok(report), Ok(runs)) => {
                    let mut all: Vec<&RunSummary> = report.draws.iter().flat_map(|d| d.summaries.iter()).collect();
                    all.extend(runs.iter().map(|r| &r.summary));
                    soc_guarantee(&all)
                }
                (Err(e), _) => Err(e.to_string()),
                (_, Err(e)) => Err(e.to_string()),
            }
        }),
        ("determinism", determinism(&cfg)),
    ];

    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
