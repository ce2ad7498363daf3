use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evcoord::fleet::serialize_fleet;
use evcoord::metrics::PenaltyKind;
use evcoord::network::{compute_jacobian, extract_sensitivity, load_injections, solve_load_flow};
use evcoord::scenario::{calibrate, output, run_monte_carlo, resolve_fleet, simulate, PolicyKind, ScenarioConfig};
use evcoord::Error;

#[derive(Parser, Debug)]
#[command(name = "evcoord", version, about = "EV charging coordination on low-voltage feeders")]
struct Cli {
    /// Print progress and fleet warnings to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; bundled defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Base-load load flow (no vehicles).
    Solve(Common),
    /// Voltage sensitivity to active injections at the base-load point.
    Sensitivity(Common),
    /// One horizon under one policy, plus a reference-node comparison of all policies.
    Scenario {
        #[command(flatten)]
        common: Common,
        /// uncoordinated | droop | {global,local}-{async,sync}
        #[arg(long)]
        policy: Option<PolicyKind>,
        /// quadratic | crenel
        #[arg(long)]
        metric: Option<PenaltyKind>,
    },
    /// Policy comparison over seeded fleet draws.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        draws: Option<usize>,
        /// Comma-separated, e.g. 10,20,30
        #[arg(long, value_delimiter = ',')]
        fleet_sizes: Option<Vec<usize>>,
        /// quadratic | crenel
        #[arg(long)]
        metric: Option<PenaltyKind>,
    },
    /// Fits the feeder impedance scale to the calibration target.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Mean minimum reference-node voltage to hit, in pu
        #[arg(long)]
        target: Option<f64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } | Error::Numerical(_) => 2,
        Error::Infeasible { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(common: &Common) -> evcoord::Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::bundled(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    std::fs::create_dir_all(&common.out).map_err(|e| io_error(&common.out, e))?;
    Ok(cfg)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> evcoord::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_error(&path, e))
}

fn run(cli: Cli) -> evcoord::Result<()> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Solve(common) => {
            let cfg = load(&common)?;
            let model = &cfg.feeder;
            let (p, q) = load_injections(model, &vec![0.0; model.len()]);
            let sol = solve_load_flow(model, &p, &q)?;
            let mut csv = String::from("bus,v_mag_pu,v_ang_rad\n");
            for (i, b) in model.buses().iter().enumerate() {
                csv.push_str(&format!("{},{},{}\n", b.id, sol.v_mag[i], sol.v_ang[i]));
            }
            write(&common.out, "loadflow.csv", &csv)?;
            let (i, v) = sol.min_voltage();
            println!(
                "converged in {} evaluations; min voltage {v:.4} pu at bus {}",
                sol.iterations,
                model.id_of(i)
            );
        }
        Command::Sensitivity(common) => {
            let cfg = load(&common)?;
            let model = &cfg.feeder;
            let (p, q) = load_injections(model, &vec![0.0; model.len()]);
            let sol = solve_load_flow(model, &p, &q)?;
            let jac = compute_jacobian(model, &sol)?;
            let controls = model.non_slack_ids();
            let sens = extract_sensitivity(&jac, &cfg.pilot_nodes, &controls)?;
            let mut csv = String::from("pilot");
            for c in &controls {
                csv.push_str(&format!(",dv_dp_{c}"));
            }
            csv.push('\n');
            for (r, p) in sens.pilot_nodes.iter().enumerate() {
                csv.push_str(&p.to_string());
                for v in sens.s_vp_pc.row(r) {
                    csv.push_str(&format!(",{v}"));
                }
                csv.push('\n');
            }
            write(&common.out, "sensitivity.csv", &csv)?;
            println!("{}x{} sensitivity (pu voltage per pu injection)", sens.pilot_nodes.len(), controls.len());
        }
        Command::Scenario { common, policy, metric } => {
            let mut cfg = load(&common)?;
            if let Some(p) = policy {
                cfg.policy = p;
            }
            if let Some(m) = metric {
                cfg.set_metric(m);
            }
            let (vehicles, warnings) = resolve_fleet(&cfg, None, cfg.seed)?;
            if verbose {
                for w in &warnings {
                    eprintln!("warning: {w}");
                }
            }
            let mut runs = Vec::new();
            for p in PolicyKind::ALL {
                if verbose {
                    eprintln!("running {p}");
                }
                runs.push(simulate(&cfg, p, &vehicles)?);
            }
            let main = runs.iter().find(|r| r.policy == cfg.policy).expect("every policy ran");
            let dir = &common.out;
            write(dir, "fleet.csv", &serialize_fleet(&vehicles))?;
            write(dir, "slots.csv", &output::slots_csv(&cfg, main))?;
            write(dir, "voltages.csv", &output::voltages_csv(&cfg, main))?;
            write(dir, "profiles.csv", &output::profiles_csv(&cfg, main))?;
            write(dir, "trace.csv", &output::trace_csv(main))?;
            write(dir, "summary.csv", &output::summary_csv(&main.summary))?;
            write(dir, "vehicles.csv", &output::vehicles_csv(&main.summary))?;
            write(dir, "comparison.csv", &output::comparison_csv(&cfg, &runs))?;
            let s = &main.summary;
            println!(
                "{}: {} vehicles, min voltage at node {} = {:.4} pu, {} penalty {}",
                s.policy,
                s.n_vehicles,
                s.reference_node,
                s.min_v_reference,
                cfg.metric().name(),
                match cfg.metric() {
                    PenaltyKind::Quadratic => s.penalty_quadratic,
                    PenaltyKind::Crenel => s.penalty_crenel,
                }
            );
        }
        Command::Montecarlo { common, draws, fleet_sizes, metric } => {
            let mut cfg = load(&common)?;
            if let Some(m) = metric {
                cfg.set_metric(m);
            }
            let draws = draws.unwrap_or(cfg.montecarlo.draws);
            let sizes = fleet_sizes.unwrap_or_else(|| cfg.montecarlo.fleet_sizes.clone());
            let policies = cfg.montecarlo.policies.clone();
            let report = run_monte_carlo(&cfg, draws, &sizes, &policies)?;
            write(&common.out, "report.csv", &output::report_csv(&report))?;
            write(&common.out, "draws.csv", &output::draws_csv(&report))?;
            print!("{:<16}", "policy");
            for n in &sizes {
                print!(" {:>16}", format!("{n} EV"));
            }
            println!();
            for p in &policies {
                print!("{:<16}", p.name());
                for &n in &sizes {
                    let c = report.cell(*p, n).expect("cell per policy and size");
                    print!(" {:>16}", format!("{:.3} ± {:.3}", c.mean, c.std));
                }
                println!();
            }
        }
        Command::Calibrate { common, target } => {
            let mut cfg = load(&common)?;
            if let Some(t) = target {
                cfg.calibrate.target_v = t;
            }
            let result = calibrate(&cfg)?;
            result.feeder.write(common.out.join("feeder.csv"))?;
            let csv = format!(
                "target_v,achieved_v,scale,bisections\n{},{},{},{}\n",
                cfg.calibrate.target_v, result.achieved_v, result.scale, result.iterations
            );
            write(&common.out, "calibration.csv", &csv)?;
            println!(
                "scale {:.6}: mean minimum {:.4} pu at node {} (target {})",
                result.scale, result.achieved_v, cfg.reference_node, cfg.calibrate.target_v
            );
        }
    }
    Ok(())
}
