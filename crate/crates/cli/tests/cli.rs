use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evcoord"))
}

fn bundled_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("config/evening.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn summary_value(dir: &Path, key: &str) -> String {
    rows(&dir.join("summary.csv"))
        .into_iter()
        .find(|r| r[0] == key)
        .unwrap_or_else(|| panic!("no {key} in summary"))[1]
        .clone()
}

#[test]
fn scenario_with_bundled_config_writes_every_file() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["scenario", "--config", bundled_config().to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["fleet.csv", "slots.csv", "voltages.csv", "profiles.csv", "trace.csv", "summary.csv", "vehicles.csv", "comparison.csv"] {
        assert!(out.path().join(f).is_file(), "missing {f}");
    }
    assert_eq!(summary_value(out.path(), "all_targets_met"), "true");
    // 17:00 to 10:00 in 30-minute slots
    assert_eq!(rows(&out.path().join("slots.csv")).len(), 1 + 34);
}

#[test]
fn missing_feeder_is_reported_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "version = 1\n[network]\nfeeder = \"absent_feeder.csv\"\n").unwrap();
    let o = run(&["scenario", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("absent_feeder.csv"), "{}", stderr(&o));
}

#[test]
fn crenel_totals_match_the_voltage_table() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "scenario",
        "--config",
        bundled_config().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--policy",
        "global-async",
        "--metric",
        "crenel",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(summary_value(out.path(), "policy"), "global-async");
    let voltages = rows(&out.path().join("voltages.csv"));
    let outside: usize = voltages[1..]
        .iter()
        .map(|r| r[2..].iter().filter(|v| !(0.9..=1.1).contains(&v.parse::<f64>().unwrap())).count())
        .sum();
    let slots = rows(&out.path().join("slots.csv"));
    let col = slots[0].iter().position(|h| h == "penalty_crenel").unwrap();
    let per_slot: f64 = slots[1..].iter().map(|r| r[col].parse::<f64>().unwrap()).sum();
    let total: f64 = summary_value(out.path(), "penalty_crenel").parse().unwrap();
    assert_eq!(total, outside as f64);
    assert_eq!(per_slot, total);
}

#[test]
fn single_draw_has_zero_spread() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["montecarlo", "--draws", "1", "--fleet-sizes", "10", "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = rows(&out.path().join("report.csv"));
    let std = report[0].iter().position(|h| h == "std_min_v").unwrap();
    assert_eq!(report.len(), 1 + 4);
    for r in &report[1..] {
        assert_eq!(r[std].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn montecarlo_table_has_a_cell_per_policy_and_size() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["montecarlo", "--draws", "10", "--fleet-sizes", "10,20,30", "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = rows(&out.path().join("report.csv"));
    assert_eq!(report.len(), 1 + 12);
    let draws = report[0].iter().position(|h| h == "draws").unwrap();
    assert!(report[1..].iter().all(|r| r[draws] == "10"));
}

#[test]
fn same_seed_gives_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["scenario", "--seed", "7", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let o = run(&["montecarlo", "--seed", "7", "--draws", "2", "--fleet-sizes", "10", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 10);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn unknown_config_key_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "version = 1\n\n[fleet]\nbogus = 3\n").unwrap();
    let o = run(&["scenario", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("c.toml:4") && err.contains("bogus"), "{err}");
}

#[test]
fn bad_flag_is_a_usage_error() {
    let o = run(&["scenario", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn unreachable_charge_target_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("fleet.csv"),
        "id,node,soc_init_kwh,soc_min_kwh,soc_max_kwh,p_max_kw,arrival_slot,departure_slot\n1,34,0,24,24,3.3,4,6\n",
    )
    .unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "version = 1\n[fleet]\nfile = \"fleet.csv\"\n").unwrap();
    let o = run(&["scenario", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("vehicle 1"));
}
