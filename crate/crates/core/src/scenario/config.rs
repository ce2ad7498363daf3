//! Run configuration: a versioned TOML document.
//!
//! Every table rejects unknown keys. Relative paths resolve against the
//! directory holding the configuration file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::baselines::DroopCurve;
use crate::coordination::{PolicyConfig, Schedule, Scope, UpdateOrder};
use crate::error::{Error, Result};
use crate::fleet::{read_fleet, FleetSpec, Horizon, Placement, Vehicle};
use crate::metrics::{Neighborhoods, PenaltyKind, VoltageBand};
use crate::network::surrogate::{bundled_feeder, ieee34_neighborhood_ranges, REFERENCE_NODE};
use crate::network::FeederModel;

pub const CONFIG_VERSION: u32 = 1;

/// Charging policy applied in every slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Uncoordinated,
    Droop,
    Brd(Schedule, Scope),
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Uncoordinated,
        PolicyKind::Droop,
        PolicyKind::Brd(Schedule::Asynchronous, Scope::Global),
        PolicyKind::Brd(Schedule::Synchronous, Scope::Global),
        PolicyKind::Brd(Schedule::Asynchronous, Scope::Local),
        PolicyKind::Brd(Schedule::Synchronous, Scope::Local),
    ];

    /// The four policies compared in the Monte Carlo table.
    pub const TABLE: [PolicyKind; 4] = [
        PolicyKind::Uncoordinated,
        PolicyKind::Droop,
        PolicyKind::Brd(Schedule::Asynchronous, Scope::Global),
        PolicyKind::Brd(Schedule::Asynchronous, Scope::Local),
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Uncoordinated => "uncoordinated",
            PolicyKind::Droop => "droop",
            PolicyKind::Brd(Schedule::Asynchronous, Scope::Global) => "global-async",
            PolicyKind::Brd(Schedule::Synchronous, Scope::Global) => "global-sync",
            PolicyKind::Brd(Schedule::Asynchronous, Scope::Local) => "local-async",
            PolicyKind::Brd(Schedule::Synchronous, Scope::Local) => "local-sync",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown policy `{s}` (expected uncoordinated|droop|global-async|global-sync|local-async|local-sync)"
            ))
        })
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FleetSource {
    Sampled(FleetSpec),
    File(Vec<Vehicle<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSettings {
    pub draws: usize,
    pub fleet_sizes: Vec<usize>,
    pub policies: Vec<PolicyKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSettings {
    /// Reference-node voltage to reach in the calibration regime (pu).
    pub target_v: f64,
    pub tolerance: f64,
    pub vehicles: usize,
    pub p_kw: f64,
    pub scale_lo: f64,
    pub scale_hi: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            target_v: 0.75,
            tolerance: 0.005,
            vehicles: 30,
            p_kw: 3.3,
            scale_lo: 1e-3,
            scale_hi: 1e3,
        }
    }
}

/// Fully resolved scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub feeder: FeederModel<f64>,
    pub feeder_path: Option<PathBuf>,
    pub fleet: FleetSource,
    pub horizon: Horizon,
    pub policy: PolicyKind,
    pub brd: PolicyConfig,
    pub band: VoltageBand<f64>,
    pub v_ref: f64,
    pub pilot_nodes: Vec<usize>,
    pub neighborhoods: Neighborhoods,
    pub droop: DroopCurve<f64>,
    pub seed: u64,
    pub reference_node: usize,
    pub montecarlo: MonteCarloSettings,
    pub calibrate: CalibrationSettings,
}

impl ScenarioConfig {
    /// Defaults on the bundled feeder.
    pub fn bundled() -> Self {
        Self::from_raw(RawConfig::default(), Path::new(".")).expect("defaults are valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, &path.display().to_string(), dir)
    }

    pub fn from_toml(text: &str, origin: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse(origin, line, e.message().to_string())
        })?;
        Self::from_raw(raw, base_dir)
    }

    fn from_raw(raw: RawConfig, dir: &Path) -> Result<Self> {
        if raw.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                raw.version
            )));
        }
        let net = raw.network;
        let feeder_path = net.feeder.map(|p| dir.join(p));
        let mut feeder = match &feeder_path {
            Some(p) => FeederModel::read(p)?,
            None => bundled_feeder(),
        };
        if net.house_load_kw.is_some() || net.house_load_kvar.is_some() {
            let (p, q) = (net.house_load_kw.unwrap_or(1.0), net.house_load_kvar.unwrap_or(0.2));
            feeder = feeder.with_uniform_base_load(p, q)?;
        }
        let pilot_nodes = match net.pilot_nodes {
            Some(list) => list,
            None => feeder.non_slack_ids(),
        };
        for &p in &pilot_nodes {
            if feeder.index_of(p).is_none() || p == feeder.slack_id() {
                return Err(Error::Config(format!("pilot node {p} is not a non-slack feeder bus")));
            }
        }
        let reference_node = net.reference_node.unwrap_or(REFERENCE_NODE);
        if feeder.index_of(reference_node).is_none() {
            return Err(Error::Config(format!("reference node {reference_node} is not in the feeder")));
        }

        let h = raw.horizon;
        let start = clock(&h.start)?;
        let mut end = clock(&h.end)?;
        if end <= start {
            end += 24.0;
        }
        if h.slot_minutes == 0 {
            return Err(Error::Config("slot_minutes must be positive".into()));
        }
        let horizon = Horizon {
            start_hour: start,
            end_hour: end,
            slot_hours: h.slot_minutes as f64 / 60.0,
        };
        let after_start = |t: f64| if t < start { t + 24.0 } else { t };

        let f = raw.fleet;
        let placement = match f.placement {
            RawPlacement::Mode(m) if m == "random" => Placement::Random,
            RawPlacement::Mode(m) => return Err(Error::Config(format!("unknown placement `{m}`"))),
            RawPlacement::Nodes(n) => Placement::Nodes(n),
        };
        let fleet = match f.file {
            Some(file) => {
                let vehicles = read_fleet(dir.join(file))?;
                for v in &vehicles {
                    if feeder.index_of(v.node).is_none() || v.node == feeder.slack_id() {
                        return Err(Error::Config(format!("vehicle {} is on node {}, which cannot host one", v.id, v.node)));
                    }
                    if v.departure_slot > horizon.n_slots() {
                        return Err(Error::Config(format!("vehicle {} departs after the horizon", v.id)));
                    }
                }
                FleetSource::File(vehicles)
            }
            None => FleetSource::Sampled(FleetSpec {
                n_vehicles: f.vehicles,
                battery_kwh: f.battery_kwh,
                range_km: f.range_km,
                need_km_mean: f.need_km_mean,
                need_km_std: f.need_km_std,
                arrival_mean_hour: after_start(clock(&f.arrival_mean)?),
                arrival_std_hours: f.arrival_std_min / 60.0,
                departure_mean_hour: after_start(clock(&f.departure_mean)?),
                departure_std_hours: f.departure_std_min / 60.0,
                p_max_kw: f.p_max_kw,
                placement,
            }),
        };

        let p = raw.policy;
        let policy: PolicyKind = p.kind.parse()?;
        let metric: PenaltyKind = p.metric.parse()?;
        let order = match p.order.as_str() {
            "ascending" => UpdateOrder::Ascending,
            "shuffled" => UpdateOrder::Shuffled(raw.seed),
            other => return Err(Error::Config(format!("unknown update order `{other}`"))),
        };
        if p.max_rounds == 0 {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        let brd = PolicyConfig {
            schedule: Schedule::Asynchronous,
            scope: Scope::Global,
            penalty_kind: metric,
            max_rounds: p.max_rounds,
            br_grid: p.br_grid,
            order,
        };
        let band = VoltageBand::new(p.v_lo, p.v_hi)?;
        let neighborhoods = match (p.neighborhoods_file, p.neighborhoods) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either neighborhoods or neighborhoods_file, not both".into()))
            }
            (Some(file), None) => Neighborhoods::read(dir.join(file))?,
            (None, ranges) => {
                let ranges: Vec<(usize, usize)> = match ranges {
                    Some(r) => r.into_iter().map(|[a, b]| (a, b)).collect(),
                    None => ieee34_neighborhood_ranges(),
                };
                Neighborhoods::from_ranges(&ranges, &pilot_nodes)?
            }
        };

        let d = raw.droop;
        let droop = DroopCurve::new(d.v_zero, d.v_full, d.p_ceiling)?;

        let mc = raw.montecarlo;
        let montecarlo = MonteCarloSettings {
            draws: mc.draws,
            fleet_sizes: mc.fleet_sizes,
            policies: mc.policies.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        };
        let c = raw.calibrate;
        let calibrate = CalibrationSettings {
            target_v: c.target_v,
            tolerance: c.tolerance,
            vehicles: c.vehicles,
            p_kw: c.p_kw,
            scale_lo: c.scale_lo,
            scale_hi: c.scale_hi,
        };
        if !(calibrate.scale_lo > 0.0 && calibrate.scale_lo < calibrate.scale_hi) {
            return Err(Error::Config("calibration needs 0 < scale_lo < scale_hi".into()));
        }

        Ok(Self {
            feeder,
            feeder_path,
            fleet,
            horizon,
            policy,
            brd,
            band,
            v_ref: p.v_ref,
            pilot_nodes,
            neighborhoods,
            droop,
            seed: raw.seed,
            reference_node,
            montecarlo,
            calibrate,
        })
    }

    /// Buses a sampled vehicle may be placed on.
    pub fn candidate_nodes(&self) -> Vec<usize> {
        self.feeder.non_slack_ids()
    }

    pub fn metric(&self) -> PenaltyKind {
        self.brd.penalty_kind
    }

    pub fn set_metric(&mut self, kind: PenaltyKind) {
        self.brd.penalty_kind = kind;
    }
}

/// Parses `HH:MM` into hours.
fn clock(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("bad clock time `{s}` (expected HH:MM)"));
    let (h, m) = s.split_once(':').ok_or_else(bad)?;
    let (h, m): (u32, u32) = (h.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?);
    if h > 23 || m > 59 {
        return Err(bad());
    }
    Ok(h as f64 + m as f64 / 60.0)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    version: u32,
    seed: u64,
    network: RawNetwork,
    horizon: RawHorizon,
    fleet: RawFleet,
    policy: RawPolicy,
    droop: RawDroop,
    montecarlo: RawMonteCarlo,
    calibrate: RawCalibrate,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 2013,
            network: RawNetwork::default(),
            horizon: RawHorizon::default(),
            fleet: RawFleet::default(),
            policy: RawPolicy::default(),
            droop: RawDroop::default(),
            montecarlo: RawMonteCarlo::default(),
            calibrate: RawCalibrate::default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNetwork {
    feeder: Option<PathBuf>,
    house_load_kw: Option<f64>,
    house_load_kvar: Option<f64>,
    pilot_nodes: Option<Vec<usize>>,
    reference_node: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawHorizon {
    start: String,
    end: String,
    slot_minutes: u32,
}

impl Default for RawHorizon {
    fn default() -> Self {
        Self {
            start: "17:00".into(),
            end: "10:00".into(),
            slot_minutes: 30,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawPlacement {
    Mode(String),
    Nodes(Vec<usize>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawFleet {
    vehicles: usize,
    battery_kwh: f64,
    range_km: f64,
    need_km_mean: f64,
    need_km_std: f64,
    arrival_mean: String,
    arrival_std_min: f64,
    departure_mean: String,
    departure_std_min: f64,
    p_max_kw: f64,
    placement: RawPlacement,
    file: Option<PathBuf>,
}

impl Default for RawFleet {
    fn default() -> Self {
        let spec = FleetSpec::default();
        Self {
            vehicles: spec.n_vehicles,
            battery_kwh: spec.battery_kwh,
            range_km: spec.range_km,
            need_km_mean: spec.need_km_mean,
            need_km_std: spec.need_km_std,
            arrival_mean: "18:45".into(),
            arrival_std_min: 60.0,
            departure_mean: "08:00".into(),
            departure_std_min: 45.0,
            p_max_kw: spec.p_max_kw,
            placement: RawPlacement::Mode("random".into()),
            file: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPolicy {
    kind: String,
    metric: String,
    max_rounds: usize,
    br_grid: usize,
    order: String,
    v_lo: f64,
    v_hi: f64,
    v_ref: f64,
    neighborhoods: Option<Vec<[usize; 2]>>,
    neighborhoods_file: Option<PathBuf>,
}

impl Default for RawPolicy {
    fn default() -> Self {
        Self {
            kind: "global-async".into(),
            metric: "quadratic".into(),
            max_rounds: 100,
            br_grid: 331,
            order: "ascending".into(),
            v_lo: 0.9,
            v_hi: 1.1,
            v_ref: 0.0,
            neighborhoods: None,
            neighborhoods_file: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawDroop {
    v_zero: f64,
    v_full: f64,
    p_ceiling: f64,
}

impl Default for RawDroop {
    fn default() -> Self {
        Self {
            v_zero: 0.90,
            v_full: 0.95,
            p_ceiling: 3.3,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawMonteCarlo {
    draws: usize,
    fleet_sizes: Vec<usize>,
    policies: Vec<String>,
}

impl Default for RawMonteCarlo {
    fn default() -> Self {
        Self {
            draws: 10,
            fleet_sizes: vec![10, 20, 30],
            policies: PolicyKind::TABLE.iter().map(|p| p.name().to_string()).collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawCalibrate {
    target_v: f64,
    tolerance: f64,
    vehicles: usize,
    p_kw: f64,
    scale_lo: f64,
    scale_hi: f64,
}

impl Default for RawCalibrate {
    fn default() -> Self {
        let d = CalibrationSettings::default();
        Self {
            target_v: d.target_v,
            tolerance: d.tolerance,
            vehicles: d.vehicles,
            p_kw: d.p_kw,
            scale_lo: d.scale_lo,
            scale_hi: d.scale_hi,
        }
    }
}
