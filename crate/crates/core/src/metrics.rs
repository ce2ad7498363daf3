//! Voltage-deviation penalties and the charging objectives built on the
//! sensitivity linearization.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{FeederModel, SensitivityMatrix};
use crate::scalar::Real;

/// Admissible voltage band in pu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageBand<T> {
    pub v_lo: T,
    pub v_hi: T,
}

impl<T: Real> VoltageBand<T> {
    pub fn new(v_lo: T, v_hi: T) -> Result<Self> {
        if !(T::zero() < v_lo && v_lo < v_hi) {
            return Err(Error::Config(format!("voltage band needs 0 < v_lo < v_hi, got [{v_lo}, {v_hi}]")));
        }
        Ok(Self { v_lo, v_hi })
    }

    pub fn contains(&self, v: T) -> bool {
        v >= self.v_lo && v <= self.v_hi
    }
}

impl<T: Real> Default for VoltageBand<T> {
    fn default() -> Self {
        Self {
            v_lo: T::lit(0.9),
            v_hi: T::lit(1.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    /// Squared distance to the violated band edge.
    Quadratic,
    /// 0 inside the band, 1 outside.
    Crenel,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Quadratic => "quadratic",
            PenaltyKind::Crenel => "crenel",
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(PenaltyKind::Quadratic),
            "crenel" => Ok(PenaltyKind::Crenel),
            other => Err(Error::Config(format!("unknown metric `{other}` (expected quadratic|crenel)"))),
        }
    }
}

pub fn penalty<T: Real>(v: T, band: &VoltageBand<T>, kind: PenaltyKind) -> T {
    match kind {
        PenaltyKind::Quadratic => {
            if v < band.v_lo {
                (v - band.v_lo) * (v - band.v_lo)
            } else if v > band.v_hi {
                (v - band.v_hi) * (v - band.v_hi)
            } else {
                T::zero()
            }
        }
        PenaltyKind::Crenel => {
            if band.contains(v) {
                T::zero()
            } else {
                T::one()
            }
        }
    }
}

/// Partition of buses into neighbourhoods, each watching a set of pilot buses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Neighborhoods {
    pub member_of: BTreeMap<usize, usize>,
    pub pilots: BTreeMap<usize, Vec<usize>>,
}

impl Neighborhoods {
    /// Neighbourhood `k + 1` holds buses `ranges[k].0 ..= ranges[k].1` and
    /// watches the pilots that fall in the same range.
    pub fn from_ranges(ranges: &[(usize, usize)], pilot_nodes: &[usize]) -> Result<Self> {
        let mut out = Self::default();
        for (k, &(lo, hi)) in ranges.iter().enumerate() {
            if lo > hi {
                return Err(Error::Config(format!("neighborhood range {lo}-{hi} is empty")));
            }
            let id = k + 1;
            for node in lo..=hi {
                if out.member_of.insert(node, id).is_some() {
                    return Err(Error::Config(format!("node {node} belongs to two neighborhoods")));
                }
            }
            out.pilots.insert(id, pilot_nodes.iter().copied().filter(|p| (lo..=hi).contains(p)).collect());
        }
        Ok(out)
    }

    pub fn pilots_for(&self, node: usize) -> Option<&[usize]> {
        self.member_of.get(&node).and_then(|n| self.pilots.get(n)).map(Vec::as_slice)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut out = Self::default();
        let mut section = None;
        let mut expect_header = false;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[members]" | "[pilots]" => {
                    section = Some(line);
                    expect_header = true;
                    continue;
                }
                _ if line.starts_with('[') => return Err(Error::parse(origin, n, format!("unknown section {line}"))),
                _ => {}
            }
            let Some(sec) = section else {
                return Err(Error::parse(origin, n, "data before any section header"));
            };
            if expect_header {
                let want = if sec == "[members]" { "node_id,neighborhood_id" } else { "neighborhood_id,node_id" };
                if line.replace(' ', "") != want {
                    return Err(Error::parse(origin, n, format!("expected header `{want}`")));
                }
                expect_header = false;
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 2 {
                return Err(Error::parse(origin, n, format!("expected 2 fields, found {}", f.len())));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(origin, n, format!("bad integer `{s}`: {e}")));
            let (a, b) = (int(f[0])?, int(f[1])?);
            if sec == "[members]" {
                if out.member_of.insert(a, b).is_some() {
                    return Err(Error::parse(origin, n, format!("node {a} assigned twice")));
                }
            } else {
                out.pilots.entry(a).or_default().push(b);
            }
        }
        Ok(out)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn serialize(&self) -> String {
        let mut out = String::from("[members]\nnode_id,neighborhood_id\n");
        for (node, id) in &self.member_of {
            let _ = writeln!(out, "{node},{id}");
        }
        out.push_str("[pilots]\nneighborhood_id,node_id\n");
        for (id, pilots) in &self.pilots {
            for p in pilots {
                let _ = writeln!(out, "{id},{p}");
            }
        }
        out
    }
}

/// Everything a vehicle needs to score a charging change.
///
/// `load_sensitivity[p][c]` is the voltage change at pilot `p` (pu) per kW of
/// extra consumption at control bus `c`; `delta_p` vectors are kW of extra
/// consumption relative to the linearization point, indexed like
/// `control_nodes`. The penalty argument at pilot `p` is
/// `v_measured[p] − v_ref + Σ_c load_sensitivity[p][c]·Δp_c`.
#[derive(Debug, Clone)]
pub struct ObjectiveContext<T> {
    pub pilot_nodes: Vec<usize>,
    pub control_nodes: Vec<usize>,
    pub v_measured: Vec<T>,
    pub v_ref: T,
    pub load_sensitivity: Matrix<T>,
    pub band: VoltageBand<T>,
    pub kind: PenaltyKind,
    scopes: Option<HashMap<usize, Vec<usize>>>,
}

impl<T: Real> ObjectiveContext<T> {
    pub fn new(
        pilot_nodes: Vec<usize>,
        control_nodes: Vec<usize>,
        v_measured: Vec<T>,
        load_sensitivity: Matrix<T>,
        band: VoltageBand<T>,
        kind: PenaltyKind,
    ) -> Result<Self> {
        if v_measured.len() != pilot_nodes.len()
            || load_sensitivity.rows() != pilot_nodes.len()
            || load_sensitivity.cols() != control_nodes.len()
        {
            return Err(Error::Contract(format!(
                "context dimensions disagree: {} pilots, {} measurements, {}x{} sensitivity, {} controls",
                pilot_nodes.len(),
                v_measured.len(),
                load_sensitivity.rows(),
                load_sensitivity.cols(),
                control_nodes.len()
            )));
        }
        Ok(Self {
            pilot_nodes,
            control_nodes,
            v_measured,
            v_ref: T::zero(),
            load_sensitivity,
            band,
            kind,
            scopes: None,
        })
    }

    /// Context at the sensitivity's own operating point; pilot voltages are
    /// read from that load-flow solution.
    pub fn from_sensitivity(model: &FeederModel<T>, sens: &SensitivityMatrix<T>, band: VoltageBand<T>, kind: PenaltyKind) -> Result<Self> {
        let v_measured = sens
            .pilot_nodes
            .iter()
            .map(|&p| {
                model
                    .index_of(p)
                    .map(|i| sens.operating_point.v_mag[i])
                    .ok_or_else(|| Error::Config(format!("pilot node {p} not in feeder")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            sens.pilot_nodes.clone(),
            sens.control_nodes.clone(),
            v_measured,
            sens.per_kw_of_load(),
            band,
            kind,
        )
    }

    pub fn with_v_ref(mut self, v_ref: T) -> Self {
        self.v_ref = v_ref;
        self
    }

    /// Restricts each control bus's local objective to its neighbourhood's pilots.
    pub fn with_neighborhoods(mut self, hoods: &Neighborhoods) -> Self {
        let pos: HashMap<usize, usize> = self.pilot_nodes.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let scopes = self
            .control_nodes
            .iter()
            .filter_map(|&c| {
                hoods
                    .pilots_for(c)
                    .map(|ps| (c, ps.iter().filter_map(|p| pos.get(p).copied()).collect::<Vec<_>>()))
            })
            .collect();
        self.scopes = Some(scopes);
        self
    }

    /// Pilot positions watched by a vehicle at `node` under the local objective.
    pub fn local_scope(&self, node: usize) -> Result<&[usize]> {
        self.scopes
            .as_ref()
            .and_then(|s| s.get(&node))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("no neighborhood defined for node {node}")))
    }

    pub fn control_index(&self, node: usize) -> Option<usize> {
        self.control_nodes.iter().position(|&c| c == node)
    }

    fn check_dim(&self, delta_p: &[T]) -> Result<()> {
        if delta_p.len() != self.control_nodes.len() {
            return Err(Error::Contract(format!(
                "delta_p has {} entries, context has {} control nodes",
                delta_p.len(),
                self.control_nodes.len()
            )));
        }
        Ok(())
    }

    /// Penalty arguments at every pilot for a consumption change `delta_p`.
    pub fn arguments(&self, delta_p: &[T]) -> Result<Vec<T>> {
        self.check_dim(delta_p)?;
        let shift = self.load_sensitivity.mul_vec(delta_p);
        Ok(self.v_measured.iter().zip(shift).map(|(&v, d)| v - self.v_ref + d).collect())
    }

    /// Predicted absolute pilot voltages (the arguments with `v_ref` added back).
    pub fn predicted_voltages(&self, delta_p: &[T]) -> Result<Vec<T>> {
        Ok(self.arguments(delta_p)?.into_iter().map(|u| u + self.v_ref).collect())
    }

    pub(crate) fn sum_penalties(&self, args: &[T], scope: Option<&[usize]>) -> T {
        match scope {
            None => args.iter().fold(T::zero(), |s, &u| s + penalty(u, &self.band, self.kind)),
            Some(idx) => idx.iter().fold(T::zero(), |s, &i| s + penalty(args[i], &self.band, self.kind)),
        }
    }
}

pub fn global_objective<T: Real>(delta_p: &[T], ctx: &ObjectiveContext<T>) -> Result<T> {
    let args = ctx.arguments(delta_p)?;
    Ok(ctx.sum_penalties(&args, None))
}

pub fn local_objective<T: Real>(vehicle_node: usize, delta_p: &[T], ctx: &ObjectiveContext<T>) -> Result<T> {
    let scope = ctx.local_scope(vehicle_node)?;
    let args = ctx.arguments(delta_p)?;
    Ok(ctx.sum_penalties(&args, Some(scope)))
}

/// Exact potential of the global game; identical to [`global_objective`].
pub fn potential<T: Real>(delta_p: &[T], ctx: &ObjectiveContext<T>) -> Result<T> {
    global_objective(delta_p, ctx)
}
