use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::admittance::{assemble_admittance, Admittance};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Bus<T> {
    pub id: usize,
    /// Household active demand in kW.
    pub base_load_p: T,
    /// Household reactive demand in kVAr.
    pub base_load_q: T,
    pub is_slack: bool,
}

/// A series branch; impedances are in ohms.
#[derive(Debug, Clone, PartialEq)]
pub struct Line<T> {
    pub from_bus: usize,
    pub to_bus: usize,
    pub resistance: T,
    pub reactance: T,
}

impl<T: Real> Line<T> {
    pub fn r_over_x(&self) -> T {
        self.resistance / self.reactance
    }
}

/// A validated radial feeder together with its per-unit admittance matrix.
///
/// Buses keep their external ids; all matrices are indexed by position in
/// `buses()`.
#[derive(Debug, Clone)]
pub struct FeederModel<T> {
    buses: Vec<Bus<T>>,
    lines: Vec<Line<T>>,
    base_voltage: T,
    base_power: T,
    admittance: Admittance<T>,
    slack: usize,
    index_of: HashMap<usize, usize>,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
}

impl<T: Real> PartialEq for FeederModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.buses == other.buses
            && self.lines == other.lines
            && self.base_voltage == other.base_voltage
            && self.base_power == other.base_power
    }
}

impl<T: Real> FeederModel<T> {
    pub fn new(buses: Vec<Bus<T>>, lines: Vec<Line<T>>, base_voltage: T, base_power: T) -> Result<Self> {
        if !(base_voltage > T::zero()) || !(base_power > T::zero()) {
            return Err(Error::Model("per-unit bases must be positive".into()));
        }
        if buses.is_empty() {
            return Err(Error::Model("feeder has no buses".into()));
        }
        let mut index_of = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            if index_of.insert(b.id, i).is_some() {
                return Err(Error::Model(format!("duplicate bus id {}", b.id)));
            }
            if !b.is_slack && (b.base_load_p < T::zero() || b.base_load_q < T::zero()) {
                return Err(Error::Model(format!("bus {} has a negative base load", b.id)));
            }
        }
        let slacks: Vec<usize> = buses.iter().enumerate().filter(|(_, b)| b.is_slack).map(|(i, _)| i).collect();
        let slack = match slacks.as_slice() {
            [s] => *s,
            [] => return Err(Error::Model("no slack bus".into())),
            _ => return Err(Error::Model(format!("{} slack buses, expected exactly one", slacks.len()))),
        };

        let admittance = assemble_admittance(&buses, &lines, &index_of, base_voltage, base_power)?;
        let (parent, depth) = tree_levels(buses.len(), slack, &lines, &index_of);

        Ok(Self {
            buses,
            lines,
            base_voltage,
            base_power,
            admittance,
            slack,
            index_of,
            parent,
            depth,
        })
    }

    pub fn buses(&self) -> &[Bus<T>] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line<T>] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    pub fn base_voltage(&self) -> T {
        self.base_voltage
    }

    pub fn base_power(&self) -> T {
        self.base_power
    }

    pub fn base_impedance(&self) -> T {
        self.base_voltage * self.base_voltage / self.base_power
    }

    pub fn admittance(&self) -> &Admittance<T> {
        &self.admittance
    }

    pub fn slack_index(&self) -> usize {
        self.slack
    }

    pub fn slack_id(&self) -> usize {
        self.buses[self.slack].id
    }

    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    pub fn id_of(&self, index: usize) -> usize {
        self.buses[index].id
    }

    /// Bus ids of every bus except the slack, in bus order.
    pub fn non_slack_ids(&self) -> Vec<usize> {
        self.buses.iter().filter(|b| !b.is_slack).map(|b| b.id).collect()
    }

    /// Number of lines between a bus and the slack.
    pub fn depth(&self, index: usize) -> usize {
        self.depth[index]
    }

    /// Upstream neighbour of a bus (`None` for the slack).
    pub fn parent(&self, index: usize) -> Option<usize> {
        self.parent[index]
    }

    /// Bus indices from the slack down to `index`, inclusive.
    pub fn path_from_slack(&self, index: usize) -> Vec<usize> {
        let mut path = vec![index];
        let mut cur = index;
        while let Some(p) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Leaf buses (no downstream neighbour), in bus order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.len()];
        for p in self.parent.iter().flatten() {
            has_child[*p] = true;
        }
        (0..self.len()).filter(|&i| !has_child[i] && i != self.slack).collect()
    }

    /// Mean R/X ratio over all lines.
    pub fn mean_r_over_x(&self) -> T {
        let n = T::lit(self.lines.len().max(1) as f64);
        self.lines.iter().fold(T::zero(), |acc, l| acc + l.r_over_x()) / n
    }

    /// Per-bus household demand as `(p_kw, q_kvar)` vectors.
    pub fn base_loads(&self) -> (Vec<T>, Vec<T>) {
        self.buses.iter().map(|b| (b.base_load_p, b.base_load_q)).unzip()
    }

    /// Copy with every line impedance multiplied by `factor`.
    pub fn with_impedance_scale(&self, factor: T) -> Result<Self> {
        let lines = self
            .lines
            .iter()
            .map(|l| Line {
                resistance: l.resistance * factor,
                reactance: l.reactance * factor,
                ..l.clone()
            })
            .collect();
        Self::new(self.buses.clone(), lines, self.base_voltage, self.base_power)
    }

    /// Copy with the same household demand at every non-slack bus.
    pub fn with_uniform_base_load(&self, p_kw: T, q_kvar: T) -> Result<Self> {
        let buses = self
            .buses
            .iter()
            .map(|b| Bus {
                base_load_p: if b.is_slack { T::zero() } else { p_kw },
                base_load_q: if b.is_slack { T::zero() } else { q_kvar },
                ..b.clone()
            })
            .collect();
        Self::new(buses, self.lines.clone(), self.base_voltage, self.base_power)
    }

    /// Converts kW (or kVAr) to per-unit on the feeder's power base.
    pub fn kw_to_pu(&self, kw: T) -> T {
        kw * T::lit(1000.0) / self.base_power
    }

    pub fn pu_to_kw(&self, pu: T) -> T {
        pu * self.base_power / T::lit(1000.0)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.serialize()).map_err(|e| Error::io(path, e))
    }

    /// Parses the sectioned feeder format. `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut section: Option<(&str, usize)> = None;
        let mut expect_header = false;
        let mut bases: Option<(T, T)> = None;
        let mut buses = Vec::new();
        let mut lines = Vec::new();
        let mut seen = BTreeSet::new();

        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                let name = line
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .ok_or_else(|| Error::parse(origin, lineno, "malformed section header"))?;
                let name = match name {
                    "base" | "buses" | "lines" => name,
                    other => return Err(Error::parse(origin, lineno, format!("unknown section [{other}]"))),
                };
                if !seen.insert(name) {
                    return Err(Error::parse(origin, lineno, format!("section [{name}] repeated")));
                }
                section = Some((name, lineno));
                expect_header = true;
                continue;
            }
            let Some((name, _)) = section else {
                return Err(Error::parse(origin, lineno, "data before any section header"));
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if expect_header {
                let want: &[&str] = match name {
                    "base" => &["v_volts", "s_va"],
                    "buses" => &["id", "base_load_p_kw", "base_load_q_kvar", "is_slack"],
                    _ => &["from", "to", "r_ohm", "x_ohm"],
                };
                if fields != want {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("expected header `{}` for [{name}]", want.join(",")),
                    ));
                }
                expect_header = false;
                continue;
            }
            let arity = if name == "base" { 2 } else { 4 };
            if fields.len() != arity {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected {arity} fields, found {}", fields.len()),
                ));
            }
            let num = |s: &str| -> Result<T> {
                s.parse::<T>()
                    .map_err(|e| Error::parse(origin, lineno, format!("bad number `{s}`: {e}")))
            };
            let id = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .map_err(|e| Error::parse(origin, lineno, format!("bad bus id `{s}`: {e}")))
            };
            match name {
                "base" => {
                    if bases.is_some() {
                        return Err(Error::parse(origin, lineno, "[base] takes a single row"));
                    }
                    bases = Some((num(fields[0])?, num(fields[1])?));
                }
                "buses" => {
                    let is_slack = match fields[3] {
                        "true" | "1" => true,
                        "false" | "0" => false,
                        other => return Err(Error::parse(origin, lineno, format!("bad is_slack `{other}`"))),
                    };
                    buses.push(Bus {
                        id: id(fields[0])?,
                        base_load_p: num(fields[1])?,
                        base_load_q: num(fields[2])?,
                        is_slack,
                    });
                }
                _ => {
                    let line = Line {
                        from_bus: id(fields[0])?,
                        to_bus: id(fields[1])?,
                        resistance: num(fields[2])?,
                        reactance: num(fields[3])?,
                    };
                    lines.push(line);
                }
            }
        }
        if expect_header {
            let (name, at) = section.expect("section open");
            return Err(Error::parse(origin, at, format!("section [{name}] has no header")));
        }
        let (v, s) = bases.ok_or_else(|| Error::parse(origin, 0, "missing [base] section"))?;
        Self::new(buses, lines, v, s)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[base]\nv_volts,s_va\n{},{}", self.base_voltage, self.base_power);
        let _ = writeln!(out, "[buses]\nid,base_load_p_kw,base_load_q_kvar,is_slack");
        for b in &self.buses {
            let _ = writeln!(out, "{},{},{},{}", b.id, b.base_load_p, b.base_load_q, b.is_slack);
        }
        let _ = writeln!(out, "[lines]\nfrom,to,r_ohm,x_ohm");
        for l in &self.lines {
            let _ = writeln!(out, "{},{},{},{}", l.from_bus, l.to_bus, l.resistance, l.reactance);
        }
        out
    }
}

/// BFS from the slack; assumes `assemble_admittance` already proved the line set is a tree.
fn tree_levels<T>(n: usize, slack: usize, lines: &[Line<T>], index_of: &HashMap<usize, usize>) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut adj = vec![Vec::new(); n];
    for l in lines {
        let (a, b) = (index_of[&l.from_bus], index_of[&l.to_bus]);
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut parent = vec![None; n];
    let mut depth = vec![0; n];
    let mut visited = vec![false; n];
    let mut queue = std::collections::VecDeque::from([slack]);
    visited[slack] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                parent[v] = Some(u);
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    (parent, depth)
}
