use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default system base used when a network file does not override it.
pub const DEFAULT_BASE_KVA: f64 = 100.0;

/// A line between two buses. Impedances and rating are in per-unit on the
/// network base.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    pub s_max: f64,
}

/// Daily baseline demand, one row per bus (network bus order), `steps`
/// columns. Real load in kW, reactive load in kvar.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineProfiles {
    pub steps: usize,
    pub d_kw: Vec<Vec<f64>>,
    pub e_kvar: Vec<Vec<f64>>,
}

impl BaselineProfiles {
    pub fn zeros(n_buses: usize, steps: usize) -> Self {
        BaselineProfiles {
            steps,
            d_kw: vec![vec![0.0; steps]; n_buses],
            e_kvar: vec![vec![0.0; steps]; n_buses],
        }
    }

    /// Total baseline real demand at step `t`, kW.
    pub fn total_kw(&self, t: usize) -> f64 {
        self.d_kw.iter().map(|row| row[t]).sum()
    }
}

/// Radial distribution network. Voltages are stored squared (p.u.^2), the
/// quantity the branch-flow equations are written in.
///
/// The first bus listed is the substation (root). Line orientation in the
/// input does not matter; flows are always reported parent-to-child.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub base_kva: f64,
    pub v_root: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub buses: Vec<u32>,
    pub lines: Vec<Line>,
    pub baseline: BaselineProfiles,
}

impl Network {
    /// Builds a network with default voltage settings (root at 1.0 p.u.,
    /// limits at 0.95 and 1.05 p.u.) and a zero baseline of `steps` steps.
    pub fn new(buses: Vec<u32>, lines: Vec<Line>, steps: usize) -> Self {
        let n = buses.len();
        Network {
            base_kva: DEFAULT_BASE_KVA,
            v_root: 1.0,
            v_min: 0.95 * 0.95,
            v_max: 1.05 * 1.05,
            buses,
            lines,
            baseline: BaselineProfiles::zeros(n, steps),
        }
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn steps(&self) -> usize {
        self.baseline.steps
    }

    pub fn root_bus(&self) -> Option<u32> {
        self.buses.first().copied()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|&b| b == id)
    }

    pub fn bus_index_map(&self) -> HashMap<u32, usize> {
        self.buses.iter().enumerate().map(|(i, &b)| (b, i)).collect()
    }

    pub fn to_pu(&self, kw: f64) -> f64 {
        kw / self.base_kva
    }

    pub fn from_pu(&self, pu: f64) -> f64 {
        pu * self.base_kva
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("network file: {e}")))?;
        Ok(file.into_network())
    }

    /// Loads a network file and rejects it if validation reports anything.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let net = Self::from_json_str(&text)?;
        let report = validate_network(&net);
        if !report.is_valid() {
            return Err(Error::InvalidInput(format!("{}: {report}", path.display())));
        }
        Ok(net)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            base_kva: self.base_kva,
            v_root_pu: self.v_root.sqrt(),
            v_min_pu: self.v_min.sqrt(),
            v_max_pu: self.v_max.sqrt(),
            buses: self.buses.iter().map(|&id| BusRecord { id }).collect(),
            lines: self
                .lines
                .iter()
                .map(|l| LineRecord {
                    from: l.from,
                    to: l.to,
                    r_pu: l.r,
                    x_pu: l.x,
                    s_max_pu: l.s_max,
                })
                .collect(),
            baseline: Some(BaselineRecord {
                steps: self.baseline.steps,
                d_kw: self.baseline.d_kw.clone(),
                e_kvar: self.baseline.e_kvar.clone(),
            }),
        }
    }
}

/// On-disk network schema. Voltages are magnitudes in p.u.; they are squared
/// on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default = "default_base_kva")]
    pub base_kva: f64,
    #[serde(default = "one")]
    pub v_root_pu: f64,
    #[serde(default = "default_v_min")]
    pub v_min_pu: f64,
    #[serde(default = "default_v_max")]
    pub v_max_pu: f64,
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub from: u32,
    pub to: u32,
    pub r_pu: f64,
    pub x_pu: f64,
    pub s_max_pu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineRecord {
    #[serde(rename = "T")]
    pub steps: usize,
    pub d_kw: Vec<Vec<f64>>,
    pub e_kvar: Vec<Vec<f64>>,
}

fn default_base_kva() -> f64 {
    DEFAULT_BASE_KVA
}
fn one() -> f64 {
    1.0
}
fn default_v_min() -> f64 {
    0.95
}
fn default_v_max() -> f64 {
    1.05
}

impl NetworkFile {
    pub fn into_network(self) -> Network {
        let n = self.buses.len();
        let baseline = match self.baseline {
            Some(b) => BaselineProfiles {
                steps: b.steps,
                d_kw: b.d_kw,
                e_kvar: b.e_kvar,
            },
            None => BaselineProfiles::zeros(n, 1),
        };
        Network {
            base_kva: self.base_kva,
            v_root: self.v_root_pu * self.v_root_pu,
            v_min: self.v_min_pu * self.v_min_pu,
            v_max: self.v_max_pu * self.v_max_pu,
            buses: self.buses.into_iter().map(|b| b.id).collect(),
            lines: self
                .lines
                .into_iter()
                .map(|l| Line {
                    from: l.from,
                    to: l.to,
                    r: l.r_pu,
                    x: l.x_pu,
                    s_max: l.s_max_pu,
                })
                .collect(),
            baseline,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoBuses,
    DuplicateBus(u32),
    UnknownBus { line: usize, bus: u32 },
    SelfLoop { line: usize },
    LineCount { lines: usize, buses: usize },
    Cycle { line: usize },
    Disconnected(u32),
    NegativeResistance { line: usize, r: f64 },
    NonFiniteImpedance { line: usize },
    NonPositiveRating { line: usize, s_max: f64 },
    VoltageBounds { v_min: f64, v_max: f64 },
    NonPositiveRootVoltage,
    NonPositiveBase,
    BaselineShape(String),
    BaselineValue { bus: u32, t: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoBuses => write!(f, "network has no buses"),
            Violation::DuplicateBus(id) => write!(f, "duplicate bus id {id}"),
            Violation::UnknownBus { line, bus } => {
                write!(f, "line {line} references unknown bus {bus}")
            }
            Violation::SelfLoop { line } => write!(f, "not radial: line {line} is a self loop"),
            Violation::LineCount { lines, buses } => {
                write!(f, "not radial: {lines} lines for {buses} buses")
            }
            Violation::Cycle { line } => write!(f, "not radial: line {line} closes a cycle"),
            Violation::Disconnected(id) => write!(f, "disconnected bus {id}"),
            Violation::NegativeResistance { line, r } => {
                write!(f, "negative resistance {r} on line {line}")
            }
            Violation::NonFiniteImpedance { line } => {
                write!(f, "non-finite impedance on line {line}")
            }
            Violation::NonPositiveRating { line, s_max } => {
                write!(f, "non-positive rating {s_max} on line {line}")
            }
            Violation::VoltageBounds { v_min, v_max } => {
                write!(f, "voltage bounds inverted: v_min {v_min} >= v_max {v_max}")
            }
            Violation::NonPositiveRootVoltage => write!(f, "root voltage must be positive"),
            Violation::NonPositiveBase => write!(f, "base_kva must be positive"),
            Violation::BaselineShape(msg) => write!(f, "baseline dimension mismatch: {msg}"),
            Violation::BaselineValue { bus, t, value } => {
                write!(f, "baseline value {value} at bus {bus}, step {t} is negative or non-finite")
            }
        }
    }
}

/// Every problem found in a network. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.to_string()).collect()
    }

    pub fn is_radial(&self) -> bool {
        !self.violations.iter().any(|v| {
            matches!(
                v,
                Violation::NoBuses
                    | Violation::DuplicateBus(_)
                    | Violation::UnknownBus { .. }
                    | Violation::SelfLoop { .. }
                    | Violation::LineCount { .. }
                    | Violation::Cycle { .. }
                    | Violation::Disconnected(_)
            )
        })
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.messages().join("; "))
    }
}

/// Collects every structural and numeric problem in `net`.
pub fn validate_network(net: &Network) -> ValidationReport {
    let mut out = Vec::new();
    if net.buses.is_empty() {
        out.push(Violation::NoBuses);
        return ValidationReport { violations: out };
    }
    let mut index = HashMap::new();
    for (i, &id) in net.buses.iter().enumerate() {
        if index.insert(id, i).is_some() {
            out.push(Violation::DuplicateBus(id));
        }
    }
    if net.lines.len() != net.buses.len() - 1 {
        out.push(Violation::LineCount {
            lines: net.lines.len(),
            buses: net.buses.len(),
        });
    }

    // union-find over endpoints detects cycles and disconnection
    let mut parent: Vec<usize> = (0..net.buses.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (k, line) in net.lines.iter().enumerate() {
        if !(line.r.is_finite() && line.x.is_finite()) {
            out.push(Violation::NonFiniteImpedance { line: k });
        } else if line.r < 0.0 {
            out.push(Violation::NegativeResistance { line: k, r: line.r });
        }
        if !(line.s_max > 0.0) {
            out.push(Violation::NonPositiveRating {
                line: k,
                s_max: line.s_max,
            });
        }
        let (a, b) = match (index.get(&line.from), index.get(&line.to)) {
            (Some(&a), Some(&b)) => (a, b),
            (from, to) => {
                if from.is_none() {
                    out.push(Violation::UnknownBus {
                        line: k,
                        bus: line.from,
                    });
                }
                if to.is_none() {
                    out.push(Violation::UnknownBus {
                        line: k,
                        bus: line.to,
                    });
                }
                continue;
            }
        };
        if a == b {
            out.push(Violation::SelfLoop { line: k });
            continue;
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            out.push(Violation::Cycle { line: k });
        } else {
            parent[ra] = rb;
        }
    }
    let root_set = find(&mut parent, 0);
    for i in 1..net.buses.len() {
        if find(&mut parent, i) != root_set {
            out.push(Violation::Disconnected(net.buses[i]));
        }
    }

    if !(net.v_min < net.v_max) {
        out.push(Violation::VoltageBounds {
            v_min: net.v_min,
            v_max: net.v_max,
        });
    }
    if !(net.v_root > 0.0) {
        out.push(Violation::NonPositiveRootVoltage);
    }
    if !(net.base_kva > 0.0) {
        out.push(Violation::NonPositiveBase);
    }

    let b = &net.baseline;
    if b.d_kw.len() != net.buses.len() || b.e_kvar.len() != net.buses.len() {
        out.push(Violation::BaselineShape(format!(
            "expected {} rows, got d_kw {} / e_kvar {}",
            net.buses.len(),
            b.d_kw.len(),
            b.e_kvar.len()
        )));
    } else {
        for (i, (d, e)) in b.d_kw.iter().zip(&b.e_kvar).enumerate() {
            if d.len() != b.steps || e.len() != b.steps {
                out.push(Violation::BaselineShape(format!(
                    "bus {} has {}/{} steps, expected T = {}",
                    net.buses[i],
                    d.len(),
                    e.len(),
                    b.steps
                )));
                continue;
            }
            for (t, &value) in d.iter().chain(e.iter()).enumerate() {
                if !value.is_finite() || value < 0.0 {
                    out.push(Violation::BaselineValue {
                        bus: net.buses[i],
                        t: t % b.steps.max(1),
                        value,
                    });
                }
            }
        }
    }
    ValidationReport { violations: out }
}

/// Parent/child structure of a radial network, indexed by bus position.
#[derive(Debug, Clone)]
pub struct Topology {
    /// Bus indices in root-to-leaf (breadth-first) order.
    pub order: Vec<usize>,
    /// Parent bus index; `None` for the root.
    pub parent: Vec<Option<usize>>,
    /// Index of the line feeding each bus; `None` for the root.
    pub parent_line: Vec<Option<usize>>,
    /// For each line, the child bus index it feeds.
    pub line_child: Vec<usize>,
    /// For each line, the parent bus index it leaves from.
    pub line_parent: Vec<usize>,
}

impl Topology {
    pub fn build(net: &Network) -> Result<Self> {
        let report = validate_network(net);
        if !report.is_radial() {
            return Err(Error::NotRadial(report.to_string()));
        }
        let n = net.buses.len();
        let index = net.bus_index_map();
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, line) in net.lines.iter().enumerate() {
            let a = index[&line.from];
            let b = index[&line.to];
            adjacency[a].push((b, k));
            adjacency[b].push((a, k));
        }
        let mut parent = vec![None; n];
        let mut parent_line = vec![None; n];
        let mut line_child = vec![usize::MAX; net.lines.len()];
        let mut line_parent = vec![usize::MAX; net.lines.len()];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &(j, k) in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    parent[j] = Some(i);
                    parent_line[j] = Some(k);
                    line_child[k] = j;
                    line_parent[k] = i;
                    queue.push_back(j);
                }
            }
        }
        Ok(Topology {
            order,
            parent,
            parent_line,
            line_child,
            line_parent,
        })
    }

    /// Bus indices on the path from the root to `bus`, root first.
    pub fn path_to_root(&self, bus: usize) -> Vec<usize> {
        let mut path = vec![bus];
        let mut cur = bus;
        while let Some(p) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

/// Bus ids in root-to-leaf order; each bus appears after its parent.
pub fn topological_order(net: &Network) -> Result<Vec<u32>> {
    let topo = Topology::build(net)?;
    Ok(topo.order.iter().map(|&i| net.buses[i]).collect())
}
