use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Network;
use crate::profiles::ProfileLibrary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerKind {
    Ev,
    Pv,
}

/// One DER installation: `capacity_kw` of `kind` at `bus` following profile
/// row `profile_type`. `units` is the number of EVs or PV plants aggregated
/// into this entry (0 when the capacity is continuous).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub bus: u32,
    pub kind: DerKind,
    #[serde(default)]
    pub units: u32,
    pub capacity_kw: f64,
    #[serde(default)]
    pub profile_type: usize,
    #[serde(default = "unity")]
    pub power_factor: f64,
}

fn unity() -> f64 {
    1.0
}

impl Location {
    /// Reactive-to-real ratio implied by the fixed power factor.
    pub fn reactive_ratio(&self) -> f64 {
        let pf = self.power_factor;
        (1.0 - pf * pf).max(0.0).sqrt() / pf
    }
}

/// Parameters a scenario was generated from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pv: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ev_types: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: u64,
    pub locations: Vec<Location>,
    #[serde(default)]
    pub meta: ScenarioMeta,
}

/// Aggregate DER sizes of one scenario, the quantities hosting capacity is
/// reported in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DerTotals {
    pub ev_count: u64,
    pub ev_kw: f64,
    pub pv_kw: f64,
}

impl DerTotals {
    /// EV count plus PV kW. The two units are summed as-is.
    pub fn combined(&self) -> f64 {
        self.ev_count as f64 + self.pv_kw
    }
}

impl Scenario {
    pub fn empty(id: u64) -> Self {
        Scenario {
            id,
            locations: Vec::new(),
            meta: ScenarioMeta::default(),
        }
    }

    pub fn totals(&self) -> DerTotals {
        let mut t = DerTotals::default();
        for loc in &self.locations {
            match loc.kind {
                DerKind::Ev => {
                    t.ev_count += loc.units as u64;
                    t.ev_kw += loc.capacity_kw;
                }
                DerKind::Pv => t.pv_kw += loc.capacity_kw,
            }
        }
        t
    }

    /// Fixed-length learner input: installed EV kW per bus followed by
    /// installed PV kW per bus, both in network bus order.
    pub fn features(&self, index: &HashMap<u32, usize>) -> Vec<f64> {
        let n = index.len();
        let mut x = vec![0.0; 2 * n];
        for loc in &self.locations {
            if let Some(&i) = index.get(&loc.bus) {
                let offset = match loc.kind {
                    DerKind::Ev => 0,
                    DerKind::Pv => n,
                };
                x[offset + i] += loc.capacity_kw;
            }
        }
        x
    }

    pub fn validate(&self, net: &Network, profiles: &ProfileLibrary) -> Result<()> {
        for loc in &self.locations {
            if net.bus_index(loc.bus).is_none() {
                return Err(Error::InvalidInput(format!(
                    "scenario {}: unknown bus {}",
                    self.id, loc.bus
                )));
            }
            if !(loc.capacity_kw >= 0.0) || !loc.capacity_kw.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "scenario {}: capacity {} at bus {} must be a nonnegative number",
                    self.id, loc.capacity_kw, loc.bus
                )));
            }
            if !(loc.power_factor > 0.0 && loc.power_factor <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "scenario {}: power factor {} outside (0, 1]",
                    self.id, loc.power_factor
                )));
            }
            let set = profiles.get(loc.kind);
            if loc.profile_type >= set.n_types() {
                return Err(Error::InvalidInput(format!(
                    "scenario {}: profile type {} out of range for {:?} ({} types)",
                    self.id,
                    loc.profile_type,
                    loc.kind,
                    set.n_types()
                )));
            }
        }
        Ok(())
    }
}

/// An ordered pool of candidate scenarios.
pub type ScenarioPool = Vec<Scenario>;

/// Writes one scenario per line.
pub fn write_jsonl<W: Write>(mut w: W, pool: &[Scenario]) -> Result<()> {
    for s in pool {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<ScenarioPool> {
    let mut pool = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Scenario = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidInput(format!("pool line {}: {e}", n + 1)))?;
        pool.push(s);
    }
    Ok(pool)
}

pub fn load_pool(path: impl AsRef<std::path::Path>) -> Result<ScenarioPool> {
    let file = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(file))
}
