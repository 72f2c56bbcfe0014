//! Hosting-capacity metrics over a labelled set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::LabeledEntry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub scenario_id: u64,
    pub total_ev: u64,
    pub total_pv_kw: f64,
    pub combined: f64,
    pub label: u8,
}

/// Maxima over feasible scenarios. `combined` adds the EV count to PV kW
/// as-is; `total_kw` adds installed EV kW to PV kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostingCapacity {
    pub max_ev_count: u64,
    pub max_ev_kw: f64,
    pub max_pv_kw: f64,
    pub max_combined: f64,
    pub max_total_kw: f64,
    pub argmax_ev_count: u64,
    pub argmax_pv_kw: u64,
    pub argmax_combined: u64,
    pub argmax_total_kw: u64,
    pub n_feasible: usize,
    pub n_labeled: usize,
    /// Feasible scenarios in the top decile by combined size.
    pub frontier: Vec<FrontierRow>,
}

fn argmax_by<'a>(entries: &[&'a LabeledEntry], key: impl Fn(&LabeledEntry) -> f64) -> &'a LabeledEntry {
    let mut best = entries[0];
    for &e in &entries[1..] {
        let (a, b) = (key(e), key(best));
        if a > b || (a == b && e.scenario_id < best.scenario_id) {
            best = e;
        }
    }
    best
}

/// Computes capacity metrics from the feasible entries of `entries`.
pub fn hosting_capacity(entries: &[LabeledEntry]) -> Result<HostingCapacity> {
    let feasible: Vec<&LabeledEntry> = entries.iter().filter(|e| e.label == 1).collect();
    if feasible.is_empty() {
        return Err(Error::NoFeasibleScenario);
    }
    let ev = argmax_by(&feasible, |e| e.totals.ev_count as f64);
    let ev_kw = argmax_by(&feasible, |e| e.totals.ev_kw);
    let pv = argmax_by(&feasible, |e| e.totals.pv_kw);
    let comb = argmax_by(&feasible, |e| e.totals.combined());
    let total = argmax_by(&feasible, |e| e.totals.ev_kw + e.totals.pv_kw);

    let mut ranked = feasible.clone();
    ranked.sort_by(|a, b| {
        b.totals
            .combined()
            .partial_cmp(&a.totals.combined())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.scenario_id.cmp(&b.scenario_id))
    });
    let keep = ranked.len().div_ceil(10);
    let frontier = ranked[..keep]
        .iter()
        .map(|e| FrontierRow {
            scenario_id: e.scenario_id,
            total_ev: e.totals.ev_count,
            total_pv_kw: e.totals.pv_kw,
            combined: e.totals.combined(),
            label: e.label,
        })
        .collect();

    Ok(HostingCapacity {
        max_ev_count: ev.totals.ev_count,
        max_ev_kw: ev_kw.totals.ev_kw,
        max_pv_kw: pv.totals.pv_kw,
        max_combined: comb.totals.combined(),
        max_total_kw: total.totals.ev_kw + total.totals.pv_kw,
        argmax_ev_count: ev.scenario_id,
        argmax_pv_kw: pv.scenario_id,
        argmax_combined: comb.scenario_id,
        argmax_total_kw: total.scenario_id,
        n_feasible: feasible.len(),
        n_labeled: entries.len(),
        frontier,
    })
}

/// Frontier rows as `scenario_id,total_ev,total_pv_kw,combined,label`.
pub fn write_frontier_csv<W: std::io::Write>(w: W, rows: &[FrontierRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scenario_id", "total_ev", "total_pv_kw", "combined", "label"])?;
    for r in rows {
        out.write_record([
            r.scenario_id.to_string(),
            r.total_ev.to_string(),
            r.total_pv_kw.to_string(),
            r.combined.to_string(),
            r.label.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
