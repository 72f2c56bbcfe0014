//! Scenario pool generation.
//!
//! EV adoption is a Poisson count per candidate bus; PV adoption is a number
//! of plants placed on pre-selected buses. Sweeping the Poisson rate and the
//! plant count over a grid produces pools that straddle the feasibility
//! boundary.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Network;
use crate::profiles::ProfileLibrary;
use crate::scenario::{DerKind, Location, Scenario, ScenarioMeta, ScenarioPool};

/// Level 1 charger rating, kW.
pub const LEVEL1_CHARGER_KW: f64 = 1.92;
/// Default PV plant size, kW.
pub const DEFAULT_PV_PLANT_KW: f64 = 25.0;

/// Named set of buses to which EV adoption can be restricted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cluster {
    pub id: String,
    pub buses: Vec<u32>,
    #[serde(default)]
    pub description: String,
}

pub fn load_clusters(path: impl AsRef<Path>) -> Result<Vec<Cluster>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("cluster file: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvPoolConfig {
    /// Empty means every non-root bus carrying baseline load.
    #[serde(default)]
    pub candidate_buses: Vec<u32>,
    /// Restrict adoption to this cluster; overrides `candidate_buses`.
    #[serde(default)]
    pub cluster: Option<String>,
    pub lambda_range: [f64; 2],
    #[serde(default = "default_lambda_step")]
    pub lambda_step: f64,
    #[serde(default = "default_types")]
    pub n_ev_types: usize,
    #[serde(default = "default_charger_kw")]
    pub charger_kw: f64,
    #[serde(default = "unity")]
    pub power_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PvCountMode {
    /// `N_PV` plants in total, each on a uniformly drawn candidate bus.
    #[default]
    Total,
    /// Each candidate bus independently gets `Uniform{0..=N_PV}` plants.
    PerBus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvPoolConfig {
    pub candidate_buses: Vec<u32>,
    #[serde(default)]
    pub n_pv_range: [u32; 2],
    #[serde(default = "one_u32")]
    pub n_pv_step: u32,
    #[serde(default = "default_types")]
    pub n_pv_types: usize,
    #[serde(default = "default_plant_kw")]
    pub plant_kw: f64,
    #[serde(default)]
    pub pv_count_mode: PvCountMode,
    #[serde(default = "unity")]
    pub power_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    #[serde(default)]
    pub ev: Option<EvPoolConfig>,
    #[serde(default)]
    pub pv: Option<PvPoolConfig>,
    /// Give every EV a PV plant of `pv.plant_kw` at the same bus. The
    /// `n_pv_range` sweep is not used in this mode.
    #[serde(default)]
    pub colocate_pv_with_ev: bool,
    pub pool_size_target: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_lambda_step() -> f64 {
    0.1
}
fn default_types() -> usize {
    20
}
fn default_charger_kw() -> f64 {
    LEVEL1_CHARGER_KW
}
fn default_plant_kw() -> f64 {
    DEFAULT_PV_PLANT_KW
}
fn unity() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}

impl PoolConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(format!("pool config: {e}")))
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        match &self.ev {
            Some(ev) => {
                let [lo, hi] = ev.lambda_range;
                let n = ((hi - lo) / ev.lambda_step + 1e-9).floor() as usize;
                (0..=n).map(|i| lo + i as f64 * ev.lambda_step).collect()
            }
            None => vec![],
        }
    }

    pub fn n_pv_grid(&self) -> Vec<u32> {
        match &self.pv {
            Some(pv) if !self.colocate_pv_with_ev => {
                let [lo, hi] = pv.n_pv_range;
                (lo..=hi).step_by(pv.n_pv_step.max(1) as usize).collect()
            }
            _ => vec![],
        }
    }

    /// Checks ranges and bus references against `net` and `clusters`.
    pub fn validate(&self, net: &Network, clusters: &[Cluster]) -> Result<()> {
        let invalid = |msg: String| Err(Error::ConfigInvalid(msg));
        let buses: HashSet<u32> = net.buses.iter().copied().collect();
        if self.pool_size_target == 0 {
            return invalid("pool_size_target must be positive".into());
        }
        if self.ev.is_none() && self.pv.is_none() {
            return invalid("pool config needs an `ev` or `pv` section".into());
        }
        if let Some(ev) = &self.ev {
            let [lo, hi] = ev.lambda_range;
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return invalid(format!("lambda_range [{lo}, {hi}] must satisfy 0 < lo <= hi"));
            }
            if !(ev.lambda_step > 0.0) {
                return invalid("lambda_step must be positive".into());
            }
            if ev.n_ev_types == 0 {
                return invalid("n_ev_types must be at least 1".into());
            }
            if !(ev.charger_kw > 0.0) {
                return invalid("charger_kw must be positive".into());
            }
            if !(ev.power_factor > 0.0 && ev.power_factor <= 1.0) {
                return invalid("ev power_factor must lie in (0, 1]".into());
            }
            if let Some(id) = &ev.cluster {
                let cluster = clusters
                    .iter()
                    .find(|c| &c.id == id)
                    .ok_or_else(|| Error::ConfigInvalid(format!("unknown cluster `{id}`")))?;
                if cluster.buses.is_empty() {
                    return invalid(format!("cluster `{id}` has no buses"));
                }
                if let Some(b) = cluster.buses.iter().find(|b| !buses.contains(b)) {
                    return invalid(format!("cluster `{id}` references unknown bus {b}"));
                }
            }
            if let Some(b) = ev.candidate_buses.iter().find(|b| !buses.contains(b)) {
                return invalid(format!("EV candidate bus {b} not in network"));
            }
        }
        if let Some(pv) = &self.pv {
            if pv.candidate_buses.is_empty() {
                return invalid("pv.candidate_buses must not be empty".into());
            }
            if let Some(b) = pv.candidate_buses.iter().find(|b| !buses.contains(b)) {
                return invalid(format!("PV candidate bus {b} not in network"));
            }
            if pv.n_pv_range[0] > pv.n_pv_range[1] {
                return invalid("n_pv_range must satisfy lo <= hi".into());
            }
            if pv.n_pv_types == 0 {
                return invalid("n_pv_types must be at least 1".into());
            }
            if !(pv.plant_kw >= 0.0) {
                return invalid("plant_kw must be nonnegative".into());
            }
            if !(pv.power_factor > 0.0 && pv.power_factor <= 1.0) {
                return invalid("pv power_factor must lie in (0, 1]".into());
            }
        }
        if self.colocate_pv_with_ev && (self.ev.is_none() || self.pv.is_none()) {
            return invalid("colocate_pv_with_ev needs both `ev` and `pv` sections".into());
        }
        Ok(())
    }

    /// Checks that requested type counts fit the profile library.
    pub fn validate_profiles(&self, profiles: &ProfileLibrary) -> Result<()> {
        if let Some(ev) = &self.ev {
            if ev.n_ev_types > profiles.ev.n_types() {
                return Err(Error::ConfigInvalid(format!(
                    "n_ev_types {} exceeds {} EV profile rows",
                    ev.n_ev_types,
                    profiles.ev.n_types()
                )));
            }
        }
        if let Some(pv) = &self.pv {
            if pv.n_pv_types > profiles.pv.n_types() {
                return Err(Error::ConfigInvalid(format!(
                    "n_pv_types {} exceeds {} PV profile rows",
                    pv.n_pv_types,
                    profiles.pv.n_types()
                )));
            }
        }
        Ok(())
    }

    fn ev_buses(&self, net: &Network, clusters: &[Cluster]) -> Vec<u32> {
        let Some(ev) = &self.ev else { return vec![] };
        if let Some(id) = &ev.cluster {
            if let Some(c) = clusters.iter().find(|c| &c.id == id) {
                return c.buses.clone();
            }
        }
        if !ev.candidate_buses.is_empty() {
            return ev.candidate_buses.clone();
        }
        let root = net.root_bus();
        net.buses
            .iter()
            .zip(&net.baseline.d_kw)
            .filter(|(b, d)| Some(**b) != root && d.iter().any(|x| *x > 0.0))
            .map(|(b, _)| *b)
            .collect()
    }
}

/// Independent Poisson(`lambda`) adoption count per bus.
pub fn draw_adoption_counts(buses: &[u32], lambda: f64, rng: &mut impl Rng) -> Result<BTreeMap<u32, u32>> {
    let dist = Poisson::new(lambda)
        .map_err(|e| Error::ConfigInvalid(format!("Poisson rate {lambda}: {e}")))?;
    let mut out = BTreeMap::new();
    for &b in buses {
        let k: f64 = dist.sample(rng);
        *out.entry(b).or_insert(0) += k as u32;
    }
    Ok(out)
}

/// One `(bus, profile_type)` entry per adopted unit, types uniform on
/// `0..n_types`.
pub fn assign_profiles(counts: &BTreeMap<u32, u32>, n_types: usize, rng: &mut impl Rng) -> Vec<(u32, usize)> {
    let n_types = n_types.max(1);
    let mut out = Vec::new();
    for (&bus, &count) in counts {
        for _ in 0..count {
            let ty = if n_types == 1 { 0 } else { rng.random_range(0..n_types) };
            out.push((bus, ty));
        }
    }
    out
}

fn aggregate(
    entries: &[(u32, usize)],
    kind: DerKind,
    unit_kw: f64,
    power_factor: f64,
) -> Vec<Location> {
    let mut grouped: BTreeMap<(u32, usize), u32> = BTreeMap::new();
    for &(bus, ty) in entries {
        *grouped.entry((bus, ty)).or_default() += 1;
    }
    grouped
        .into_iter()
        .map(|((bus, profile_type), units)| Location {
            bus,
            kind,
            units,
            capacity_kw: units as f64 * unit_kw,
            profile_type,
            power_factor,
        })
        .collect()
}

/// Sweeps the Poisson-rate grid and the PV-count grid, drawing
/// `ceil(target / grid_points)` scenarios per grid point.
pub fn generate_pool(
    config: &PoolConfig,
    net: &Network,
    clusters: &[Cluster],
    rng: &mut impl Rng,
) -> Result<ScenarioPool> {
    config.validate(net, clusters)?;
    let lambdas = config.lambda_grid();
    let n_pvs = config.n_pv_grid();
    let lambda_axis: Vec<Option<f64>> = if lambdas.is_empty() {
        vec![None]
    } else {
        lambdas.into_iter().map(Some).collect()
    };
    let pv_axis: Vec<Option<u32>> = if n_pvs.is_empty() {
        vec![None]
    } else {
        n_pvs.into_iter().map(Some).collect()
    };
    let points = lambda_axis.len() * pv_axis.len();
    let per_point = config.pool_size_target.div_ceil(points);
    let ev_buses = config.ev_buses(net, clusters);
    let cluster = config.ev.as_ref().and_then(|e| e.cluster.clone());

    let mut pool = Vec::with_capacity(points * per_point);
    for &lambda in &lambda_axis {
        for &n_pv in &pv_axis {
            for _ in 0..per_point {
                let mut locations = Vec::new();
                let mut ev_units = Vec::new();
                if let (Some(ev), Some(lambda)) = (&config.ev, lambda) {
                    let counts = draw_adoption_counts(&ev_buses, lambda, rng)?;
                    ev_units = assign_profiles(&counts, ev.n_ev_types, rng);
                    locations.extend(aggregate(&ev_units, DerKind::Ev, ev.charger_kw, ev.power_factor));
                }
                if let Some(pv) = &config.pv {
                    let plants: Vec<(u32, usize)> = if config.colocate_pv_with_ev {
                        let mut counts = BTreeMap::new();
                        for &(bus, _) in &ev_units {
                            *counts.entry(bus).or_insert(0) += 1;
                        }
                        assign_profiles(&counts, pv.n_pv_types, rng)
                    } else {
                        let n = n_pv.unwrap_or(0);
                        let counts = match pv.pv_count_mode {
                            PvCountMode::Total => {
                                let mut counts = BTreeMap::new();
                                for _ in 0..n {
                                    let bus = *pv.candidate_buses.choose(rng).expect("nonempty");
                                    *counts.entry(bus).or_insert(0) += 1;
                                }
                                counts
                            }
                            PvCountMode::PerBus => pv
                                .candidate_buses
                                .iter()
                                .map(|&b| (b, rng.random_range(0..=n)))
                                .fold(BTreeMap::new(), |mut m, (b, k)| {
                                    *m.entry(b).or_insert(0) += k;
                                    m
                                }),
                        };
                        assign_profiles(&counts, pv.n_pv_types, rng)
                    };
                    locations.extend(aggregate(&plants, DerKind::Pv, pv.plant_kw, pv.power_factor));
                }
                pool.push(Scenario {
                    id: pool.len() as u64,
                    locations,
                    meta: ScenarioMeta {
                        lambda,
                        n_pv,
                        cluster: cluster.clone(),
                        n_ev_types: config.ev.as_ref().map(|e| e.n_ev_types),
                    },
                });
            }
        }
    }
    Ok(pool)
}

/// [`generate_pool`] driven by `config.seed`.
pub fn generate_pool_seeded(config: &PoolConfig, net: &Network, clusters: &[Cluster]) -> Result<ScenarioPool> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    generate_pool(config, net, clusters, &mut rng)
}

/// Continuous-capacity pool: each scenario places `Uniform[lo_kw, hi_kw]` of
/// `kind` (profile type 0) at every bus in `buses`.
pub fn uniform_box_pool(
    buses: &[u32],
    kind: DerKind,
    lo_kw: f64,
    hi_kw: f64,
    size: usize,
    rng: &mut impl Rng,
) -> ScenarioPool {
    (0..size)
        .map(|id| Scenario {
            id: id as u64,
            locations: buses
                .iter()
                .map(|&bus| Location {
                    bus,
                    kind,
                    units: 0,
                    capacity_kw: rng.random_range(lo_kw..=hi_kw),
                    profile_type: 0,
                    power_factor: 1.0,
                })
                .collect(),
            meta: ScenarioMeta::default(),
        })
        .collect()
}
