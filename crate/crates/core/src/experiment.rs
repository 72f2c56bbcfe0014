//! Experiment descriptions and the runs built from them: exhaustive
//! labelling of a pool, repeated active-learning episodes per strategy and
//! the aggregated report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::active::{
    hosting_capacity, run_episode, Budget, EpisodeConfig, EpisodeResult, HostingCapacity, PoolItem,
    QueryStrategy, StrategyKind,
};
use crate::error::{Error, Result};
use crate::generate::{generate_pool, load_clusters, uniform_box_pool, PoolConfig};
use crate::grid::Network;
use crate::learner::{fit_boundary, Hyper, Hyperplane, LabeledEntry, SvmOptions};
use crate::oracle::{label_for, FeasibilityOracle, OracleConfig, ViolationKind};
use crate::profiles::{synth_profiles, ProfileLibrary, ProfileSet, SynthParams};
use crate::scenario::{load_pool, DerKind, Scenario, ScenarioPool};

/// Where the behaviour profiles come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    Synthetic(SyntheticProfiles),
    Csv(CsvProfiles),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticProfiles {
    #[serde(default = "twenty")]
    pub n_ev_types: usize,
    #[serde(default = "twenty")]
    pub n_pv_types: usize,
    #[serde(default)]
    pub params: SynthParams,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvProfiles {
    pub ev: PathBuf,
    pub pv: PathBuf,
    /// EV rows are stored as positive consumption and need negating.
    #[serde(default)]
    pub negate_ev: bool,
}

/// Where the scenario pool comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoolSpec {
    /// Poisson-rate / PV-count sweep.
    Sweep(SweepPool),
    /// Independent uniform capacities at a fixed bus set.
    UniformBox(BoxPool),
    /// Pre-generated JSON Lines file.
    File(FilePool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPool {
    pub config: PoolConfig,
    #[serde(default)]
    pub clusters: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxPool {
    pub buses: Vec<u32>,
    pub der: DerKind,
    pub lo_kw: f64,
    pub hi_kw: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilePool {
    pub path: PathBuf,
}

/// Capacity measure used for curves and "first to reach the maximum".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HcMetric {
    /// EV count plus PV kW.
    #[default]
    Combined,
    /// Installed EV kW plus PV kW.
    TotalKw,
}

impl HcMetric {
    pub fn of(self, hc: &HostingCapacity) -> f64 {
        match self {
            HcMetric::Combined => hc.max_combined,
            HcMetric::TotalKw => hc.max_total_kw,
        }
    }
}

/// Boundary-concentration diagnostic: fraction of the first `queries`
/// queried points lying within `delta_pu` of a linear boundary fitted to
/// the exhaustive labels (features in p.u. of the network base).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySpec {
    pub delta_pu: f64,
    pub queries: usize,
    pub svm: SvmOptions,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            delta_pu: 0.4,
            queries: 100,
            svm: SvmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: PathBuf,
    pub profiles: ProfileSpec,
    pub pool: PoolSpec,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<QueryStrategy>,
    pub query_size: usize,
    pub rounds: usize,
    #[serde(default = "one")]
    pub eps_bar: f64,
    #[serde(default = "one_usize")]
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hyper: Hyper,
    /// Label the whole pool once for ground truth.
    #[serde(default = "yes")]
    pub exhaustive: bool,
    #[serde(default)]
    pub metric: HcMetric,
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
}

fn twenty() -> usize {
    20
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn all_strategies() -> Vec<QueryStrategy> {
    vec![
        QueryStrategy::new(StrategyKind::Uniform),
        QueryStrategy::new(StrategyKind::Entropy),
        QueryStrategy::new(StrategyKind::InfoDensity),
    ]
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.network = resolve(base, &cfg.network);
        if let ProfileSpec::Csv(c) = &mut cfg.profiles {
            c.ev = resolve(base, &c.ev);
            c.pv = resolve(base, &c.pv);
        }
        match &mut cfg.pool {
            PoolSpec::Sweep(s) => {
                if let Some(c) = &mut s.clusters {
                    *c = resolve(base, c);
                }
            }
            PoolSpec::File(f) => f.path = resolve(base, &f.path),
            PoolSpec::UniformBox(_) => {}
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::ConfigInvalid("episodes must be >= 1".into()));
        }
        if self.query_size == 0 || self.rounds == 0 {
            return Err(Error::ConfigInvalid("query_size and rounds must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.eps_bar) {
            return Err(Error::ConfigInvalid(format!("eps_bar {} outside [0, 1]", self.eps_bar)));
        }
        if self.strategies.is_empty() {
            return Err(Error::ConfigInvalid("no strategies listed".into()));
        }
        for s in &self.strategies {
            s.validate()?;
        }
        if let Some(b) = &self.boundary {
            if !(b.delta_pu > 0.0) || b.queries == 0 {
                return Err(Error::ConfigInvalid("boundary needs delta_pu > 0 and queries >= 1".into()));
            }
            if !self.exhaustive {
                return Err(Error::ConfigInvalid("boundary diagnostic requires exhaustive = true".into()));
            }
        }
        Ok(())
    }

    pub fn budget(&self) -> Budget {
        Budget::new(self.query_size, self.rounds)
    }
}

/// Builds the profile library described by `spec` for a horizon of `steps`.
pub fn build_profiles(spec: &ProfileSpec, steps: usize) -> Result<ProfileLibrary> {
    match spec {
        ProfileSpec::Synthetic(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let ev = synth_profiles(DerKind::Ev, s.n_ev_types, steps, &s.params, &mut rng);
            let pv = synth_profiles(DerKind::Pv, s.n_pv_types, steps, &s.params, &mut rng);
            ProfileLibrary::new(ev, pv)
        }
        ProfileSpec::Csv(c) => {
            let ev = ProfileSet::load_csv(DerKind::Ev, &c.ev, c.negate_ev)?;
            let pv = ProfileSet::load_csv(DerKind::Pv, &c.pv, false)?;
            ProfileLibrary::new(ev, pv)
        }
    }
}

/// Builds the scenario pool described by `spec`, seeding any randomness
/// with `seed`.
pub fn build_pool(spec: &PoolSpec, net: &Network, seed: u64) -> Result<ScenarioPool> {
    match spec {
        PoolSpec::Sweep(s) => {
            let clusters = match &s.clusters {
                Some(path) => load_clusters(path)?,
                None => Vec::new(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generate_pool(&s.config, net, &clusters, &mut rng)
        }
        PoolSpec::UniformBox(b) => {
            if b.buses.is_empty() || !(b.lo_kw <= b.hi_kw) || b.lo_kw < 0.0 || b.size == 0 {
                return Err(Error::ConfigInvalid("uniform box needs buses, 0 <= lo_kw <= hi_kw, size >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(uniform_box_pool(&b.buses, b.der, b.lo_kw, b.hi_kw, b.size, &mut rng))
        }
        PoolSpec::File(f) => load_pool(&f.path),
    }
}

/// Loaded network, profiles and pool for one experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub network: Network,
    pub profiles: ProfileLibrary,
    pub pool: ScenarioPool,
}

impl Experiment {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config(ExperimentConfig::load(path)?)
    }

    pub fn from_config(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let network = Network::load(&config.network)?;
        let profiles = build_profiles(&config.profiles, network.steps())?;
        let pool = build_pool(&config.pool, &network, config.seed)?;
        Self::from_parts(config, network, profiles, pool)
    }

    /// Assembles an experiment from already loaded parts.
    pub fn from_parts(
        config: ExperimentConfig,
        network: Network,
        profiles: ProfileLibrary,
        pool: ScenarioPool,
    ) -> Result<Self> {
        config.validate()?;
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        if profiles.steps() != network.steps() {
            return Err(Error::DimensionMismatch(format!(
                "profiles have {} steps, network baseline has {}",
                profiles.steps(),
                network.steps()
            )));
        }
        for s in &pool {
            s.validate(&network, &profiles)?;
        }
        Ok(Experiment { config, network, profiles, pool })
    }

    pub fn oracle(&self) -> Result<FeasibilityOracle<'_>> {
        FeasibilityOracle::new(
            &self.network,
            &self.profiles,
            OracleConfig::default().with_eps_bar(self.config.eps_bar),
        )
    }

    pub fn items(&self) -> Vec<PoolItem> {
        PoolItem::from_scenarios(&self.pool, &self.network.bus_index_map())
    }
}

/// Violation records tallied by kind and by element.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationHistogram {
    pub by_kind: BTreeMap<ViolationKind, usize>,
    /// `(kind, element) -> count`, serialized as a list of rows.
    pub by_element: Vec<ViolationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRow {
    pub kind: ViolationKind,
    pub element: u32,
    pub count: usize,
}

impl ViolationHistogram {
    fn from_map(map: BTreeMap<(ViolationKind, u32), usize>) -> Self {
        let mut by_kind: BTreeMap<ViolationKind, usize> =
            ViolationKind::ALL.iter().map(|k| (*k, 0)).collect();
        for ((kind, _), count) in &map {
            *by_kind.entry(*kind).or_default() += count;
        }
        ViolationHistogram {
            by_kind,
            by_element: map
                .into_iter()
                .map(|((kind, element), count)| ViolationRow { kind, element, count })
                .collect(),
        }
    }

    /// Voltage violation kind with the most records, if any.
    pub fn dominant_voltage_kind(&self) -> Option<ViolationKind> {
        let under = self.by_kind.get(&ViolationKind::Undervoltage).copied().unwrap_or(0);
        let over = self.by_kind.get(&ViolationKind::Overvoltage).copied().unwrap_or(0);
        match under.cmp(&over) {
            std::cmp::Ordering::Greater => Some(ViolationKind::Undervoltage),
            std::cmp::Ordering::Less => Some(ViolationKind::Overvoltage),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// Ground truth from labelling every scenario in the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Exhaustive {
    pub pass_fractions: Vec<f64>,
    pub labels: Vec<u8>,
    pub violations: ViolationHistogram,
}

impl Exhaustive {
    pub fn feasible_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&l| l == 1).count() as f64 / self.labels.len() as f64
    }

    /// Labels under a different threshold.
    pub fn relabel(&self, eps_bar: f64) -> Vec<u8> {
        self.pass_fractions.iter().map(|&pf| label_for(pf, eps_bar)).collect()
    }
}

/// Violation records per `(kind, element)`.
type ElementTally = BTreeMap<(ViolationKind, u32), usize>;

/// Evaluates every scenario once (in parallel, order-preserving).
pub fn label_exhaustive(oracle: &FeasibilityOracle<'_>, pool: &[Scenario]) -> Result<Exhaustive> {
    let results: Vec<(f64, u8, ElementTally)> = pool
        .par_iter()
        .map(|s| {
            let v = oracle.evaluate(s)?;
            let mut counts = BTreeMap::new();
            for w in &v.worst_violations {
                *counts.entry((w.kind, w.element)).or_insert(0usize) += 1;
            }
            Ok((v.pass_fraction, v.label, counts))
        })
        .collect::<Result<_>>()?;
    let mut merged: BTreeMap<(ViolationKind, u32), usize> = BTreeMap::new();
    let mut pass_fractions = Vec::with_capacity(pool.len());
    let mut labels = Vec::with_capacity(pool.len());
    for (pf, label, counts) in results {
        pass_fractions.push(pf);
        labels.push(label);
        for (k, c) in counts {
            *merged.entry(k).or_default() += c;
        }
    }
    Ok(Exhaustive {
        pass_fractions,
        labels,
        violations: ViolationHistogram::from_map(merged),
    })
}

/// Labelled entries for a fully labelled pool.
pub fn labeled_entries(items: &[PoolItem], labels: &[u8]) -> Vec<LabeledEntry> {
    items
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (item, &label))| LabeledEntry {
            scenario_id: item.id,
            pool_index: i,
            features: item.features.clone(),
            label,
            round: 0,
            totals: item.totals,
        })
        .collect()
}

/// Runs `config.episodes` episodes of one strategy with seeds `seed + i`.
/// Labels come from `exhaustive` when given, otherwise from the oracle.
pub fn run_strategy(
    exp: &Experiment,
    items: &[PoolItem],
    strategy: QueryStrategy,
    exhaustive: Option<&Exhaustive>,
) -> Result<Vec<EpisodeResult>> {
    let oracle = exp.oracle()?;
    let pool = &exp.pool;
    (0..exp.config.episodes)
        .map(|i| {
            let cfg = EpisodeConfig {
                strategy,
                budget: exp.config.budget(),
                hyper: exp.config.hyper,
                seed: exp.config.seed.wrapping_add(i as u64),
            };
            match exhaustive {
                Some(ex) => run_episode(items, |k| Ok(ex.labels[k]), &cfg),
                None => run_episode(items, |k| Ok(oracle.evaluate(&pool[k])?.label), &cfg),
            }
        })
        .collect()
}

/// Aggregate capacity figures (mean or standard deviation across episodes).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HcStats {
    pub ev_count: f64,
    pub ev_kw: f64,
    pub pv_kw: f64,
    pub combined: f64,
    pub total_kw: f64,
}

impl HcStats {
    fn of(hc: Option<&HostingCapacity>) -> Self {
        hc.map_or_else(HcStats::default, |h| HcStats {
            ev_count: h.max_ev_count as f64,
            ev_kw: h.max_ev_kw,
            pv_kw: h.max_pv_kw,
            combined: h.max_combined,
            total_kw: h.max_total_kw,
        })
    }

    fn fields(&self) -> [f64; 5] {
        [self.ev_count, self.ev_kw, self.pv_kw, self.combined, self.total_kw]
    }

    fn from_fields(f: [f64; 5]) -> Self {
        HcStats { ev_count: f[0], ev_kw: f[1], pv_kw: f[2], combined: f[3], total_kw: f[4] }
    }
}

/// Mean and population standard deviation; the deviation is 0 for a single
/// sample.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub labels_requested: usize,
    pub hc: Option<HostingCapacity>,
    pub final_train_accuracy: Option<f64>,
    pub boundary_fraction: Option<f64>,
    /// Labels spent before the chosen metric first hit the exhaustive maximum.
    pub queries_to_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub queries: usize,
    pub combined_mean: f64,
    pub combined_std: f64,
    pub total_kw_mean: f64,
    pub total_kw_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: QueryStrategy,
    pub episodes: Vec<EpisodeSummary>,
    pub hc_mean: HcStats,
    pub hc_std: HcStats,
    pub curve: Vec<CurvePoint>,
    pub boundary_fraction_mean: Option<f64>,
    pub queries_to_max_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveSummary {
    pub eps_bar: f64,
    pub n_scenarios: usize,
    pub feasible_fraction: f64,
    pub hc: Option<HostingCapacity>,
    pub violations: ViolationHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub delta_pu: f64,
    pub queries: usize,
    /// Fitted in p.u. feature coordinates.
    pub hyperplane: Hyperplane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateLoad {
    pub scenario_id: u64,
    pub baseline_kw: Vec<f64>,
    pub scenario_kw: Vec<f64>,
}

/// Everything a run produces except wall-clock timings, which are kept
/// apart so that the report is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub n_scenarios: usize,
    pub eps_bar: f64,
    pub query_size: usize,
    pub rounds: usize,
    pub episodes: usize,
    pub seed: u64,
    pub metric: HcMetric,
    pub exhaustive: Option<ExhaustiveSummary>,
    pub boundary: Option<BoundaryReport>,
    pub strategies: Vec<StrategyReport>,
    /// Strategy with the smallest mean `queries_to_max`.
    pub first_to_max: Option<StrategyKind>,
    pub aggregate_load: Option<AggregateLoad>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub strategy: StrategyKind,
    pub episodes: usize,
    pub mean_seconds: f64,
}

/// Report plus side products that are not part of the report document.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub timing: Vec<TimingRow>,
    pub results: Vec<(QueryStrategy, Vec<EpisodeResult>)>,
    pub exhaustive: Option<Exhaustive>,
}

fn queries_to_max(res: &EpisodeResult, metric: HcMetric, target: f64) -> Option<usize> {
    res.history
        .rounds
        .iter()
        .find(|r| {
            let v = match metric {
                HcMetric::Combined => r.cumulative_combined,
                HcMetric::TotalKw => r.cumulative_total_kw,
            };
            v >= target
        })
        .map(|r| r.labeled_total)
}

fn boundary_fraction(res: &EpisodeResult, spec: &BoundarySpec, plane: &Hyperplane, base_kva: f64) -> f64 {
    let pts: Vec<&LabeledEntry> = res.labeled.entries.iter().take(spec.queries).collect();
    if pts.is_empty() {
        return 0.0;
    }
    let near = pts
        .iter()
        .filter(|e| {
            let x: Vec<f64> = e.features.iter().map(|v| v / base_kva).collect();
            plane.distance(&x) <= spec.delta_pu
        })
        .count();
    near as f64 / pts.len() as f64
}

fn curve(results: &[EpisodeResult]) -> Vec<CurvePoint> {
    let rounds = results.iter().map(|r| r.history.rounds.len()).max().unwrap_or(0);
    (0..rounds)
        .map(|k| {
            let at = |r: &EpisodeResult| r.history.rounds.get(k).or(r.history.rounds.last()).cloned();
            let recs: Vec<_> = results.iter().filter_map(at).collect();
            let comb: Vec<f64> = recs.iter().map(|r| r.cumulative_combined).collect();
            let tot: Vec<f64> = recs.iter().map(|r| r.cumulative_total_kw).collect();
            let (cm, cs) = mean_std(&comb);
            let (tm, ts) = mean_std(&tot);
            let queries = recs.iter().map(|r| r.labeled_total).max().unwrap_or(0);
            CurvePoint {
                round: k,
                queries,
                combined_mean: cm,
                combined_std: cs,
                total_kw_mean: tm,
                total_kw_std: ts,
            }
        })
        .collect()
}

/// Runs every configured strategy and assembles the report.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutput> {
    let cfg = &exp.config;
    let items = exp.items();
    let exhaustive = if cfg.exhaustive {
        Some(label_exhaustive(&exp.oracle()?, &exp.pool)?)
    } else {
        None
    };
    let truth_hc = match &exhaustive {
        Some(ex) => match hosting_capacity(&labeled_entries(&items, &ex.labels)) {
            Ok(hc) => Some(hc),
            Err(Error::NoFeasibleScenario) => return Err(Error::NoFeasibleScenario),
            Err(e) => return Err(e),
        },
        None => None,
    };

    let boundary = match (&cfg.boundary, &exhaustive) {
        (Some(spec), Some(ex)) => {
            let xs: Vec<Vec<f64>> = items
                .iter()
                .map(|i| i.features.iter().map(|v| v / exp.network.base_kva).collect())
                .collect();
            let plane = fit_boundary(&xs, &ex.labels, &spec.svm)?;
            Some((spec, plane))
        }
        _ => None,
    };

    let mut results = Vec::new();
    let mut reports = Vec::new();
    let mut timing = Vec::new();
    for &strategy in &cfg.strategies {
        let runs = run_strategy(exp, &items, strategy, exhaustive.as_ref())?;
        let secs: Vec<f64> = runs.iter().map(|r| r.history.wall_time.as_secs_f64()).collect();
        timing.push(TimingRow {
            strategy: strategy.kind,
            episodes: runs.len(),
            mean_seconds: mean_std(&secs).0,
        });

        let mut summaries = Vec::new();
        for r in &runs {
            let hc = match hosting_capacity(&r.labeled.entries) {
                Ok(hc) => Some(hc),
                Err(Error::NoFeasibleScenario) => None,
                Err(e) => return Err(e),
            };
            summaries.push(EpisodeSummary {
                seed: r.history.seed,
                labels_requested: r.history.labels_requested(),
                hc,
                final_train_accuracy: r.history.rounds.last().and_then(|x| x.train_accuracy),
                boundary_fraction: boundary
                    .as_ref()
                    .map(|(spec, plane)| boundary_fraction(r, spec, plane, exp.network.base_kva)),
                queries_to_max: truth_hc
                    .as_ref()
                    .and_then(|t| queries_to_max(r, cfg.metric, cfg.metric.of(t))),
            });
        }
        if summaries.iter().all(|s| s.hc.is_none()) {
            return Err(Error::NoFeasibleScenario);
        }
        let stats: Vec<[f64; 5]> = summaries.iter().map(|s| HcStats::of(s.hc.as_ref()).fields()).collect();
        let mut mean = [0.0; 5];
        let mut std = [0.0; 5];
        for f in 0..5 {
            let col: Vec<f64> = stats.iter().map(|s| s[f]).collect();
            (mean[f], std[f]) = mean_std(&col);
        }
        let bf: Vec<f64> = summaries.iter().filter_map(|s| s.boundary_fraction).collect();
        let qm: Vec<f64> = summaries.iter().filter_map(|s| s.queries_to_max.map(|q| q as f64)).collect();
        reports.push(StrategyReport {
            strategy,
            hc_mean: HcStats::from_fields(mean),
            hc_std: HcStats::from_fields(std),
            curve: curve(&runs),
            boundary_fraction_mean: (!bf.is_empty()).then(|| mean_std(&bf).0),
            queries_to_max_mean: (qm.len() == summaries.len()).then(|| mean_std(&qm).0),
            episodes: summaries,
        });
        results.push((strategy, runs));
    }

    let first_to_max = reports
        .iter()
        .filter_map(|r| r.queries_to_max_mean.map(|q| (q, r.strategy.kind)))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(_, k)| k);

    let representative = match &truth_hc {
        Some(hc) => Some(match cfg.metric {
            HcMetric::Combined => hc.argmax_combined,
            HcMetric::TotalKw => hc.argmax_total_kw,
        }),
        None => reports
            .first()
            .and_then(|r| r.episodes.first())
            .and_then(|e| e.hc.as_ref())
            .map(|hc| hc.argmax_combined),
    };
    let aggregate_load = match representative {
        Some(id) => {
            let oracle = exp.oracle()?;
            let scenario = exp
                .pool
                .iter()
                .find(|s| s.id == id)
                .ok_or_else(|| Error::InvalidInput(format!("scenario {id} missing from pool")))?;
            Some(AggregateLoad {
                scenario_id: id,
                baseline_kw: oracle.aggregate_load(&Scenario::empty(id))?,
                scenario_kw: oracle.aggregate_load(scenario)?,
            })
        }
        None => None,
    };

    let report = Report {
        n_scenarios: exp.pool.len(),
        eps_bar: cfg.eps_bar,
        query_size: cfg.query_size,
        rounds: cfg.rounds,
        episodes: cfg.episodes,
        seed: cfg.seed,
        metric: cfg.metric,
        exhaustive: exhaustive.as_ref().map(|ex| ExhaustiveSummary {
            eps_bar: cfg.eps_bar,
            n_scenarios: exp.pool.len(),
            feasible_fraction: ex.feasible_fraction(),
            hc: truth_hc.clone(),
            violations: ex.violations.clone(),
        }),
        boundary: boundary.map(|(spec, plane)| BoundaryReport {
            delta_pu: spec.delta_pu,
            queries: spec.queries,
            hyperplane: plane,
        }),
        strategies: reports,
        first_to_max,
        aggregate_load,
    };
    Ok(RunOutput { report, timing, results, exhaustive })
}
