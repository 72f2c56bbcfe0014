//! File-in, file-out operations behind the command-line subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::active::{hosting_capacity, write_frontier_csv, EpisodeHistory, HostingCapacity, QueryStrategy};
use crate::error::{Error, Result};
use crate::experiment::{
    label_exhaustive, labeled_entries, run_experiment, run_strategy, Experiment, ExhaustiveSummary, Report,
    RunOutput, ViolationHistogram,
};
use crate::generate::{generate_pool, load_clusters, PoolConfig};
use crate::grid::{DistFlowSolver, Network, PowerFlowSolution, SolverOptions};
use crate::learner::ClassifierParams;
use crate::scenario::{write_jsonl, ScenarioPool};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads per-bus injections from CSV `bus,p_kw,q_kvar` (generation
/// positive). Buses not listed inject nothing. Returns kW/kvar vectors in
/// network bus order.
pub fn read_injections(net: &Network, path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>)> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        bus: u32,
        p_kw: f64,
        q_kvar: f64,
    }
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["bus", "p_kw", "q_kvar"] {
        return Err(Error::InvalidInput(format!(
            "{}: header must be `bus,p_kw,q_kvar`, found `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let n = net.n_buses();
    let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
    for row in reader.deserialize::<Row>() {
        let row = row?;
        let i = net
            .bus_index(row.bus)
            .ok_or_else(|| Error::InvalidInput(format!("{}: unknown bus {}", path.display(), row.bus)))?;
        if !row.p_kw.is_finite() || !row.q_kvar.is_finite() {
            return Err(Error::InvalidInput(format!("{}: non-finite injection at bus {}", path.display(), row.bus)));
        }
        p[i] += row.p_kw;
        q[i] += row.q_kvar;
    }
    Ok((p, q))
}

/// Solves one snapshot with kW/kvar injections. A sweep that does not meet
/// the tolerance is reported as divergence.
pub fn solve_kw(net: &Network, p_kw: &[f64], q_kvar: &[f64], options: SolverOptions) -> Result<PowerFlowSolution> {
    let p: Vec<f64> = p_kw.iter().map(|&x| net.to_pu(x)).collect();
    let q: Vec<f64> = q_kvar.iter().map(|&x| net.to_pu(x)).collect();
    let sol = DistFlowSolver::new(net)?.with_options(options).solve(&p, &q)?;
    if !sol.converged {
        return Err(Error::Diverged(format!(
            "residual {:.3e} after {} iterations",
            sol.residual, sol.iterations
        )));
    }
    Ok(sol)
}

/// Solution table: one row per bus then one per line, columns
/// `element,id,from,to,v_pu,p_pu,q_pu,l_pu,loading_pct`.
pub fn write_solution_csv<W: Write>(w: W, net: &Network, sol: &PowerFlowSolution) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["element", "id", "from", "to", "v_pu", "p_pu", "q_pu", "l_pu", "loading_pct"])?;
    for (i, &bus) in net.buses.iter().enumerate() {
        out.write_record([
            "bus".to_string(),
            bus.to_string(),
            String::new(),
            String::new(),
            format!("{:.12}", sol.v[i].sqrt()),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    for (k, line) in net.lines.iter().enumerate() {
        let s = (sol.flow_p[k].powi(2) + sol.flow_q[k].powi(2)).sqrt();
        out.write_record([
            "line".to_string(),
            k.to_string(),
            line.from.to_string(),
            line.to.to_string(),
            String::new(),
            format!("{:.12}", sol.flow_p[k]),
            format!("{:.12}", sol.flow_q[k]),
            format!("{:.12}", sol.current_sq[k]),
            format!("{:.9}", 100.0 * s / line.s_max),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `solve`: network file + injections CSV -> solution CSV.
pub fn cmd_solve(network: &Path, injections: &Path, out: &Path) -> Result<PowerFlowSolution> {
    let net = Network::load(network)?;
    let (p, q) = read_injections(&net, injections)?;
    let sol = solve_kw(&net, &p, &q, SolverOptions::default())?;
    let mut w = create(out)?;
    write_solution_csv(&mut w, &net, &sol)?;
    w.flush()?;
    Ok(sol)
}

/// `generate`: pool config + network (+ clusters) -> JSON Lines pool.
pub fn cmd_generate(
    config: &Path,
    network: &Path,
    clusters: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<ScenarioPool> {
    let mut cfg = PoolConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let net = Network::load(network)?;
    let clusters = match clusters {
        Some(p) => load_clusters(p)?,
        None => Vec::new(),
    };
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let pool = generate_pool(&cfg, &net, &clusters, &mut rng)?;
    let mut w = create(out)?;
    write_jsonl(&mut w, &pool)?;
    w.flush()?;
    Ok(pool)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub scenario_id: u64,
    pub label: u8,
    pub pass_fraction: f64,
}

fn write_violations_csv(path: &Path, hist: &ViolationHistogram) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(["kind", "element", "count"])?;
    for row in &hist.by_element {
        out.write_record([row.kind.as_str().to_string(), row.element.to_string(), row.count.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `eval`: labels every scenario. Writes `labels.jsonl`, `eval.json`,
/// `violations.csv` and (when anything is feasible) `frontier.csv` into
/// `out_dir`. Fails with `NoFeasibleScenario` after writing the labels if
/// nothing is feasible.
pub fn cmd_eval(exp: &Experiment, out_dir: &Path) -> Result<ExhaustiveSummary> {
    let ex = label_exhaustive(&exp.oracle()?, &exp.pool)?;
    fs::create_dir_all(out_dir)?;
    let mut w = create(&out_dir.join("labels.jsonl"))?;
    for (s, (&label, &pf)) in exp.pool.iter().zip(ex.labels.iter().zip(&ex.pass_fractions)) {
        serde_json::to_writer(&mut w, &LabelRecord { scenario_id: s.id, label, pass_fraction: pf })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    write_violations_csv(&out_dir.join("violations.csv"), &ex.violations)?;
    let hc = match hosting_capacity(&labeled_entries(&exp.items(), &ex.labels)) {
        Ok(hc) => Some(hc),
        Err(Error::NoFeasibleScenario) => None,
        Err(e) => return Err(e),
    };
    let summary = ExhaustiveSummary {
        eps_bar: exp.config.eps_bar,
        n_scenarios: exp.pool.len(),
        feasible_fraction: ex.feasible_fraction(),
        hc,
        violations: ex.violations,
    };
    write_json(&out_dir.join("eval.json"), &summary)?;
    match &summary.hc {
        Some(hc) => write_frontier_csv(create(&out_dir.join("frontier.csv"))?, &hc.frontier)?,
        None => return Err(Error::NoFeasibleScenario),
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFile {
    pub history: EpisodeHistory,
    pub theta: ClassifierParams,
    pub hc: HostingCapacity,
}

/// `learn`: one episode of `strategy` (default: first configured). Writes
/// `episode.json`, `theta.json` and `frontier.csv` into `out_dir`.
pub fn cmd_learn(exp: &Experiment, strategy: Option<QueryStrategy>, out_dir: &Path) -> Result<EpisodeFile> {
    let strategy = strategy.unwrap_or(exp.config.strategies[0]);
    let single = Experiment {
        config: crate::experiment::ExperimentConfig { episodes: 1, ..exp.config.clone() },
        ..exp.clone()
    };
    let items = single.items();
    let res = run_strategy(&single, &items, strategy, None)?
        .pop()
        .expect("one episode");
    let hc = hosting_capacity(&res.labeled.entries)?;
    fs::create_dir_all(out_dir)?;
    let file = EpisodeFile { history: res.history, theta: res.theta, hc };
    write_json(&out_dir.join("episode.json"), &file)?;
    write_json(&out_dir.join("theta.json"), &file.theta)?;
    write_frontier_csv(create(&out_dir.join("frontier.csv"))?, &file.hc.frontier)?;
    Ok(file)
}

/// Writes a run's files: `report.json`, `curves.csv`, `violations.csv`,
/// `aggregate_load.csv`, `frontier.csv` and `timing.csv`. Only
/// `timing.csv` depends on the machine.
pub fn write_run(out: &RunOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let report: &Report = &out.report;
    let mut written = Vec::new();

    let path = out_dir.join("report.json");
    write_json(&path, report)?;
    written.push(path);

    let path = out_dir.join("curves.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["strategy", "round", "queries", "combined_mean", "combined_std", "total_kw_mean", "total_kw_std"])?;
    for s in &report.strategies {
        for c in &s.curve {
            w.write_record([
                s.strategy.kind.as_str().to_string(),
                c.round.to_string(),
                c.queries.to_string(),
                c.combined_mean.to_string(),
                c.combined_std.to_string(),
                c.total_kw_mean.to_string(),
                c.total_kw_std.to_string(),
            ])?;
        }
    }
    w.flush()?;
    written.push(path);

    if let Some(ex) = &report.exhaustive {
        let path = out_dir.join("violations.csv");
        write_violations_csv(&path, &ex.violations)?;
        written.push(path);
    }

    if let Some(agg) = &report.aggregate_load {
        let path = out_dir.join("aggregate_load.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["t", "baseline_kw", "scenario_kw"])?;
        for (t, (b, s)) in agg.baseline_kw.iter().zip(&agg.scenario_kw).enumerate() {
            w.write_record([t.to_string(), b.to_string(), s.to_string()])?;
        }
        w.flush()?;
        written.push(path);
    }

    let frontier = report
        .exhaustive
        .as_ref()
        .and_then(|e| e.hc.as_ref())
        .or_else(|| report.strategies.first().and_then(|s| s.episodes.first()).and_then(|e| e.hc.as_ref()));
    if let Some(hc) = frontier {
        let path = out_dir.join("frontier.csv");
        write_frontier_csv(create(&path)?, &hc.frontier)?;
        written.push(path);
    }

    let path = out_dir.join("timing.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["strategy", "episodes", "mean_seconds"])?;
    for t in &out.timing {
        w.write_record([t.strategy.as_str().to_string(), t.episodes.to_string(), format!("{:.6}", t.mean_seconds)])?;
    }
    w.flush()?;
    written.push(path);
    Ok(written)
}

/// `report`: runs every configured strategy and writes the report files.
pub fn cmd_report(exp: &Experiment, out_dir: &Path) -> Result<RunOutput> {
    let out = run_experiment(exp)?;
    write_run(&out, out_dir)?;
    Ok(out)
}

/// `compare`: like [`cmd_report`] but requires at least two strategies.
pub fn cmd_compare(exp: &Experiment, out_dir: &Path) -> Result<RunOutput> {
    if exp.config.strategies.len() < 2 {
        return Err(Error::ConfigInvalid("compare needs at least two strategies".into()));
    }
    cmd_report(exp, out_dir)
}
