//! Acceptance suite. Each criterion runs in turn and prints one
//! `PASS`/`FAIL` line; the process exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p hostcap --test acceptance`.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};
use std::time::{Duration, Instant};

use hostcap::active::{
    binary_entropy, hosting_capacity, mean_cosine_similarity, run_episode, score_entropy,
    score_info_density, EpisodeConfig, QueryStrategy, StrategyKind,
};
use hostcap::commands::{cmd_eval, cmd_generate, cmd_learn, cmd_report, cmd_solve};
use hostcap::experiment::{
    label_exhaustive, labeled_entries, run_experiment, run_strategy, Experiment, ExperimentConfig, PoolSpec,
};
use hostcap::fixtures::{feeder15, fixtures_dir, three_bus};
use hostcap::grid::{DistFlowSolver, Line, Network, PowerFlowSolution};
use hostcap::learner::{ClassifierParams, Hyper};
use hostcap::oracle::{FeasibilityOracle, OracleConfig, ViolationKind};
use hostcap::profiles::{ProfileLibrary, ProfileSet};
use hostcap::scenario::{DerKind, Location, Scenario, ScenarioMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, check and optional runtime limit.
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fixture(name: &str) -> PathBuf {
    fixtures_dir().join(name)
}

fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(fixture(name)).expect("fixture config loads")
}

fn experiment(config: ExperimentConfig) -> Experiment {
    Experiment::from_config(config).expect("fixture experiment builds")
}

// ---------------------------------------------------------------------------
// 1. DistFlow correctness
// ---------------------------------------------------------------------------

/// Random tree with buses `100, 101, ...` (root first); every line joins a
/// bus to a random earlier one, stored in a random orientation. Returns the
/// network and, per line, the (parent, child) bus positions.
fn random_tree(rng: &mut ChaCha8Rng) -> (Network, Vec<(usize, usize)>) {
    let n = rng.random_range(2..=10);
    let buses: Vec<u32> = (0..n as u32).map(|k| 100 + k).collect();
    let mut lines = Vec::new();
    let mut ends = Vec::new();
    for child in 1..n {
        let parent = rng.random_range(0..child);
        let (from, to) = if rng.random_bool(0.5) {
            (buses[parent], buses[child])
        } else {
            (buses[child], buses[parent])
        };
        lines.push(Line {
            from,
            to,
            r: rng.random_range(0.002..0.03),
            x: rng.random_range(0.002..0.03),
            s_max: 10.0,
        });
        ends.push((parent, child));
    }
    let mut net = Network::new(buses, lines, 1);
    let vm: f64 = rng.random_range(0.98..1.05);
    net.v_root = vm * vm;
    (net, ends)
}

/// Branch-flow residuals computed from scratch, without the solver's
/// topology: power balance at the child, voltage drop, and current
/// definition, per line.
fn residuals(net: &Network, ends: &[(usize, usize)], p: &[f64], q: &[f64], sol: &PowerFlowSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, (line, &(i, j))) in net.lines.iter().zip(ends).enumerate() {
        let (pk, qk, lk) = (sol.flow_p[k], sol.flow_q[k], sol.current_sq[k]);
        let (mut out_p, mut out_q) = (0.0, 0.0);
        for (m, &(parent, _)) in ends.iter().enumerate() {
            if parent == j {
                out_p += sol.flow_p[m];
                out_q += sol.flow_q[m];
            }
        }
        let z2 = line.r * line.r + line.x * line.x;
        let balance_p = p[j] + pk - line.r * lk - out_p;
        let balance_q = q[j] + qk - line.x * lk - out_q;
        let drop = sol.v[j] - (sol.v[i] - 2.0 * (line.r * pk + line.x * qk) + z2 * lk);
        let current = lk * sol.v[i] - (pk * pk + qk * qk);
        for r in [balance_p, balance_q, drop, current] {
            worst = worst.max(r.abs());
        }
    }
    worst
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let (net, ends) = random_tree(&mut rng);
        let n = net.n_buses();
        let p: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { rng.random_range(-0.2..0.1) }).collect();
        let q: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { rng.random_range(-0.1..0.05) }).collect();
        let sol = DistFlowSolver::new(&net).map_err(|e| e.to_string())?.solve(&p, &q).map_err(|e| e.to_string())?;
        ensure(sol.converged, format!("case {case} ({n} buses) did not converge"))?;
        let r = residuals(&net, &ends, &p, &q, &sol);
        ensure(r <= 1e-8, format!("case {case}: residual {r:e}"))?;
        worst = worst.max(r);
    }

    // Two buses: l solves (r^2+x^2) l^2 - (2(r p + x q) + v0) l + (p^2 + q^2) = 0,
    // physical branch is the smaller root.
    let mut analytic_err: f64 = 0.0;
    for _ in 0..20 {
        let (r, x) = (rng.random_range(0.001..0.05), rng.random_range(0.001..0.05));
        let (p, q) = (rng.random_range(-0.5..0.3), rng.random_range(-0.3..0.2));
        let v0: f64 = rng.random_range(0.95..1.1);
        let mut net = Network::new(vec![0, 1], vec![Line { from: 0, to: 1, r, x, s_max: 10.0 }], 1);
        net.v_root = v0;
        let sol = DistFlowSolver::new(&net).unwrap().solve(&[0.0, p], &[0.0, q]).map_err(|e| e.to_string())?;
        let a = r * r + x * x;
        let b = 2.0 * (r * p + x * q) + v0;
        let c = p * p + q * q;
        let l = 2.0 * c / (b + (b * b - 4.0 * a * c).sqrt());
        let big_p = r * l - p;
        let big_q = x * l - q;
        let v1 = v0 - 2.0 * (r * big_p + x * big_q) + a * l;
        for (got, want) in [(sol.current_sq[0], l), (sol.flow_p[0], big_p), (sol.flow_q[0], big_q), (sol.v[1], v1)] {
            analytic_err = analytic_err.max((got - want).abs());
        }
    }
    ensure(analytic_err <= 1e-8, format!("2-bus analytic mismatch {analytic_err:e}"))?;
    Ok(format!("max residual {worst:.1e}, 2-bus analytic error {analytic_err:.1e}"))
}

// ---------------------------------------------------------------------------
// 2. Zero injection
// ---------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let mut nets = vec![("three_bus", three_bus()), ("feeder15", feeder15())];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..10 {
        nets.push((if k == 0 { "random trees" } else { "" }, random_tree(&mut rng).0));
    }
    for (name, net) in &nets {
        let zeros = vec![0.0; net.n_buses()];
        let sol = DistFlowSolver::new(net).unwrap().solve(&zeros, &zeros).map_err(|e| e.to_string())?;
        ensure(sol.converged, format!("{name}: not converged"))?;
        ensure(sol.v.iter().all(|&v| v == net.v_root), format!("{name}: voltage profile not flat"))?;
        ensure(
            sol.flow_p.iter().chain(&sol.flow_q).chain(&sol.current_sq).all(|&f| f == 0.0),
            format!("{name}: nonzero flow"),
        )?;
    }
    Ok(format!("{} fixtures flat and flow-free", nets.len()))
}

// ---------------------------------------------------------------------------
// 3. Sample-average labelling
// ---------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let net = feeder15();
    let steps = net.steps();
    ensure(steps == 144, format!("fixture horizon is {steps}, expected 144"))?;
    let cases: [(&[usize], f64, u8); 6] = [
        (&[10, 100], 0.98, 1),
        (&[10, 100], 1.0, 0),
        (&[5, 60, 120], 0.98, 0),
        (&[5, 60, 120], 0.95, 1),
        (&[], 1.0, 1),
        (&[37], 1.0, 0),
    ];
    for (active, eps, want) in cases {
        let mut shape = vec![0.0; steps];
        for &t in active {
            shape[t] = -1.0;
        }
        let lib = ProfileLibrary::new(
            ProfileSet::new(DerKind::Ev, vec![shape]).unwrap(),
            ProfileSet::constant(DerKind::Pv, steps, 0.0),
        )
        .unwrap();
        let scenario = Scenario {
            id: 0,
            locations: vec![Location {
                bus: 8,
                kind: DerKind::Ev,
                units: 0,
                capacity_kw: 40.0,
                profile_type: 0,
                power_factor: 1.0,
            }],
            meta: ScenarioMeta::default(),
        };
        let oracle = FeasibilityOracle::new(&net, &lib, OracleConfig::default().with_eps_bar(eps)).unwrap();
        let v = oracle.evaluate(&scenario).map_err(|e| e.to_string())?;
        let failed: Vec<usize> = (0..steps).filter(|&t| !v.per_step[t]).collect();
        ensure(failed == active, format!("failing steps {failed:?}, constructed {active:?}"))?;
        let passes = steps - active.len();
        ensure(v.pass_fraction == passes as f64 / steps as f64, "pass fraction")?;
        ensure(v.label == want, format!("{passes}/{steps} at eps {eps}: label {} (want {want})", v.label))?;
    }
    Ok("142/144 feasible at 0.98 and infeasible at 1; 141/144 infeasible at 0.98".into())
}

// ---------------------------------------------------------------------------
// 4. Threshold monotonicity
// ---------------------------------------------------------------------------

fn coordination_experiment(n_ev_types: usize) -> Experiment {
    let mut cfg = load_config("feeder15_coordination.json");
    if let PoolSpec::Sweep(s) = &mut cfg.pool {
        s.config.ev.as_mut().expect("EV sweep").n_ev_types = n_ev_types;
    }
    experiment(cfg)
}

fn criterion_4() -> Outcome {
    let exp = coordination_experiment(1);
    let ex = label_exhaustive(&exp.oracle().unwrap(), &exp.pool).map_err(|e| e.to_string())?;
    let items = exp.items();
    let mut hcs = Vec::new();
    for eps in [1.0, 0.98, 0.95] {
        let hc = hosting_capacity(&labeled_entries(&items, &ex.relabel(eps))).map_err(|e| e.to_string())?;
        hcs.push((hc.max_ev_count, hc.max_combined));
    }
    for w in hcs.windows(2) {
        ensure(w[0].0 <= w[1].0 && w[0].1 <= w[1].1, format!("not monotone: {hcs:?}"))?;
    }
    Ok(format!(
        "max EV count {} <= {} <= {} (eps 1, 0.98, 0.95)",
        hcs[0].0, hcs[1].0, hcs[2].0
    ))
}

// ---------------------------------------------------------------------------
// 5. Query-strategy formulas
// ---------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let h = binary_entropy(0.5);
    ensure((h - std::f64::consts::LN_2).abs() <= 1e-12, format!("H(0.5) = {h}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut theta = ClassifierParams::zeros(3, 4);
    let flat: Vec<f64> = (0..theta.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
    theta.set_flat(&flat);
    let pool: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let xs: Vec<&[f64]> = pool.iter().map(|x| x.as_slice()).collect();
    let ent = score_entropy(&theta, &xs).unwrap();
    ensure(score_info_density(&theta, &xs, 0.0).unwrap() == ent, "beta = 0 differs from entropy")?;

    let three = [[1.0, 0.0, 2.0], [0.5, 1.5, -0.5], [2.0, 1.0, 1.0]];
    let xs: Vec<&[f64]> = three.iter().map(|x| x.as_slice()).collect();
    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let ent = score_entropy(&theta, &xs).unwrap();
    let id = score_info_density(&theta, &xs, 1.0).unwrap();
    let dens = mean_cosine_similarity(&xs);
    let mut err: f64 = 0.0;
    for i in 0..3 {
        let brute = (0..3).map(|j| cos(xs[i], xs[j])).sum::<f64>() / 3.0;
        err = err.max((dens[i] - brute).abs());
        err = err.max((id[i] - ent[i] * brute.max(0.0)).abs());
    }
    ensure(err <= 1e-12, format!("3-point density mismatch {err:e}"))?;
    Ok(format!("H(0.5) = ln 2, beta 0 == entropy, 3-point brute force error {err:.1e}"))
}

// ---------------------------------------------------------------------------
// 6. Gradient check
// ---------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let dim = rng.random_range(1..=4);
        let hidden = rng.random_range(1..=8);
        let mut theta = ClassifierParams::zeros(dim, hidden);
        theta.hyper = Hyper { hidden, l2: rng.random_range(0.0..1e-2), ..Hyper::default() };
        let flat: Vec<f64> = (0..theta.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        theta.set_flat(&flat);
        let n = rng.random_range(1..=16);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
        let (_, grad) = theta.loss_and_grad(&xs, &ys);
        let h = 1e-6;
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for k in 0..flat.len() {
            let mut probe = theta.clone();
            let mut f = flat.clone();
            f[k] += h;
            probe.set_flat(&f);
            let up = probe.loss_and_grad(&xs, &ys).0;
            f[k] -= 2.0 * h;
            probe.set_flat(&f);
            let down = probe.loss_and_grad(&xs, &ys).0;
            let numeric = (up - down) / (2.0 * h);
            diff2 += (numeric - grad[k]).powi(2);
            norm2 += numeric.abs().max(grad[k].abs()).powi(2);
        }
        let rel = diff2.sqrt() / norm2.sqrt().max(1e-12);
        ensure(rel <= 1e-5, format!("draw {draw}: relative gradient error {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("worst relative error over 100 draws {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 7. Boundary concentration on the 3-bus fixture
// ---------------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let exp = experiment(load_config("three_bus_experiment.json"));
    ensure(exp.pool.len() == 2000, "pool size")?;
    let out = run_experiment(&exp).map_err(|e| e.to_string())?;
    let frac = |kind: StrategyKind| {
        out.report
            .strategies
            .iter()
            .find(|s| s.strategy.kind == kind)
            .and_then(|s| s.boundary_fraction_mean)
            .expect("boundary fraction reported")
    };
    let (u, e, d) = (
        frac(StrategyKind::Uniform),
        frac(StrategyKind::Entropy),
        frac(StrategyKind::InfoDensity),
    );
    ensure(e > u && d > u, format!("uniform {u:.3}, entropy {e:.3}, info density {d:.3}"))?;
    Ok(format!("near-boundary fraction: uniform {u:.3} < entropy {e:.3}, info density {d:.3}"))
}

// ---------------------------------------------------------------------------
// 8. Coordination trend
// ---------------------------------------------------------------------------

fn criterion_8() -> Outcome {
    let mut counts = Vec::new();
    for types in [1, 5, 20] {
        let exp = coordination_experiment(types);
        let ex = label_exhaustive(&exp.oracle().unwrap(), &exp.pool).map_err(|e| e.to_string())?;
        let hc = hosting_capacity(&labeled_entries(&exp.items(), &ex.labels)).map_err(|e| e.to_string())?;
        counts.push(hc.max_ev_count);
    }
    ensure(counts.windows(2).all(|w| w[0] <= w[1]), format!("EV capacity {counts:?} decreases"))?;
    Ok(format!("max EV count {} / {} / {} for 1 / 5 / 20 EV types", counts[0], counts[1], counts[2]))
}

// ---------------------------------------------------------------------------
// 9. Cluster effect
// ---------------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let mut rows = Vec::new();
    for name in ["feeder15_cluster_a.json", "feeder15_cluster_b.json"] {
        let exp = experiment(load_config(name));
        let ex = label_exhaustive(&exp.oracle().unwrap(), &exp.pool).map_err(|e| e.to_string())?;
        let hc = hosting_capacity(&labeled_entries(&exp.items(), &ex.labels)).map_err(|e| e.to_string())?;
        rows.push((hc.max_combined, ex.violations.dominant_voltage_kind()));
    }
    let (a, b) = (&rows[0], &rows[1]);
    ensure(a.0 != b.0, format!("clusters share HC {}", a.0))?;
    ensure(
        a.1 == Some(ViolationKind::Undervoltage) && b.1 == Some(ViolationKind::Overvoltage),
        format!("dominant kinds {:?} / {:?}", a.1, b.1),
    )?;
    Ok(format!("cluster A: HC {} (undervoltage), cluster B: HC {} (overvoltage)", a.0, b.0))
}

// ---------------------------------------------------------------------------
// 10. Budget accounting
// ---------------------------------------------------------------------------

fn check_budget(exp: &Experiment, query_size: usize, rounds: usize) -> Result<(usize, usize), String> {
    let items = exp.items();
    let oracle = exp.oracle().unwrap();
    let calls: Vec<AtomicU32> = (0..items.len()).map(|_| AtomicU32::new(0)).collect();
    let cfg = EpisodeConfig {
        strategy: QueryStrategy::new(StrategyKind::Uniform),
        budget: hostcap::active::Budget::new(query_size, rounds),
        hyper: Hyper::default(),
        seed: exp.config.seed,
    };
    let res = run_episode(
        &items,
        |k| {
            calls[k].fetch_add(1, Ordering::Relaxed);
            Ok(oracle.evaluate(&exp.pool[k])?.label)
        },
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let expected = (query_size * rounds).min(items.len());
    let requested = res.history.labels_requested();
    let ids: HashSet<u64> = res.labeled.entries.iter().map(|e| e.scenario_id).collect();
    let oracle_calls: u32 = calls.iter().map(|c| c.load(Ordering::Relaxed)).sum();
    ensure(requested == expected, format!("requested {requested}, expected {expected}"))?;
    ensure(res.labeled.len() == expected && ids.len() == expected, "duplicate labeled scenario")?;
    ensure(oracle_calls as usize == expected, format!("{oracle_calls} oracle calls"))?;
    ensure(calls.iter().all(|c| c.load(Ordering::Relaxed) <= 1), "scenario labelled twice")?;
    Ok((requested, items.len()))
}

fn criterion_10() -> Outcome {
    let big = experiment(load_config("feeder15_experiment.json"));
    let (req_big, pool_big) = check_budget(&big, 32, 256)?;
    let small = experiment(load_config("three_bus_experiment.json"));
    let (req_small, pool_small) = check_budget(&small, 32, 256)?;
    Ok(format!(
        "B=32, K=256: {req_big} labels from a pool of {pool_big}, {req_small} from a pool of {pool_small}; none repeated"
    ))
}

// ---------------------------------------------------------------------------
// 11. Determinism
// ---------------------------------------------------------------------------

fn run_commands(dir: &Path) {
    let fx = fixtures_dir();
    cmd_solve(&fx.join("feeder15.json"), &fx.join("feeder15_injections.csv"), &dir.join("solution.csv")).unwrap();
    cmd_generate(&fx.join("feeder15_pool.json"), &fx.join("feeder15.json"), None, Some(3), &dir.join("pool.jsonl"))
        .unwrap();
    let coord = experiment(load_config("feeder15_coordination.json"));
    cmd_eval(&coord, &dir.join("eval")).unwrap();
    cmd_learn(&coord, None, &dir.join("learn")).unwrap();
    let mut cfg = load_config("three_bus_experiment.json");
    cfg.episodes = 2;
    cmd_report(&experiment(cfg), &dir.join("report")).unwrap();
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(&path, out);
        } else {
            out.push(path);
        }
    }
}

fn criterion_11() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_commands(a.path());
    run_commands(b.path());
    let mut files = Vec::new();
    collect_files(a.path(), &mut files);
    files.sort();
    let mut compared = 0;
    for fa in &files {
        if fa.file_name().is_some_and(|n| n == "timing.csv") {
            continue;
        }
        let rel = fa.strip_prefix(a.path()).unwrap();
        let fb = b.path().join(rel);
        let (ba, bb) = (std::fs::read(fa).unwrap(), std::fs::read(&fb).map_err(|e| format!("{}: {e}", rel.display()))?);
        ensure(ba == bb, format!("{} differs between runs", rel.display()))?;
        compared += 1;
    }
    ensure(compared >= 10, format!("only {compared} files produced"))?;
    Ok(format!("{compared} output files byte-identical across two runs (timing.csv excluded)"))
}

// ---------------------------------------------------------------------------
// 12. Exhaustive vs full-budget active learning
// ---------------------------------------------------------------------------

fn criterion_12() -> Outcome {
    let mut cfg = load_config("feeder15_coordination.json");
    cfg.query_size = 32;
    cfg.hyper.epochs = 50;
    cfg.strategies = vec![
        QueryStrategy::new(StrategyKind::Uniform),
        QueryStrategy::new(StrategyKind::Entropy),
        QueryStrategy::info_density(1.0),
    ];
    let mut exp = experiment(cfg);
    exp.config.rounds = exp.pool.len().div_ceil(exp.config.query_size);
    let dir = tempfile::tempdir().unwrap();
    let truth = cmd_eval(&exp, dir.path()).map_err(|e| e.to_string())?.hc.ok_or("nothing feasible")?;
    let items = exp.items();
    for &strategy in &exp.config.strategies {
        let res = run_strategy(&exp, &items, strategy, None).map_err(|e| e.to_string())?.remove(0);
        ensure(res.labeled.len() == exp.pool.len(), "budget did not cover the pool")?;
        let hc = hosting_capacity(&res.labeled.entries).map_err(|e| e.to_string())?;
        ensure(hc == truth, format!("{}: episode HC {} vs exhaustive {}", strategy.kind.as_str(), hc.max_combined, truth.max_combined))?;
    }
    Ok(format!(
        "pool of {}: all strategies reach exhaustive HC (EV count {}, combined {})",
        exp.pool.len(),
        truth.max_ev_count,
        truth.max_combined
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 12] = [
        ("DistFlow residuals and 2-bus analytic solution", criterion_1, Some(Duration::from_secs(5))),
        ("zero-injection identity", criterion_2, None),
        ("sample-average labelling", criterion_3, None),
        ("threshold monotonicity", criterion_4, Some(Duration::from_secs(120))),
        ("query-strategy formulas", criterion_5, None),
        ("classifier gradient check", criterion_6, Some(Duration::from_secs(30))),
        ("3-bus boundary concentration", criterion_7, Some(Duration::from_secs(300))),
        ("coordination trend", criterion_8, Some(Duration::from_secs(600))),
        ("cluster effect", criterion_9, None),
        ("budget accounting", criterion_10, None),
        ("determinism", criterion_11, None),
        ("exhaustive vs full-budget agreement", criterion_12, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(limit)) if elapsed > *limit => Err(format!("took {elapsed:.1?}, limit {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{elapsed:.1?}]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail} [{elapsed:.1?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
