//! Time-series feasibility labelling of DER scenarios.
//!
//! A scenario passes step `t` when the exact DistFlow solve converges, every
//! squared bus voltage lies in `[v_min, v_max]`, and every line satisfies
//! `P^2 + Q^2 <= s_max^2`. It is labelled feasible when the fraction of
//! passing steps is at least `eps_bar`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BaselineProfiles, DistFlowSolver, Network, SolverOptions};
use crate::profiles::ProfileLibrary;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Undervoltage,
    Overvoltage,
    LineThermal,
    Nonconvergence,
}

impl ViolationKind {
    pub const ALL: [ViolationKind; 4] = [
        ViolationKind::Undervoltage,
        ViolationKind::Overvoltage,
        ViolationKind::LineThermal,
        ViolationKind::Nonconvergence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Undervoltage => "undervoltage",
            ViolationKind::Overvoltage => "overvoltage",
            ViolationKind::LineThermal => "line_thermal",
            ViolationKind::Nonconvergence => "nonconvergence",
        }
    }
}

/// Worst violation of one kind at one step. `element` is a bus id for
/// voltage violations and a line index otherwise. Voltage magnitudes are in
/// p.u. of voltage magnitude, thermal magnitudes in p.u. of apparent power
/// above rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepViolation {
    pub t: usize,
    pub kind: ViolationKind,
    pub element: u32,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub pass: bool,
    pub violations: Vec<StepViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub label: u8,
    pub pass_fraction: f64,
    pub per_step: Vec<bool>,
    pub worst_violations: Vec<StepViolation>,
    /// Steps actually simulated; less than `per_step.len()` only after an
    /// early exit, in which case unsimulated steps are marked failed.
    pub steps_evaluated: usize,
}

impl FeasibilityVerdict {
    pub fn is_feasible(&self) -> bool {
        self.label == 1
    }

    /// Feasible but failing at least one step.
    pub fn is_concerning(&self) -> bool {
        self.label == 1 && self.pass_fraction < 1.0
    }

    /// Builds a verdict from a per-step pass pattern.
    pub fn from_steps(per_step: Vec<bool>, eps_bar: f64, worst_violations: Vec<StepViolation>) -> Self {
        let passed = per_step.iter().filter(|p| **p).count();
        let steps = per_step.len();
        let pass_fraction = if steps == 0 { 1.0 } else { passed as f64 / steps as f64 };
        FeasibilityVerdict {
            label: label_for(pass_fraction, eps_bar),
            pass_fraction,
            steps_evaluated: steps,
            per_step,
            worst_violations,
        }
    }
}

/// Sample-average rule: 1 iff `pass_fraction >= eps_bar`.
pub fn label_for(pass_fraction: f64, eps_bar: f64) -> u8 {
    u8::from(pass_fraction >= eps_bar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub eps_bar: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Stop once enough steps failed that the label is settled.
    pub early_exit: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        OracleConfig {
            eps_bar: 1.0,
            tol: s.tol,
            max_iter: s.max_iter,
            early_exit: false,
        }
    }
}

impl OracleConfig {
    pub fn with_eps_bar(mut self, eps_bar: f64) -> Self {
        self.eps_bar = eps_bar;
        self
    }
}

/// Net per-bus injections (kW, kvar; generation positive) at step `t`:
/// DER contributions `alpha[t] * psi` (reactive part scaled by the fixed
/// power factor) minus baseline demand.
pub fn apply_scenario(
    scenario: &Scenario,
    profiles: &ProfileLibrary,
    baseline: &BaselineProfiles,
    index: &HashMap<u32, usize>,
    t: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if t >= baseline.steps || t >= profiles.steps() {
        return Err(Error::DimensionMismatch(format!(
            "step {t} outside baseline ({}) / profile ({}) horizon",
            baseline.steps,
            profiles.steps()
        )));
    }
    let n = baseline.d_kw.len();
    if index.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} buses indexed, baseline has {n} rows",
            index.len()
        )));
    }
    let mut p: Vec<f64> = baseline.d_kw.iter().map(|row| -row[t]).collect();
    let mut q: Vec<f64> = baseline.e_kvar.iter().map(|row| -row[t]).collect();
    for loc in &scenario.locations {
        let &i = index.get(&loc.bus).ok_or_else(|| {
            Error::DimensionMismatch(format!("scenario bus {} not in network", loc.bus))
        })?;
        let shape = profiles.get(loc.kind).shapes.get(loc.profile_type).ok_or_else(|| {
            Error::DimensionMismatch(format!("no {:?} profile type {}", loc.kind, loc.profile_type))
        })?;
        let real = shape[t] * loc.capacity_kw;
        p[i] += real;
        q[i] += real * loc.reactive_ratio();
    }
    Ok((p, q))
}

/// Scenario evaluator bound to one network and profile library.
#[derive(Debug, Clone)]
pub struct FeasibilityOracle<'a> {
    solver: DistFlowSolver<'a>,
    profiles: &'a ProfileLibrary,
    index: HashMap<u32, usize>,
    config: OracleConfig,
}

impl<'a> FeasibilityOracle<'a> {
    pub fn new(net: &'a Network, profiles: &'a ProfileLibrary, config: OracleConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.eps_bar) {
            return Err(Error::ConfigInvalid(format!(
                "eps_bar {} outside [0, 1]",
                config.eps_bar
            )));
        }
        if profiles.steps() != net.steps() {
            return Err(Error::DimensionMismatch(format!(
                "profiles have {} steps, network baseline {}",
                profiles.steps(),
                net.steps()
            )));
        }
        let solver = DistFlowSolver::new(net)?.with_options(SolverOptions {
            tol: config.tol,
            max_iter: config.max_iter,
        });
        Ok(FeasibilityOracle {
            solver,
            profiles,
            index: net.bus_index_map(),
            config,
        })
    }

    pub fn network(&self) -> &Network {
        self.solver.network()
    }

    pub fn profiles(&self) -> &ProfileLibrary {
        self.profiles
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn bus_index(&self) -> &HashMap<u32, usize> {
        &self.index
    }

    pub fn injections(&self, scenario: &Scenario, t: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        apply_scenario(scenario, self.profiles, &self.network().baseline, &self.index, t)
    }

    /// Aggregate system consumption (kW, positive = load) per step.
    pub fn aggregate_load(&self, scenario: &Scenario) -> Result<Vec<f64>> {
        (0..self.network().steps())
            .map(|t| Ok(-self.injections(scenario, t)?.0.iter().sum::<f64>()))
            .collect()
    }

    /// Simulates one step and checks voltage and thermal limits.
    pub fn evaluate_timestep(&self, scenario: &Scenario, t: usize) -> Result<StepOutcome> {
        let net = self.network();
        let (p_kw, q_kvar) = self.injections(scenario, t)?;
        let p: Vec<f64> = p_kw.iter().map(|&x| net.to_pu(x)).collect();
        let q: Vec<f64> = q_kvar.iter().map(|&x| net.to_pu(x)).collect();
        let sol = match self.solver.solve(&p, &q) {
            Ok(sol) if sol.converged => sol,
            Ok(sol) => {
                return Ok(nonconverged(t, sol.residual));
            }
            Err(Error::Diverged(_)) => return Ok(nonconverged(t, f64::INFINITY)),
            Err(e) => return Err(e),
        };

        let v_lo = net.v_min.sqrt();
        let v_hi = net.v_max.sqrt();
        let mut under: Option<StepViolation> = None;
        let mut over: Option<StepViolation> = None;
        let mut thermal: Option<StepViolation> = None;
        fn keep_worst(slot: &mut Option<StepViolation>, cand: StepViolation) {
            if slot.as_ref().is_none_or(|s| cand.magnitude > s.magnitude) {
                *slot = Some(cand);
            }
        }
        for (i, &v) in sol.v.iter().enumerate() {
            if v < net.v_min {
                keep_worst(
                    &mut under,
                    StepViolation {
                        t,
                        kind: ViolationKind::Undervoltage,
                        element: net.buses[i],
                        magnitude: v_lo - v.sqrt(),
                    },
                );
            } else if v > net.v_max {
                keep_worst(
                    &mut over,
                    StepViolation {
                        t,
                        kind: ViolationKind::Overvoltage,
                        element: net.buses[i],
                        magnitude: v.sqrt() - v_hi,
                    },
                );
            }
        }
        for (k, line) in net.lines.iter().enumerate() {
            let s2 = sol.flow_p[k].powi(2) + sol.flow_q[k].powi(2);
            if s2 > line.s_max * line.s_max {
                keep_worst(
                    &mut thermal,
                    StepViolation {
                        t,
                        kind: ViolationKind::LineThermal,
                        element: k as u32,
                        magnitude: s2.sqrt() - line.s_max,
                    },
                );
            }
        }
        let violations: Vec<StepViolation> = [under, over, thermal].into_iter().flatten().collect();
        Ok(StepOutcome {
            pass: violations.is_empty(),
            violations,
        })
    }

    /// Evaluates all steps in order and applies the sample-average rule.
    pub fn evaluate(&self, scenario: &Scenario) -> Result<FeasibilityVerdict> {
        let steps = self.network().steps();
        let eps_bar = self.config.eps_bar;
        // largest number of failures that still allows a feasible label
        let fail_budget = (0..=steps)
            .rev()
            .find(|&f| label_for((steps - f) as f64 / steps as f64, eps_bar) == 1);
        let mut per_step = vec![false; steps];
        let mut worst = Vec::new();
        let mut failures = 0usize;
        let mut evaluated = 0usize;
        for (t, passed) in per_step.iter_mut().enumerate() {
            let out = self.evaluate_timestep(scenario, t)?;
            *passed = out.pass;
            evaluated += 1;
            if !out.pass {
                failures += 1;
            }
            worst.extend(out.violations);
            if self.config.early_exit && fail_budget.is_none_or(|b| failures > b) {
                break;
            }
        }
        let mut verdict = FeasibilityVerdict::from_steps(per_step, eps_bar, worst);
        verdict.steps_evaluated = evaluated;
        Ok(verdict)
    }

    /// Verdicts for a batch, evaluated in parallel. Output order matches input.
    pub fn evaluate_batch(&self, scenarios: &[&Scenario]) -> Result<Vec<FeasibilityVerdict>> {
        use rayon::prelude::*;
        scenarios.par_iter().map(|s| self.evaluate(s)).collect()
    }
}

fn nonconverged(t: usize, residual: f64) -> StepOutcome {
    StepOutcome {
        pass: false,
        violations: vec![StepViolation {
            t,
            kind: ViolationKind::Nonconvergence,
            element: 0,
            magnitude: residual,
        }],
    }
}

/// Single-step check, free-function form.
pub fn evaluate_timestep(
    net: &Network,
    scenario: &Scenario,
    profiles: &ProfileLibrary,
    t: usize,
) -> Result<StepOutcome> {
    FeasibilityOracle::new(net, profiles, OracleConfig::default())?.evaluate_timestep(scenario, t)
}

/// Full-horizon verdict, free-function form.
pub fn evaluate_scenario(
    net: &Network,
    scenario: &Scenario,
    profiles: &ProfileLibrary,
    eps_bar: f64,
) -> Result<FeasibilityVerdict> {
    FeasibilityOracle::new(net, profiles, OracleConfig::default().with_eps_bar(eps_bar))?
        .evaluate(scenario)
}

/// Counts of recorded violations per kind.
pub fn violation_counts<'a>(
    violations: impl IntoIterator<Item = &'a StepViolation>,
) -> std::collections::BTreeMap<ViolationKind, usize> {
    let mut out: std::collections::BTreeMap<ViolationKind, usize> =
        ViolationKind::ALL.iter().map(|k| (*k, 0)).collect();
    for v in violations {
        *out.entry(v.kind).or_default() += 1;
    }
    out
}
