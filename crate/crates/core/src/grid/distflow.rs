//! Branch-flow (DistFlow) power flow on radial networks.
//!
//! Per line `(i, j)` with child `j`:
//!
//! ```text
//! p_j + P_ij = r l_ij + sum_k P_jk
//! q_j + Q_ij = x l_ij + sum_k Q_jk
//! v_j        = v_i - 2 (r P_ij + x Q_ij) + (r^2 + x^2) l_ij
//! l_ij       = (P_ij^2 + Q_ij^2) / v_i
//! ```
//!
//! Injections are per-unit on the network base, positive for generation.
//! The exact solver is a backward-forward sweep: for fixed `l` the first
//! three families are solved exactly, then `l` is refreshed from the fourth.

use serde::Serialize;

use super::network::{Network, Topology};
use crate::error::{Error, Result};

/// Squared voltage below which the sweep gives up (0.5 p.u. magnitude).
pub const COLLAPSE_V: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// One power-flow snapshot. Bus vectors follow network bus order, line
/// vectors follow network line order with flows measured at the parent end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFlowSolution {
    pub v: Vec<f64>,
    pub flow_p: Vec<f64>,
    pub flow_q: Vec<f64>,
    pub current_sq: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

impl PowerFlowSolution {
    /// Voltage magnitudes in p.u.
    pub fn voltage_magnitudes(&self) -> Vec<f64> {
        self.v.iter().map(|v| v.sqrt()).collect()
    }

    /// Real power lost in line resistances, p.u.
    pub fn total_loss(&self, net: &Network) -> f64 {
        net.lines
            .iter()
            .zip(&self.current_sq)
            .map(|(line, l)| line.r * l)
            .sum()
    }
}

/// Exact and linearized DistFlow solver bound to one network. Building it
/// caches the tree structure so repeated snapshot solves are cheap.
#[derive(Debug, Clone)]
pub struct DistFlowSolver<'a> {
    net: &'a Network,
    topo: Topology,
    options: SolverOptions,
}

impl<'a> DistFlowSolver<'a> {
    pub fn new(net: &'a Network) -> Result<Self> {
        Ok(DistFlowSolver {
            net,
            topo: Topology::build(net)?,
            options: SolverOptions::default(),
        })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    fn check_dims(&self, p: &[f64], q: &[f64]) -> Result<()> {
        let n = self.net.n_buses();
        if p.len() != n || q.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "injections have {}/{} entries for {} buses",
                p.len(),
                q.len(),
                n
            )));
        }
        Ok(())
    }

    /// Accumulates line flows leaf-to-root for the given squared currents.
    fn backward(&self, p: &[f64], q: &[f64], l: &[f64], flow_p: &mut [f64], flow_q: &mut [f64]) {
        let n = self.net.n_buses();
        let mut acc_p = vec![0.0; n];
        let mut acc_q = vec![0.0; n];
        for &j in self.topo.order.iter().rev() {
            let (Some(k), Some(i)) = (self.topo.parent_line[j], self.topo.parent[j]) else {
                continue;
            };
            let line = &self.net.lines[k];
            flow_p[k] = line.r * l[k] + acc_p[j] - p[j];
            flow_q[k] = line.x * l[k] + acc_q[j] - q[j];
            acc_p[i] += flow_p[k];
            acc_q[i] += flow_q[k];
        }
    }

    /// Propagates squared voltages root-to-leaf.
    fn forward(&self, flow_p: &[f64], flow_q: &[f64], l: &[f64], v: &mut [f64]) {
        v[self.topo.order[0]] = self.net.v_root;
        for &j in self.topo.order.iter().skip(1) {
            let (Some(k), Some(i)) = (self.topo.parent_line[j], self.topo.parent[j]) else {
                continue;
            };
            let line = &self.net.lines[k];
            let z2 = line.r * line.r + line.x * line.x;
            v[j] = v[i] - 2.0 * (line.r * flow_p[k] + line.x * flow_q[k]) + z2 * l[k];
        }
    }

    /// Largest violation of the four equation families at the given state.
    fn max_residual(&self, p: &[f64], q: &[f64], sol: &PowerFlowSolution) -> f64 {
        let n = self.net.n_buses();
        let mut child_p = vec![0.0; n];
        let mut child_q = vec![0.0; n];
        for (k, &i) in self.topo.line_parent.iter().enumerate() {
            child_p[i] += sol.flow_p[k];
            child_q[i] += sol.flow_q[k];
        }
        let mut worst: f64 = 0.0;
        for (k, line) in self.net.lines.iter().enumerate() {
            let i = self.topo.line_parent[k];
            let j = self.topo.line_child[k];
            let (pk, qk, lk) = (sol.flow_p[k], sol.flow_q[k], sol.current_sq[k]);
            let z2 = line.r * line.r + line.x * line.x;
            let ra = p[j] + pk - line.r * lk - child_p[j];
            let rb = q[j] + qk - line.x * lk - child_q[j];
            let rc = sol.v[i] - sol.v[j] - 2.0 * (line.r * pk + line.x * qk) + z2 * lk;
            let rd = lk - (pk * pk + qk * qk) / sol.v[i];
            worst = worst.max(ra.abs()).max(rb.abs()).max(rc.abs()).max(rd.abs());
        }
        worst
    }

    /// Exact DistFlow solve by fixed-point sweep.
    ///
    /// Returns `Diverged` if any squared voltage drops to [`COLLAPSE_V`] or
    /// the residual stops being finite. Hitting `max_iter` without meeting
    /// the tolerance returns the last iterate with `converged = false`.
    pub fn solve(&self, p: &[f64], q: &[f64]) -> Result<PowerFlowSolution> {
        self.check_dims(p, q)?;
        let n = self.net.n_buses();
        let m = self.net.lines.len();
        let mut sol = PowerFlowSolution {
            v: vec![self.net.v_root; n],
            flow_p: vec![0.0; m],
            flow_q: vec![0.0; m],
            current_sq: vec![0.0; m],
            converged: false,
            iterations: 0,
            residual: f64::INFINITY,
        };
        let mut next_l = vec![0.0; m];
        for iter in 1..=self.options.max_iter.max(1) {
            self.backward(p, q, &sol.current_sq, &mut sol.flow_p, &mut sol.flow_q);
            self.forward(&sol.flow_p, &sol.flow_q, &sol.current_sq, &mut sol.v);
            if let Some((j, v)) = sol
                .v
                .iter()
                .enumerate()
                .find(|(_, v)| !(**v > COLLAPSE_V))
            {
                return Err(Error::Diverged(format!(
                    "squared voltage {v:.4} at bus {} on iteration {iter}",
                    self.net.buses[j]
                )));
            }
            for (k, l) in next_l.iter_mut().enumerate() {
                let i = self.topo.line_parent[k];
                *l = (sol.flow_p[k].powi(2) + sol.flow_q[k].powi(2)) / sol.v[i];
            }
            sol.iterations = iter;
            sol.residual = self.max_residual(p, q, &sol);
            if !sol.residual.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite residual on iteration {iter}"
                )));
            }
            if sol.residual <= self.options.tol {
                sol.converged = true;
                return Ok(sol);
            }
            sol.current_sq.copy_from_slice(&next_l);
        }
        Ok(sol)
    }

    /// Lossless single pass (`l = 0`). `residual` carries the largest loss
    /// term the linearization dropped, i.e. `max(r, |x|, r^2 + x^2) * l_hat`
    /// with `l_hat` evaluated from the linear flows.
    pub fn solve_linear(&self, p: &[f64], q: &[f64]) -> Result<PowerFlowSolution> {
        self.check_dims(p, q)?;
        let n = self.net.n_buses();
        let m = self.net.lines.len();
        let zero = vec![0.0; m];
        let mut flow_p = vec![0.0; m];
        let mut flow_q = vec![0.0; m];
        let mut v = vec![self.net.v_root; n];
        self.backward(p, q, &zero, &mut flow_p, &mut flow_q);
        self.forward(&flow_p, &flow_q, &zero, &mut v);
        let mut dropped: f64 = 0.0;
        for (k, line) in self.net.lines.iter().enumerate() {
            let vi = v[self.topo.line_parent[k]];
            let l_hat = (flow_p[k].powi(2) + flow_q[k].powi(2)) / vi;
            let z2 = line.r * line.r + line.x * line.x;
            dropped = dropped.max(line.r.max(line.x.abs()).max(z2) * l_hat);
        }
        Ok(PowerFlowSolution {
            v,
            flow_p,
            flow_q,
            current_sq: zero,
            converged: true,
            iterations: 1,
            residual: dropped,
        })
    }
}

/// Exact DistFlow solve with per-unit injections `p`, `q` (bus order).
pub fn solve_distflow(
    net: &Network,
    p: &[f64],
    q: &[f64],
    options: SolverOptions,
) -> Result<PowerFlowSolution> {
    DistFlowSolver::new(net)?.with_options(options).solve(p, q)
}

/// Lossless (LinDistFlow) solve with per-unit injections.
pub fn solve_lindistflow(net: &Network, p: &[f64], q: &[f64]) -> Result<PowerFlowSolution> {
    DistFlowSolver::new(net)?.solve_linear(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::network::Line;

    fn two_bus(r: f64, x: f64) -> Network {
        Network::new(
            vec![0, 1],
            vec![Line {
                from: 0,
                to: 1,
                r,
                x,
                s_max: 10.0,
            }],
            1,
        )
    }

    #[test]
    fn zero_injection_is_flat() {
        let net = two_bus(0.01, 0.02);
        let sol = solve_distflow(&net, &[0.0, 0.0], &[0.0, 0.0], SolverOptions::default()).unwrap();
        assert_eq!(sol.v, vec![1.0, 1.0]);
        assert_eq!(sol.flow_p, vec![0.0]);
        assert_eq!(sol.current_sq, vec![0.0]);
        assert!(sol.converged);
        assert_eq!(sol.iterations, 1);
        let lin = solve_lindistflow(&net, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(lin.v, sol.v);
    }

    #[test]
    fn linear_drop_is_hand_formula() {
        let net = two_bus(0.01, 0.02);
        let sol = solve_lindistflow(&net, &[0.0, -0.01], &[0.0, 0.0]).unwrap();
        // v0 - v1 = 2 (r P + x Q) with P = 0.01, Q = 0
        assert!((1.0 - sol.v[1] - 2.0 * 0.01 * 0.01).abs() < 1e-15);
        assert!(sol.converged);
    }

    #[test]
    fn dimension_mismatch() {
        let net = two_bus(0.01, 0.02);
        assert!(matches!(
            solve_distflow(&net, &[0.0], &[0.0, 0.0], SolverOptions::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn collapse_is_diverged() {
        let net = two_bus(0.1, 0.1);
        let res = solve_distflow(&net, &[0.0, -50.0], &[0.0, 0.0], SolverOptions::default());
        assert!(matches!(res, Err(Error::Diverged(_))));
    }

    #[test]
    fn iteration_cap_reports_unconverged() {
        let net = two_bus(0.05, 0.05);
        let opts = SolverOptions {
            tol: 1e-14,
            max_iter: 2,
        };
        let sol = solve_distflow(&net, &[0.0, -2.0], &[0.0, -1.0], opts).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 2);
    }

    #[test]
    fn root_injection_is_ignored() {
        let net = two_bus(0.01, 0.02);
        let a = solve_distflow(&net, &[0.0, -0.1], &[0.0, 0.0], SolverOptions::default()).unwrap();
        let b = solve_distflow(&net, &[5.0, -0.1], &[3.0, 0.0], SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
