//! Centralized reference optimizer for the linearized problem.
//!
//! The decision variables are the reactive flows `Q_0..Q_{n-1}` (with
//! `Q_n = 0`); the loss is diagonal in them. Inverter capacity becomes a pair of
//! difference constraints per node and each voltage limit is a prefix-sum
//! constraint. The QP is solved with a dual active-set method and certified by
//! its KKT residual.

pub mod brute_force;
pub mod dual_active_set;

use std::fmt;

use crate::error::{Error, Result};
use crate::feeder::{ControlVector, Feeder};
use crate::units::{self, Line, DROP};
use dual_active_set::{ConstraintSet, DualActiveSetError};

pub use brute_force::brute_force_oracle;

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    CapacityUpper,
    CapacityLower,
    VoltageUpper,
    VoltageLower,
}

/// A binding constraint; `node` is the 1-based feeder node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveConstraint {
    pub node: usize,
    pub kind: ConstraintKind,
    pub multiplier: f64,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintKind::CapacityUpper => "capacity upper bound",
            ConstraintKind::CapacityLower => "capacity lower bound",
            ConstraintKind::VoltageUpper => "voltage upper bound",
            ConstraintKind::VoltageLower => "voltage lower bound",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    /// Optimal reactive flows `Q_0..Q_{n-1}` (VAr).
    pub q_opt: Vec<f64>,
    pub control: ControlVector,
    /// Linear loss at the optimum (W).
    pub objective: f64,
    pub kkt_residual: f64,
    pub active_sets: Vec<ActiveConstraint>,
}

/// The problem's inequality constraints in internal units, each row scaled to
/// unit norm. Index `4k + i` (or `2k + i` without voltage limits) belongs to
/// node `k`, with `i` following [`ConstraintKind`] order.
pub(crate) struct LineConstraints<'a> {
    line: &'a Line,
    with_voltage: bool,
    /// `U_{k+1}` with all reactive flows zero.
    u_real: Vec<f64>,
    /// `DROP * sqrt(sum_{i <= k} x_i^2)`, the norm of the voltage rows.
    volt_norm: Vec<f64>,
}

impl<'a> LineConstraints<'a> {
    pub(crate) fn new(line: &'a Line, with_voltage: bool) -> Self {
        let n = line.len();
        let u = line.voltage_offsets(&vec![0.0; n + 1]);
        let mut acc = 0.0;
        let volt_norm = line
            .x
            .iter()
            .map(|x| {
                acc += x * x;
                DROP * acc.sqrt()
            })
            .collect();
        Self { line, with_voltage, u_real: u[1..].to_vec(), volt_norm }
    }

    fn per_node(&self) -> usize {
        if self.with_voltage {
            4
        } else {
            2
        }
    }

    pub(crate) fn kind(&self, index: usize) -> (usize, ConstraintKind) {
        let kinds = [
            ConstraintKind::CapacityUpper,
            ConstraintKind::CapacityLower,
            ConstraintKind::VoltageUpper,
            ConstraintKind::VoltageLower,
        ];
        (index / self.per_node(), kinds[index % self.per_node()])
    }

    fn cap_norm(&self, k: usize) -> f64 {
        if k + 1 < self.line.len() {
            std::f64::consts::SQRT_2
        } else {
            1.0
        }
    }

    fn flow(q: &[f64], k: usize) -> f64 {
        q.get(k).copied().unwrap_or(0.0)
    }
}

impl ConstraintSet for LineConstraints<'_> {
    fn len(&self) -> usize {
        self.per_node() * self.line.len()
    }

    fn slacks(&self, q: &[f64], out: &mut [f64]) {
        let line = self.line;
        let per = self.per_node();
        let mut drop_acc = 0.0;
        for k in 0..line.len() {
            let q_g = Self::flow(q, k + 1) - q[k] + line.q_c[k];
            let cn = self.cap_norm(k);
            out[per * k] = (line.s_tilde[k] - q_g) / cn;
            out[per * k + 1] = (q_g + line.s_tilde[k]) / cn;
            if self.with_voltage {
                drop_acc += DROP * line.x[k] * q[k];
                let u = self.u_real[k] - drop_acc;
                let vn = self.volt_norm[k].max(f64::MIN_POSITIVE);
                out[per * k + 2] = (line.u_max - u) / vn;
                out[per * k + 3] = (u - line.u_min) / vn;
            }
        }
    }

    fn slack(&self, index: usize, q: &[f64]) -> f64 {
        let line = self.line;
        let (k, kind) = self.kind(index);
        match kind {
            ConstraintKind::CapacityUpper | ConstraintKind::CapacityLower => {
                let q_g = Self::flow(q, k + 1) - q[k] + line.q_c[k];
                let cn = self.cap_norm(k);
                if kind == ConstraintKind::CapacityUpper {
                    (line.s_tilde[k] - q_g) / cn
                } else {
                    (q_g + line.s_tilde[k]) / cn
                }
            }
            ConstraintKind::VoltageUpper | ConstraintKind::VoltageLower => {
                let drop: f64 = (0..=k).map(|i| DROP * line.x[i] * q[i]).sum();
                let u = self.u_real[k] - drop;
                let vn = self.volt_norm[k].max(f64::MIN_POSITIVE);
                if kind == ConstraintKind::VoltageUpper {
                    (line.u_max - u) / vn
                } else {
                    (u - line.u_min) / vn
                }
            }
        }
    }

    fn normal(&self, index: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (k, kind) = self.kind(index);
        let n = self.line.len();
        match kind {
            ConstraintKind::CapacityUpper | ConstraintKind::CapacityLower => {
                let sign = if kind == ConstraintKind::CapacityUpper { 1.0 } else { -1.0 };
                let cn = self.cap_norm(k);
                out[k] = sign / cn;
                if k + 1 < n {
                    out[k + 1] = -sign / cn;
                }
            }
            ConstraintKind::VoltageUpper | ConstraintKind::VoltageLower => {
                let sign = if kind == ConstraintKind::VoltageUpper { 1.0 } else { -1.0 };
                let vn = self.volt_norm[k].max(f64::MIN_POSITIVE);
                for i in 0..=k {
                    out[i] = sign * DROP * self.line.x[i] / vn;
                }
            }
        }
    }
}

fn describe(cons: &LineConstraints<'_>, index: usize, slack: f64) -> String {
    let (k, kind) = cons.kind(index);
    format!("node {} {kind} (violated by {:.3e} internal units)", k + 1, -slack)
}

/// The capacity box alone is always feasible, so an infeasible problem is
/// described by the worst voltage row at the capacity-only optimum.
fn most_violated(line: &Line, hess: &[f64], cons: &LineConstraints<'_>, tol: f64) -> Option<String> {
    if !cons.with_voltage {
        return None;
    }
    let relaxed = LineConstraints::new(line, false);
    let sol = dual_active_set::solve(hess, &vec![0.0; line.len()], &relaxed, tol * 0.1).ok()?;
    let mut slacks = vec![0.0; cons.len()];
    cons.slacks(&sol.x, &mut slacks);
    let (idx, slack) = slacks
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    Some(describe(cons, idx, slack))
}

/// Solves the linearized loss-minimization problem centrally.
pub fn solve_centralized(feeder: &Feeder, with_voltage_constraints: bool, tol: f64) -> Result<QpSolution> {
    let line = Line::new(feeder);
    solve_line(&line, with_voltage_constraints, tol)
}

pub(crate) fn solve_line(line: &Line, with_voltage: bool, tol: f64) -> Result<QpSolution> {
    let n = line.len();
    let v0_sq = line.v0_sq();
    let hess: Vec<f64> = line.r.iter().map(|r| 2.0 * r / v0_sq).collect();
    let cons = LineConstraints::new(line, with_voltage);
    let sol = dual_active_set::solve(&hess, &vec![0.0; n], &cons, tol * 0.1).map_err(|e| match e {
        DualActiveSetError::Infeasible { constraint, slack } => {
            let constraint = most_violated(line, &hess, &cons, tol).unwrap_or_else(|| describe(&cons, constraint, slack));
            Error::Infeasible { constraint }
        }
        DualActiveSetError::IterationLimit => {
            Error::Infeasible { constraint: "active-set iteration limit reached".into() }
        }
    })?;

    let kkt_residual = kkt_residual(&hess, &cons, &sol.x, &sol.active);
    let mut flows = sol.x.clone();
    flows.push(0.0);
    let q_g = line.injections(&flows);
    let objective = line.linear_loss(&flows);
    let active_sets = sol
        .active
        .iter()
        .map(|&(idx, mult)| {
            let (k, kind) = cons.kind(idx);
            ActiveConstraint { node: k + 1, kind, multiplier: mult }
        })
        .collect();

    Ok(QpSolution {
        q_opt: sol.x.iter().map(|q| units::to_var(*q)).collect(),
        control: ControlVector::new(q_g.into_iter().map(units::to_var).collect()),
        objective,
        kkt_residual,
        active_sets,
    })
}

/// Largest violation among stationarity, primal/dual feasibility and
/// complementarity, in internal units.
fn kkt_residual(hess: &[f64], cons: &LineConstraints<'_>, q: &[f64], active: &[(usize, f64)]) -> f64 {
    let n = q.len();
    let mut grad: Vec<f64> = hess.iter().zip(q).map(|(d, x)| d * x).collect();
    let mut normal = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for &(idx, mult) in active {
        cons.normal(idx, &mut normal);
        for (g, c) in grad.iter_mut().zip(&normal) {
            *g -= mult * c;
        }
        worst = worst.max(-mult).max((mult * cons.slack(idx, q)).abs());
    }
    worst = grad.iter().fold(worst, |w, g| w.max(g.abs()));
    let mut slacks = vec![0.0; cons.len()];
    cons.slacks(q, &mut slacks);
    slacks.iter().fold(worst, |w, s| w.max(-s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::{FeederParams, NodeSpec};
    use crate::lindistflow;

    const PARAMS: FeederParams = FeederParams { v0: 7200.0, epsilon: 0.05 };

    fn one_node(q_c: f64, cap: f64) -> Feeder {
        let node = NodeSpec { r: 0.0825, x: 0.095, p_c: 1000.0, q_c, p_g: 0.0, s: cap };
        Feeder::new(PARAMS, vec![node]).unwrap()
    }

    #[test]
    fn full_local_compensation() {
        let sol = solve_centralized(&one_node(500.0, 1000.0), true, DEFAULT_TOL).unwrap();
        assert!(sol.q_opt[0].abs() < 1e-9);
        assert!((sol.control.q_g[0] - 500.0).abs() < 1e-9);
        let p_only = 0.0825 * 1e6 / 7200.0f64.powi(2);
        assert!((sol.objective - p_only).abs() < 1e-12);
        assert!(sol.active_sets.is_empty());
    }

    #[test]
    fn capacity_binds() {
        let sol = solve_centralized(&one_node(500.0, 200.0), true, DEFAULT_TOL).unwrap();
        assert!((sol.q_opt[0] - 300.0).abs() < 1e-7);
        assert!((sol.control.q_g[0] - 200.0).abs() < 1e-7);
        assert_eq!(sol.active_sets.len(), 1);
        assert_eq!(sol.active_sets[0].kind, ConstraintKind::CapacityUpper);
        assert!(sol.kkt_residual < 1e-9);
    }

    #[test]
    fn infeasible_voltage_window() {
        let nodes = vec![NodeSpec { r: 0.0825, x: 0.095, p_c: 1e7, q_c: 1e6, p_g: 0.0, s: 1.0 }; 3];
        let f = Feeder::new(PARAMS, nodes).unwrap();
        let err = solve_centralized(&f, true, DEFAULT_TOL).unwrap_err();
        match err {
            Error::Infeasible { constraint } => assert!(constraint.contains("voltage"), "{constraint}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(solve_centralized(&f, false, DEFAULT_TOL).is_ok());
    }

    #[test]
    fn solution_is_feasible_and_certified() {
        let nodes: Vec<NodeSpec> = (0..60)
            .map(|k| NodeSpec {
                r: 0.0825,
                x: 0.095,
                p_c: 2500.0 + 10.0 * k as f64,
                q_c: 900.0,
                p_g: if k % 2 == 0 { 1000.0 } else { 0.0 },
                s: if k % 2 == 0 { 1100.0 } else { 0.0 },
            })
            .collect();
        let f = Feeder::new(PARAMS, nodes).unwrap();
        for flag in [false, true] {
            let sol = solve_centralized(&f, flag, DEFAULT_TOL).unwrap();
            assert!(sol.kkt_residual < 1e-8, "kkt {}", sol.kkt_residual);
            let rep = lindistflow::check_feasibility(&f, &sol.control).unwrap();
            assert!(rep.capacity_violation <= 1e-9);
            if flag {
                assert!(rep.voltage_violation <= 1e-9);
            }
            let loss0 = lindistflow::control_loss(&f, &ControlVector::zeros(60)).unwrap();
            assert!(sol.objective <= loss0);
        }
    }
}
