//! Exact branch-flow (DistFlow) solver for a radial line.
//!
//! Backward/forward sweep. The backward pass rebuilds the branch flows from the
//! leaf, charging each link with the loss computed from the previous sweep's
//! flows and squared voltages; the forward pass then updates the squared
//! voltages from the substation. Iteration stops once the largest change in
//! any squared voltage drops below `tol`.

use crate::error::{Error, Result};
use crate::feeder::{ControlVector, Feeder};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_SWEEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactFlowState {
    /// `P_0..P_n` (W).
    pub p_flow: Vec<f64>,
    /// `Q_0..Q_n` (VAr).
    pub q_flow: Vec<f64>,
    /// `V_0^2..V_n^2` (V^2).
    pub v_sq: Vec<f64>,
    /// Total real loss (W).
    pub loss: f64,
    /// Total reactive loss (VAr).
    pub reactive_loss: f64,
    pub iterations: usize,
    /// Final max squared-voltage update (V^2).
    pub residual: f64,
    /// Residual after every sweep.
    pub residual_history: Vec<f64>,
}

impl ExactFlowState {
    /// Voltage magnitudes of nodes `1..=n` divided by `v0`.
    pub fn normalized_voltages(&self, v0: f64) -> Vec<f64> {
        self.v_sq[1..].iter().map(|v| v.sqrt() / v0).collect()
    }
}

pub fn solve_distflow(
    feeder: &Feeder,
    control: &ControlVector,
    tol: f64,
    max_sweeps: usize,
) -> Result<ExactFlowState> {
    control.check_len(feeder)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let nodes = feeder.nodes();
    let n = nodes.len();
    let v0_sq = feeder.params().v0.powi(2);
    let net_p: Vec<f64> = nodes.iter().map(|nd| nd.p_c - nd.p_g).collect();
    let net_q: Vec<f64> = nodes.iter().zip(&control.q_g).map(|(nd, qg)| nd.q_c - qg).collect();

    let mut p = vec![0.0; n + 1];
    let mut q = vec![0.0; n + 1];
    let mut v_sq = vec![v0_sq; n + 1];
    let mut history = Vec::new();

    for sweep in 1..=max_sweeps {
        let mut p_next = vec![0.0; n + 1];
        let mut q_next = vec![0.0; n + 1];
        for k in (0..n).rev() {
            let s_sq = (p[k] * p[k] + q[k] * q[k]) / v_sq[k];
            p_next[k] = p_next[k + 1] + net_p[k] + nodes[k].r * s_sq;
            q_next[k] = q_next[k + 1] + net_q[k] + nodes[k].x * s_sq;
        }

        let mut residual: f64 = 0.0;
        let mut v_next = vec![v0_sq; n + 1];
        for k in 0..n {
            let nd = &nodes[k];
            let s_sq = (p_next[k].powi(2) + q_next[k].powi(2)) / v_next[k];
            v_next[k + 1] = v_next[k] - 2.0 * (nd.r * p_next[k] + nd.x * q_next[k])
                + (nd.r * nd.r + nd.x * nd.x) * s_sq;
            if !(v_next[k + 1] > 0.0) {
                return Err(Error::NegativeVoltage { node: k + 1 });
            }
            residual = residual.max((v_next[k + 1] - v_sq[k + 1]).abs());
        }
        p = p_next;
        q = q_next;
        v_sq = v_next;
        history.push(residual);

        if residual < tol {
            let (loss, reactive_loss) = losses(feeder, &p, &q, &v_sq);
            return Ok(ExactFlowState {
                p_flow: p,
                q_flow: q,
                v_sq,
                loss,
                reactive_loss,
                iterations: sweep,
                residual,
                residual_history: history,
            });
        }
    }
    Err(Error::NoConvergence { sweeps: max_sweeps, residual: history.last().copied().unwrap_or(f64::NAN) })
}

fn losses(feeder: &Feeder, p: &[f64], q: &[f64], v_sq: &[f64]) -> (f64, f64) {
    feeder.nodes().iter().enumerate().fold((0.0, 0.0), |(lp, lq), (k, nd)| {
        let s_sq = (p[k] * p[k] + q[k] * q[k]) / v_sq[k];
        (lp + nd.r * s_sq, lq + nd.x * s_sq)
    })
}

/// `(min, max)` of `V_j / V0` over nodes `1..=n`.
pub fn normalized_min_max_voltage(state: &ExactFlowState, v0: f64) -> (f64, f64) {
    state
        .normalized_voltages(v0)
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}
