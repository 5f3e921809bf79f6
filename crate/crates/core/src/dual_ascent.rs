//! Dual-ascent node agents for the flow-only problem.
//!
//! Agent `j` (`0..=n`, agent 0 at the substation) holds the flow `Q_j` on the
//! link towards node `j + 1` and the two multipliers of its own capacity
//! constraint `|Q_j - Q_{j-1} + q_c_j| <= s~_j`. The substation agent has no
//! constraint and its multipliers stay zero; agent `n` pins `Q_n = 0`.
//!
//! One iteration is two half-rounds: multipliers travel left, then fresh
//! flows travel right. All values are in internal units (see [`crate::units`]).

use crate::error::{Error, Result};
use crate::units::Line;

#[derive(Debug, Clone, PartialEq)]
pub struct DualAscentNodeState {
    pub index: usize,
    /// Flow `Q_j`, kVAr.
    pub q: f64,
    pub zeta_plus: f64,
    pub zeta_minus: f64,
    /// Resistance of the link towards node `j + 1`; unused by the last agent.
    pub r: f64,
    pub q_c: f64,
    pub s_tilde: f64,
    pub alpha: f64,
    pub v0_sq: f64,
    pub last: bool,
}

/// Multipliers sent to the left neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualMessage {
    pub sender: usize,
    pub zeta_plus: f64,
    pub zeta_minus: f64,
}

/// Flow sent to the right neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalMessage {
    pub sender: usize,
    pub q: f64,
}

/// Stationary point of the Lagrangian in `Q_j`:
/// `V0^2 / (2 r_j) (z+_j - z+_{j-1} + z-_{j-1} - z-_j)`.
pub fn primal_update(zeta_plus_j: f64, zeta_plus_jm1: f64, zeta_minus_j: f64, zeta_minus_jm1: f64, r_j: f64, v0_sq: f64) -> f64 {
    v0_sq / (2.0 * r_j) * (zeta_plus_j - zeta_plus_jm1 + zeta_minus_jm1 - zeta_minus_j)
}

/// Capacity slacks `(D+, D-)` of the constraint between `q_prev` and `q`.
pub fn constraint_gaps(q: f64, q_prev: f64, q_c: f64, s_tilde: f64) -> (f64, f64) {
    let q_g = q - q_prev + q_c;
    (q_g - s_tilde, -q_g - s_tilde)
}

/// Projected step `z = max(0, z + alpha D)` for both multipliers.
pub fn dual_update(zeta_plus: f64, zeta_minus: f64, gaps: (f64, f64), alpha: f64) -> (f64, f64) {
    ((zeta_plus + alpha * gaps.0).max(0.0), (zeta_minus + alpha * gaps.1).max(0.0))
}

impl DualAscentNodeState {
    pub fn dual_message(&self) -> DualMessage {
        DualMessage { sender: self.index, zeta_plus: self.zeta_plus, zeta_minus: self.zeta_minus }
    }

    pub fn primal_message(&self) -> PrimalMessage {
        PrimalMessage { sender: self.index, q: self.q }
    }

    /// First half-round: recompute `Q_j` from the right neighbor's multipliers.
    pub fn primal_step(&mut self, right: Option<&DualMessage>) -> Result<()> {
        if self.last {
            self.q = 0.0;
            return Ok(());
        }
        let m = right.ok_or(Error::MissingMessage { node: self.index })?;
        self.q = primal_update(m.zeta_plus, self.zeta_plus, m.zeta_minus, self.zeta_minus, self.r, self.v0_sq);
        Ok(())
    }

    /// Second half-round: multiplier step from the left neighbor's fresh flow.
    /// Returns the agent's stopping residual.
    pub fn dual_step(&mut self, left: Option<&PrimalMessage>) -> Result<f64> {
        if self.index == 0 {
            return Ok(0.0);
        }
        let m = left.ok_or(Error::MissingMessage { node: self.index })?;
        let gaps = constraint_gaps(self.q, m.q, self.q_c, self.s_tilde);
        let (zp, zm) = dual_update(self.zeta_plus, self.zeta_minus, gaps, self.alpha);
        self.zeta_plus = zp;
        self.zeta_minus = zm;
        Ok(residual(zp, zm, gaps))
    }
}

/// Largest of the positive constraint violations and the complementarity
/// products.
pub fn residual(zeta_plus: f64, zeta_minus: f64, gaps: (f64, f64)) -> f64 {
    gaps.0
        .max(0.0)
        .max(gaps.1.max(0.0))
        .max((zeta_plus * gaps.0).abs())
        .max((zeta_minus * gaps.1).abs())
}

/// Messages exchanged in one iteration on an `n`-node feeder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub from: usize,
    pub to: usize,
    pub kind: ExchangeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeKind {
    Dual,
    Primal,
}

/// Ordered exchanges of one iteration: all multipliers leftward, then all
/// flows rightward.
pub fn message_schedule(n: usize) -> Vec<Exchange> {
    let duals = (1..=n).map(|j| Exchange { from: j, to: j - 1, kind: ExchangeKind::Dual });
    let primals = (0..n).map(|j| Exchange { from: j, to: j + 1, kind: ExchangeKind::Primal });
    duals.chain(primals).collect()
}

/// Zero-initialized agents `0..=n`.
pub fn init_states(line: &Line, alpha: f64) -> Vec<DualAscentNodeState> {
    let n = line.len();
    (0..=n)
        .map(|j| DualAscentNodeState {
            index: j,
            q: 0.0,
            zeta_plus: 0.0,
            zeta_minus: 0.0,
            r: if j < n { line.r[j] } else { 0.0 },
            q_c: if j > 0 { line.q_c[j - 1] } else { 0.0 },
            s_tilde: if j > 0 { line.s_tilde[j - 1] } else { 0.0 },
            alpha,
            v0_sq: line.v0_sq(),
            last: j == n,
        })
        .collect()
}

/// Default step size `0.05 / V0^2` (V0 in kV).
pub fn default_alpha(line: &Line) -> f64 {
    0.05 / line.v0_sq()
}

/// Flow magnitude beyond which an iteration is declared divergent, kVAr.
pub fn divergence_guard(line: &Line) -> f64 {
    1e3 * line.q_c.iter().map(|q| q.abs()).sum::<f64>() + line.s_tilde.iter().sum::<f64>()
}

/// Flows `Q_0..Q_n` held by the agents.
pub fn flows(states: &[DualAscentNodeState]) -> Vec<f64> {
    states.iter().map(|s| s.q).collect()
}
