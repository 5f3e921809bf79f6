//! Internal unit convention and the prepared line data every solver works on.
//!
//! Solvers run in units that keep the terms of the ADMM Lagrangian balanced:
//! powers and flows in kW / kVAr, squared-voltage offsets `U` in units of
//! 1e5 V^2, substation voltage in kV. With these units `r * (P^2 + Q^2) / V0^2`
//! comes out directly in watts.

use crate::feeder::Feeder;
use crate::lindistflow;

/// Watts (or VAr) per internal power unit.
pub const POWER_UNIT: f64 = 1e3;
/// V^2 per internal squared-voltage unit.
pub const VOLTAGE_SQ_UNIT: f64 = 1e5;
/// Volts per internal voltage unit.
pub const VOLTAGE_UNIT: f64 = 1e3;
/// `U_{j+1} = U_j - DROP * (r P + x Q)` in internal units.
pub const DROP: f64 = 2.0 * POWER_UNIT / VOLTAGE_SQ_UNIT;

pub fn to_kvar(var: f64) -> f64 {
    var / POWER_UNIT
}

pub fn to_var(kvar: f64) -> f64 {
    kvar * POWER_UNIT
}

pub fn to_u_internal(v_sq: f64) -> f64 {
    v_sq / VOLTAGE_SQ_UNIT
}

pub fn to_v_sq(u_internal: f64) -> f64 {
    u_internal * VOLTAGE_SQ_UNIT
}

/// Feeder data in internal units, indexed by load node `k = 0..n`
/// (feeder node `k + 1`). Link `k` feeds node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub r: Vec<f64>,
    pub x: Vec<f64>,
    /// Real flows `P_0..P_n` in kW, with `P_n = 0`.
    pub p_flow: Vec<f64>,
    /// Reactive consumption per node, kVAr.
    pub q_c: Vec<f64>,
    /// Reactive headroom per node, kVAr.
    pub s_tilde: Vec<f64>,
    pub v0: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl Line {
    pub fn new(feeder: &Feeder) -> Self {
        let nodes = feeder.nodes();
        let (u_min, u_max) = feeder.voltage_bounds();
        Self {
            r: nodes.iter().map(|n| n.r).collect(),
            x: nodes.iter().map(|n| n.x).collect(),
            p_flow: lindistflow::real_flows(feeder).into_iter().map(to_kvar).collect(),
            q_c: nodes.iter().map(|n| to_kvar(n.q_c)).collect(),
            s_tilde: feeder.effective_capacities().into_iter().map(to_kvar).collect(),
            v0: feeder.params().v0 / VOLTAGE_UNIT,
            u_min: to_u_internal(u_min),
            u_max: to_u_internal(u_max),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn v0_sq(&self) -> f64 {
        self.v0 * self.v0
    }

    /// Reactive flows `Q_0..Q_n` (kVAr) for injections `q_g` (kVAr).
    pub fn reactive_flows(&self, q_g: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut q = vec![0.0; n + 1];
        for k in (0..n).rev() {
            q[k] = q[k + 1] + self.q_c[k] - q_g[k];
        }
        q
    }

    /// Injections recovered from flows: `q_g[k] = Q_{k+1} - Q_k + q_c[k]`.
    pub fn injections(&self, q_flow: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| q_flow[k + 1] - q_flow[k] + self.q_c[k])
            .collect()
    }

    /// Squared-voltage offsets `U_0..U_n` (internal units) for reactive flows.
    pub fn voltage_offsets(&self, q_flow: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut u = vec![0.0; n + 1];
        for k in 0..n {
            u[k + 1] = u[k] - DROP * (self.r[k] * self.p_flow[k] + self.x[k] * q_flow[k]);
        }
        u
    }

    /// Linear loss in watts.
    pub fn linear_loss(&self, q_flow: &[f64]) -> f64 {
        let v0_sq = self.v0_sq();
        (0..self.len())
            .map(|k| self.r[k] * (self.p_flow[k].powi(2) + q_flow[k].powi(2)) / v0_sq)
            .sum()
    }
}
