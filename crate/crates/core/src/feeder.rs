//! Radial feeder data model.
//!
//! A feeder is a line of `n` load nodes hanging below a fixed-voltage
//! substation. Node `k` in the `nodes` vector (0-based) is feeder node `k + 1`;
//! its `r`/`x` describe the link from its upstream neighbor. The substation
//! carries no [`NodeSpec`] and has a fixed squared-voltage offset of zero.
//!
//! All public quantities here are SI: volts, watts, VAr, VA, ohms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Substation voltage and the allowed relative deviation around it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeederParams {
    /// Voltage magnitude at the substation (V).
    pub v0: f64,
    /// Allowed relative voltage deviation, e.g. 0.05.
    pub epsilon: f64,
}

impl FeederParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v0.is_finite() && self.v0 > 0.0) {
            return Err(Error::InvalidFeeder(format!("v0 must be positive, got {}", self.v0)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidFeeder(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// One load node and the link feeding it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    /// Link resistance (ohm).
    pub r: f64,
    /// Link reactance (ohm).
    pub x: f64,
    /// Real power consumed (W).
    pub p_c: f64,
    /// Reactive power consumed (VAr).
    pub q_c: f64,
    /// Real PV generation (W).
    pub p_g: f64,
    /// Inverter apparent-power capacity (VA). Zero for nodes without PV.
    pub s: f64,
}

impl NodeSpec {
    fn validate(&self, node: usize) -> Result<()> {
        let finite = [self.r, self.x, self.p_c, self.q_c, self.p_g, self.s]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidFeeder(format!("node {node}: non-finite field")));
        }
        if self.r <= 0.0 || self.x < 0.0 {
            return Err(Error::InvalidFeeder(format!(
                "node {node}: need r > 0 and x >= 0 (r = {}, x = {})",
                self.r, self.x
            )));
        }
        if self.p_c < 0.0 || self.s < 0.0 || self.p_g < 0.0 {
            return Err(Error::InvalidFeeder(format!(
                "node {node}: p_c, p_g and s must be nonnegative"
            )));
        }
        effective_capacity_at(self, node).map(|_| ())
    }
}

/// Reactive headroom `sqrt(s^2 - p_g^2)` of a node's inverter (VAr).
pub fn effective_capacity(node: &NodeSpec) -> Result<f64> {
    effective_capacity_at(node, 0)
}

fn effective_capacity_at(node: &NodeSpec, index: usize) -> Result<f64> {
    if node.s == 0.0 && node.p_g == 0.0 {
        return Ok(0.0);
    }
    if node.p_g > node.s {
        return Err(Error::CapacityExceeded { node: index, p_g: node.p_g, s: node.s });
    }
    Ok((node.s * node.s - node.p_g * node.p_g).sqrt())
}

/// Bounds on the squared-voltage offset `U = V^2 - V0^2` (V^2).
///
/// These are exactly `(1 -+ eps)^2 V0^2 - V0^2`.
pub fn voltage_bounds(params: &FeederParams) -> (f64, f64) {
    let v0_sq = params.v0 * params.v0;
    let e = params.epsilon;
    (v0_sq * (e * e - 2.0 * e), v0_sq * (e * e + 2.0 * e))
}

/// A radial feeder: substation parameters plus nodes `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Feeder {
    params: FeederParams,
    nodes: Vec<NodeSpec>,
}

impl Feeder {
    pub fn new(params: FeederParams, nodes: Vec<NodeSpec>) -> Result<Self> {
        params.validate()?;
        if nodes.is_empty() {
            return Err(Error::InvalidFeeder("feeder needs at least one node".into()));
        }
        for (k, node) in nodes.iter().enumerate() {
            node.validate(k + 1)?;
        }
        Ok(Self { params, nodes })
    }

    pub fn params(&self) -> &FeederParams {
        &self.params
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    /// Number of load nodes (the substation is not counted).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Per-node reactive headroom in VAr.
    pub fn effective_capacities(&self) -> Vec<f64> {
        // validated in `new`
        self.nodes
            .iter()
            .map(|n| effective_capacity(n).unwrap_or(0.0))
            .collect()
    }

    pub fn voltage_bounds(&self) -> (f64, f64) {
        voltage_bounds(&self.params)
    }
}

/// Reactive injections `q_g` (VAr), one per load node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    pub q_g: Vec<f64>,
}

impl ControlVector {
    pub fn new(q_g: Vec<f64>) -> Self {
        Self { q_g }
    }

    pub fn zeros(n: usize) -> Self {
        Self { q_g: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.q_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_g.is_empty()
    }

    pub fn check_len(&self, feeder: &Feeder) -> Result<()> {
        if self.q_g.len() != feeder.len() {
            return Err(Error::LengthMismatch { expected: feeder.len(), got: self.q_g.len() });
        }
        Ok(())
    }

    /// Whether every injection respects its inverter's reactive headroom.
    pub fn is_capacity_feasible(&self, feeder: &Feeder, tol_var: f64) -> bool {
        self.q_g.len() == feeder.len()
            && self
                .q_g
                .iter()
                .zip(feeder.effective_capacities())
                .all(|(q, cap)| q.abs() <= cap + tol_var)
    }
}
