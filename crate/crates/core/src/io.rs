//! JSON case-file format.
//!
//! ```json
//! { "v0_volts": 7200.0, "epsilon": 0.05,
//!   "nodes": [ { "r_ohm": 0.0825, "x_ohm": 0.095, "p_c_w": 1000.0,
//!                "q_c_var": 250.0, "p_g_w": 1000.0, "s_va": 1100.0 } ],
//!   "meta": { "case_id": 1, "seed": 7, "pv_placement": "even", "generator": "ChaCha8Rng" } }
//! ```
//!
//! Node `i` in the array is feeder node `i + 1`; its impedance is that of the
//! link from node `i` to node `i + 1`. `meta` is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::{Feeder, FeederParams, NodeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub r_ohm: f64,
    pub x_ohm: f64,
    pub p_c_w: f64,
    pub q_c_var: f64,
    pub p_g_w: f64,
    pub s_va: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMeta {
    pub case_id: u32,
    pub seed: u64,
    pub pv_placement: String,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    pub v0_volts: f64,
    pub epsilon: f64,
    pub nodes: Vec<NodeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<CaseMeta>,
}

impl CaseFile {
    pub fn from_feeder(feeder: &Feeder, meta: Option<CaseMeta>) -> Self {
        let nodes = feeder
            .nodes()
            .iter()
            .map(|n| NodeRecord {
                r_ohm: n.r,
                x_ohm: n.x,
                p_c_w: n.p_c,
                q_c_var: n.q_c,
                p_g_w: n.p_g,
                s_va: n.s,
            })
            .collect();
        Self { v0_volts: feeder.params().v0, epsilon: feeder.params().epsilon, nodes, meta }
    }

    pub fn to_feeder(&self) -> Result<Feeder> {
        let params = FeederParams { v0: self.v0_volts, epsilon: self.epsilon };
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeSpec { r: n.r_ohm, x: n.x_ohm, p_c: n.p_c_w, q_c: n.q_c_var, p_g: n.p_g_w, s: n.s_va })
            .collect();
        Feeder::new(params, nodes)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidFeeder(format!("case file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case file serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidFeeder(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
