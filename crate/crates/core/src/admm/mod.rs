//! Consensus-ADMM node agents.
//!
//! Node `j` keeps local copies `Q-_j, Q+_j, U-_j, U+_j` of the shared flows
//! `Q_{j-1}, Q_j` and squared-voltage offsets `U_{j-1}, U_j`, one multiplier
//! per copy, and a cache of the shared values. A round is: local minimization,
//! exchange of copies with both neighbors, averaging, multiplier update.
//!
//! All values are in internal units (see [`crate::units`]).

pub mod local;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Line, DROP};
use local::{LocalError, LocalProblem, LocalSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Flows and voltages, with the voltage window enforced.
    Full,
    /// Flows only; voltage copies and constraints dropped.
    NoVoltage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// All flows zero; voltages from the linear model with zero reactive flow.
    #[default]
    ZeroQ,
    /// Flows and voltages of the uncontrolled feeder (`q_g = 0`).
    NoOpt,
    /// Flows and voltages under the local policy.
    LocalPolicy,
    /// Start as `NoOpt`, run the flow-only variant for a warm-up, then reseed
    /// voltages from the resulting injections and switch to the full variant.
    Hybrid,
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "zero_q" => Ok(InitScheme::ZeroQ),
            "noopt" => Ok(InitScheme::NoOpt),
            "local" | "local_policy" => Ok(InitScheme::LocalPolicy),
            "hybrid" => Ok(InitScheme::Hybrid),
            other => Err(Error::InvalidConfig(format!("unknown init scheme {other:?}"))),
        }
    }
}

/// Default warm-up length of the hybrid scheme, in rounds.
pub const DEFAULT_WARMUP: usize = 50;

/// One copy sent to a neighbor: `Q+`/`U+` travel right, `Q-`/`U-` travel left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborMessage {
    pub sender: usize,
    pub q_copy: f64,
    pub u_copy: f64,
}

/// Four values mirrored per node: `(minus, plus)` for `Q` and `U`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quad {
    pub q_minus: f64,
    pub q_plus: f64,
    pub u_minus: f64,
    pub u_plus: f64,
}

impl Quad {
    fn gap_sq(&self, other: &Quad, variant: Variant) -> f64 {
        let q = (self.q_minus - other.q_minus).powi(2) + (self.q_plus - other.q_plus).powi(2);
        match variant {
            Variant::Full => q + (self.u_minus - other.u_minus).powi(2) + (self.u_plus - other.u_plus).powi(2),
            Variant::NoVoltage => q,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmNodeState {
    /// 0-based node index (feeder node `index + 1`).
    pub index: usize,
    pub last: bool,
    pub local: Quad,
    pub lambda: Quad,
    /// Cached shared values `Q_{j-1}, Q_j, U_{j-1}, U_j`.
    pub global: Quad,
    pub r: f64,
    pub x: f64,
    /// Measured real flow into the node, `P_{j-1}`.
    pub p_in: f64,
    pub q_c: f64,
    pub s_tilde: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub v0_sq: f64,
    pub rho_q: f64,
    pub rho_u: f64,
}

impl AdmmNodeState {
    fn problem(&self) -> LocalProblem {
        let g = &self.global;
        let l = &self.lambda;
        LocalProblem {
            loss_weight: self.r / self.v0_sq,
            rho_q: self.rho_q,
            rho_u: self.rho_u,
            beta: DROP * self.x,
            gamma: DROP * self.r * self.p_in,
            q_c: self.q_c,
            s_tilde: self.s_tilde,
            u_min: self.u_min,
            u_max: self.u_max,
            has_u_minus: self.index > 0,
            global: [g.q_minus, g.q_plus, g.u_minus, g.u_plus],
            lambda: [l.q_minus, l.q_plus, l.u_minus, l.u_plus],
        }
    }

    /// Minimization step: replaces the local copies with the exact minimizer
    /// of the node's augmented Lagrangian.
    pub fn local_minimize(&mut self, variant: Variant) -> Result<()> {
        let sol = local::local_minimize(&self.problem(), variant).map_err(|e| match e {
            LocalError::NoValidActiveSet => Error::NoValidActiveSet { node: self.index + 1 },
            LocalError::InfeasibleNode => Error::InfeasibleNode { node: self.index + 1 },
        })?;
        let LocalSolution { q_minus, q_plus, u_minus, u_plus } = sol;
        self.local.q_minus = q_minus;
        self.local.q_plus = q_plus;
        if variant == Variant::Full {
            self.local.u_minus = u_minus;
            self.local.u_plus = u_plus;
        }
        Ok(())
    }

    pub fn message_left(&self) -> NeighborMessage {
        NeighborMessage { sender: self.index, q_copy: self.local.q_minus, u_copy: self.local.u_minus }
    }

    pub fn message_right(&self) -> NeighborMessage {
        NeighborMessage { sender: self.index, q_copy: self.local.q_plus, u_copy: self.local.u_plus }
    }

    /// Averaging step. `left` carries the upstream neighbor's `Q+`/`U+`,
    /// `right` the downstream neighbor's `Q-`/`U-`. Returns the squared change
    /// of the cached shared values.
    pub fn average_globals(
        &mut self,
        left: Option<&NeighborMessage>,
        right: Option<&NeighborMessage>,
        variant: Variant,
    ) -> Result<f64> {
        let old = self.global;
        let own = self.local;
        if self.index == 0 {
            self.global.q_minus = own.q_minus;
            self.global.u_minus = 0.0;
        } else {
            let m = left.ok_or(Error::MissingMessage { node: self.index + 1 })?;
            self.global.q_minus = 0.5 * (m.q_copy + own.q_minus);
            self.global.u_minus = 0.5 * (m.u_copy + own.u_minus);
        }
        if self.last {
            self.global.q_plus = 0.0;
            self.global.u_plus = own.u_plus;
        } else {
            let m = right.ok_or(Error::MissingMessage { node: self.index + 1 })?;
            self.global.q_plus = 0.5 * (own.q_plus + m.q_copy);
            self.global.u_plus = 0.5 * (own.u_plus + m.u_copy);
        }
        Ok(self.global.gap_sq(&old, variant))
    }

    /// Multiplier step: `lambda += rho (copy - shared)`.
    pub fn update_multipliers(&mut self, variant: Variant) {
        let (l, g) = (&self.local, &self.global);
        self.lambda.q_plus += self.rho_q * (l.q_plus - g.q_plus);
        self.lambda.q_minus += self.rho_q * (l.q_minus - g.q_minus);
        if variant == Variant::Full {
            self.lambda.u_plus += self.rho_u * (l.u_plus - g.u_plus);
            self.lambda.u_minus += self.rho_u * (l.u_minus - g.u_minus);
        }
    }

    /// Squared distance between local copies and cached shared values.
    pub fn consensus_gap(&self, variant: Variant) -> f64 {
        self.local.gap_sq(&self.global, variant)
    }

    /// Reactive injection implied by the local copies: `Q+ - Q- + q_c`.
    pub fn recover_injection(&self) -> f64 {
        self.local.q_plus - self.local.q_minus + self.q_c
    }

    /// Overwrites voltage copies and shared values, clearing voltage multipliers.
    pub fn reseed_voltages(&mut self, u_minus: f64, u_plus: f64) {
        self.local.u_minus = u_minus;
        self.local.u_plus = u_plus;
        self.global.u_minus = u_minus;
        self.global.u_plus = u_plus;
        self.lambda.u_minus = 0.0;
        self.lambda.u_plus = 0.0;
    }
}

/// Default ratio of the voltage penalty to the flow penalty.
pub const RHO_U_RATIO: f64 = 500.0;

/// Penalty parameters: `rho_q = 1 / V0^2` (V0 in kV) and
/// `rho_u = RHO_U_RATIO * rho_q` by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub rho_q: f64,
    pub rho_u: f64,
}

impl Penalty {
    pub fn default_for(line: &Line) -> Self {
        Self::with_rho(1.0 / line.v0_sq())
    }

    pub fn with_rho(rho_q: f64) -> Self {
        Self { rho_q, rho_u: RHO_U_RATIO * rho_q }
    }
}

/// Reactive flows (kVAr) that an initialization scheme starts from.
pub fn initial_flows(line: &Line, q_local: &[f64], scheme: InitScheme) -> Vec<f64> {
    let n = line.len();
    match scheme {
        InitScheme::ZeroQ => vec![0.0; n + 1],
        InitScheme::NoOpt | InitScheme::Hybrid => line.reactive_flows(&vec![0.0; n]),
        InitScheme::LocalPolicy => line.reactive_flows(q_local),
    }
}

/// Builds consistent node states from reactive flows `Q_0..Q_n` (kVAr).
pub fn states_from_flows(line: &Line, q_flow: &[f64], penalty: Penalty) -> Vec<AdmmNodeState> {
    let n = line.len();
    let u = line.voltage_offsets(q_flow);
    (0..n)
        .map(|k| {
            let quad = Quad { q_minus: q_flow[k], q_plus: q_flow[k + 1], u_minus: u[k], u_plus: u[k + 1] };
            AdmmNodeState {
                index: k,
                last: k + 1 == n,
                local: quad,
                lambda: Quad::default(),
                global: quad,
                r: line.r[k],
                x: line.x[k],
                p_in: line.p_flow[k],
                q_c: line.q_c[k],
                s_tilde: line.s_tilde[k],
                u_min: line.u_min,
                u_max: line.u_max,
                v0_sq: line.v0_sq(),
                rho_q: penalty.rho_q,
                rho_u: penalty.rho_u,
            }
        })
        .collect()
}

/// Node states for an initialization scheme; `q_local` is the local-policy
/// control in kVAr.
pub fn init_states(line: &Line, q_local: &[f64], scheme: InitScheme, penalty: Penalty) -> Vec<AdmmNodeState> {
    states_from_flows(line, &initial_flows(line, q_local, scheme), penalty)
}
