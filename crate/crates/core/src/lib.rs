//! Distributed volt/VAR control on radial distribution feeders.
//!
//! Feeder model and benchmark cases, linear and exact power flow, a
//! centralized QP oracle, consensus-ADMM and dual-ascent node agents, and a
//! synchronous simulator that runs them.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod cases;
pub mod distflow;
pub mod dual_ascent;
pub mod error;
pub mod exec;
pub mod feeder;
pub mod io;
pub mod lindistflow;
pub mod local_policy;
pub mod metrics;
pub mod oracle;
pub mod simulator;
pub mod units;

pub use error::{Error, Result};
pub use feeder::{ControlVector, Feeder, FeederParams, NodeSpec};
