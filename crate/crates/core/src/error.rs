use thiserror::Error;

/// Errors produced by the feeder model and the solvers built on it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid feeder: {0}")]
    InvalidFeeder(String),

    #[error("node {node}: real generation {p_g} W exceeds inverter capacity {s} VA")]
    CapacityExceeded { node: usize, p_g: f64, s: f64 },

    #[error("unknown case id {0} (expected 1..=7)")]
    UnknownCase(u32),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("DistFlow sweep did not converge after {sweeps} sweeps (residual {residual:.3e} V^2)")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("DistFlow produced a negative squared voltage at node {node}")]
    NegativeVoltage { node: usize },

    #[error("optimization problem is infeasible; most violated constraint: {constraint}")]
    Infeasible { constraint: String },

    #[error("brute-force oracle supports at most {max} nodes, got {got}")]
    DimensionTooLarge { max: usize, got: usize },

    #[error("node {node}: no active set satisfies the KKT conditions")]
    NoValidActiveSet { node: usize },

    #[error("node {node}: capacity box and voltage window admit no point")]
    InfeasibleNode { node: usize },

    #[error("node {node}: missing neighbor message in synchronous round")]
    MissingMessage { node: usize },

    #[error("dual ascent diverged at iteration {iteration}: max |Q| = {max_flow:.3e} kVAr exceeds guard {guard:.3e}")]
    Diverged { iteration: usize, max_flow: f64, guard: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
