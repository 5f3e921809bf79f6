//! Bulk-synchronous run controller for the distributed algorithms.
//!
//! Each round every agent computes, the bus delivers all of that round's
//! messages, then the next computation starts. Traces record the deviation
//! from an oracle control (when supplied), consensus residual, linear loss
//! and constraint violations.

use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmNodeState, InitScheme, NeighborMessage, Penalty, Variant, DEFAULT_WARMUP};
use crate::dual_ascent::{self, DualAscentNodeState};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::feeder::{ControlVector, Feeder};
use crate::local_policy::local_control;
use crate::units::{to_kvar, to_var, Line};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Admm,
    AdmmNov,
    DualAscent,
    Local,
    None,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "admm" => Ok(Algorithm::Admm),
            "admm-nov" | "admm_nov" => Ok(Algorithm::AdmmNov),
            "dual-ascent" | "dual_ascent" => Ok(Algorithm::DualAscent),
            "local" => Ok(Algorithm::Local),
            "none" => Ok(Algorithm::None),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

pub const DEFAULT_STOP_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub init: InitScheme,
    /// Penalty on flow copies; `None` means `1 / V0^2`.
    pub rho: Option<f64>,
    /// Penalty on voltage copies; `None` means [`admm::RHO_U_RATIO`] times the flow
    /// penalty.
    pub rho_u: Option<f64>,
    /// Dual-ascent step; `None` means `0.05 / V0^2`.
    pub alpha: Option<f64>,
    pub max_iters: usize,
    pub stop_tol: f64,
    /// Trace stride; `None` means 1 for ADMM and 10 for dual ascent.
    pub trace_every: Option<usize>,
    /// Flow-only rounds before the switch in the hybrid scheme.
    pub warmup: usize,
    /// Stop as soon as the oracle deviation drops to this level (kVAr).
    pub target_deviation: Option<f64>,
    pub exec: ExecMode,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            init: InitScheme::ZeroQ,
            rho: None,
            rho_u: None,
            alpha: None,
            max_iters: DEFAULT_MAX_ITERS,
            stop_tol: DEFAULT_STOP_TOL,
            trace_every: None,
            warmup: DEFAULT_WARMUP,
            target_deviation: None,
            exec: ExecMode::default(),
        }
    }

    pub fn with_init(mut self, init: InitScheme) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidConfig("stop_tol must be positive".into()));
        }
        if self.trace_every == Some(0) {
            return Err(Error::InvalidConfig("trace_every must be at least 1".into()));
        }
        for (name, v) in [("rho", self.rho), ("rho_u", self.rho_u), ("alpha", self.alpha)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidConfig(format!("{name} must be positive and finite")));
                }
            }
        }
        Ok(())
    }

    fn stride(&self) -> usize {
        self.trace_every.unwrap_or(match self.algorithm {
            Algorithm::DualAscent => 10,
            _ => 1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    /// Mean absolute deviation from the oracle control, kVAr.
    pub d_k: Option<f64>,
    pub consensus_residual: f64,
    pub loss_w: f64,
    /// Max `|q_g| - s~`, kVAr.
    pub cap_viol: f64,
    /// Max distance of `U` outside its window, internal units.
    pub volt_viol: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    /// First recorded iteration with `d_k <= threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.d_k.is_some_and(|d| d <= threshold)).map(|r| r.k)
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub control: ControlVector,
    pub trace: RunTrace,
    pub converged: bool,
    pub iterations: usize,
    pub messages: usize,
}

struct Recorder<'a> {
    line: &'a Line,
    oracle_kvar: Option<Vec<f64>>,
    stride: usize,
    trace: RunTrace,
}

impl<'a> Recorder<'a> {
    fn new(line: &'a Line, oracle: Option<&ControlVector>, stride: usize) -> Self {
        Self {
            line,
            oracle_kvar: oracle.map(|c| c.q_g.iter().copied().map(to_kvar).collect()),
            stride,
            trace: RunTrace::default(),
        }
    }

    fn deviation(&self, q_g: &[f64]) -> Option<f64> {
        self.oracle_kvar.as_ref().map(|o| {
            q_g.iter().zip(o).map(|(a, b)| (a - b).abs()).sum::<f64>() / q_g.len() as f64
        })
    }

    /// Records row `k` when it falls on the stride or `force` is set; returns
    /// the deviation whenever an oracle is present.
    fn observe(&mut self, k: usize, q_g: &[f64], residual: f64, force: bool) -> Option<f64> {
        let d = self.deviation(q_g);
        if force || k.is_multiple_of(self.stride) {
            if self.trace.rows.last().is_some_and(|r| r.k == k) {
                return d;
            }
            let line = self.line;
            let q = line.reactive_flows(q_g);
            let u = line.voltage_offsets(&q);
            let cap_viol = q_g
                .iter()
                .zip(&line.s_tilde)
                .map(|(q, s)| q.abs() - s)
                .fold(f64::NEG_INFINITY, f64::max);
            let volt_viol = u[1..]
                .iter()
                .map(|&u| (u - line.u_max).max(line.u_min - u))
                .fold(f64::NEG_INFINITY, f64::max);
            self.trace.rows.push(TraceRow {
                k,
                d_k: d,
                consensus_residual: residual,
                loss_w: line.linear_loss(&q),
                cap_viol,
                volt_viol,
            });
        }
        d
    }
}

fn to_control(q_g_kvar: &[f64]) -> ControlVector {
    ControlVector::new(q_g_kvar.iter().copied().map(to_var).collect())
}

/// A line of ADMM agents driven in synchronous rounds.
#[derive(Debug, Clone)]
pub struct AdmmNetwork {
    pub states: Vec<AdmmNodeState>,
    pub variant: Variant,
    pub exec: ExecMode,
    pub messages: usize,
}

/// Residuals of one ADMM round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmRound {
    /// Sum of squared gaps between local copies and shared values.
    pub residual: f64,
    /// Sum of squared changes of the cached shared values.
    pub change: f64,
}

impl AdmmNetwork {
    pub fn new(states: Vec<AdmmNodeState>, variant: Variant, exec: ExecMode) -> Self {
        Self { states, variant, exec, messages: 0 }
    }

    /// Minimization, neighbor exchange, averaging and multiplier update.
    pub fn round(&mut self) -> Result<AdmmRound> {
        let variant = self.variant;
        let n = self.states.len();
        exec::collect_ordered(exec::map_mut(self.exec, &mut self.states, |_, s| s.local_minimize(variant)))?;

        let left: Vec<NeighborMessage> = self.states.iter().map(AdmmNodeState::message_left).collect();
        let right: Vec<NeighborMessage> = self.states.iter().map(AdmmNodeState::message_right).collect();
        self.messages += 2 * n.saturating_sub(1);

        let changes = exec::collect_ordered(exec::map_mut(self.exec, &mut self.states, |j, s| {
            let from_left = if j > 0 { Some(&right[j - 1]) } else { None };
            let from_right = if j + 1 < n { Some(&left[j + 1]) } else { None };
            let change = s.average_globals(from_left, from_right, variant)?;
            s.update_multipliers(variant);
            Ok::<_, Error>(change)
        }))?;
        Ok(AdmmRound {
            residual: self.states.iter().map(|s| s.consensus_gap(variant)).sum(),
            change: changes.iter().sum(),
        })
    }

    /// Injections (kVAr) recovered from the local copies.
    pub fn injections(&self) -> Vec<f64> {
        self.states.iter().map(AdmmNodeState::recover_injection).collect()
    }
}

/// A line of dual-ascent agents `0..=n`.
#[derive(Debug, Clone)]
pub struct DualAscentNetwork {
    pub states: Vec<DualAscentNodeState>,
    pub exec: ExecMode,
    pub messages: usize,
    guard: f64,
    line: Line,
}

impl DualAscentNetwork {
    pub fn new(line: &Line, alpha: f64, exec: ExecMode) -> Self {
        Self {
            states: dual_ascent::init_states(line, alpha),
            exec,
            messages: 0,
            guard: dual_ascent::divergence_guard(line),
            line: line.clone(),
        }
    }

    /// One iteration; returns the stopping residual. `k` labels a divergence.
    pub fn round(&mut self, k: usize) -> Result<f64> {
        let duals: Vec<_> = self.states.iter().map(DualAscentNodeState::dual_message).collect();
        exec::collect_ordered(exec::map_mut(self.exec, &mut self.states, |j, s| s.primal_step(duals.get(j + 1))))?;
        let primals: Vec<_> = self.states.iter().map(DualAscentNodeState::primal_message).collect();
        let residuals = exec::collect_ordered(exec::map_mut(self.exec, &mut self.states, |j, s| {
            s.dual_step(if j > 0 { Some(&primals[j - 1]) } else { None })
        }))?;
        self.messages += dual_ascent::message_schedule(self.line.len()).len();

        let max_flow = self.states.iter().map(|s| s.q.abs()).fold(0.0, f64::max);
        if !max_flow.is_finite() || max_flow > self.guard {
            return Err(Error::Diverged { iteration: k, max_flow, guard: self.guard });
        }
        Ok(residuals.iter().copied().fold(0.0, f64::max))
    }

    /// Injections (kVAr) implied by the current flows.
    pub fn injections(&self) -> Vec<f64> {
        self.line.injections(&dual_ascent::flows(&self.states))
    }
}

/// Runs one algorithm to convergence or `max_iters`.
pub fn run(feeder: &Feeder, config: &RunConfig, oracle: Option<&ControlVector>) -> Result<RunOutcome> {
    config.validate()?;
    if let Some(o) = oracle {
        o.check_len(feeder)?;
    }
    let line = Line::new(feeder);
    let mut rec = Recorder::new(&line, oracle, config.stride());
    match config.algorithm {
        Algorithm::None | Algorithm::Local => {
            let control = match config.algorithm {
                Algorithm::Local => local_control(feeder),
                _ => ControlVector::zeros(feeder.len()),
            };
            let q_g: Vec<f64> = control.q_g.iter().copied().map(to_kvar).collect();
            rec.observe(0, &q_g, 0.0, true);
            Ok(RunOutcome { control, trace: rec.trace, converged: true, iterations: 0, messages: 0 })
        }
        Algorithm::DualAscent => run_dual_ascent(&line, config, rec),
        Algorithm::Admm | Algorithm::AdmmNov => {
            let variant = if config.algorithm == Algorithm::Admm { Variant::Full } else { Variant::NoVoltage };
            if config.init == InitScheme::Hybrid && variant == Variant::Full {
                return hybrid_with(feeder, &line, config.warmup, config, rec);
            }
            let states = admm::init_states(&line, &local_kvar(feeder), config.init, penalty(&line, config));
            let mut net = AdmmNetwork::new(states, variant, config.exec);
            rec.observe(0, &net.injections(), 0.0, true);
            admm_rounds(&mut net, config, &mut rec, 0, config.max_iters, true)
                .map(|(k, converged)| finish(net, rec, k, converged))
        }
    }
}

/// Flow-only warm-up followed by the full variant with voltages reseeded from
/// the LinDistFlow solution of the warm-up injections.
pub fn hybrid_run(feeder: &Feeder, warmup_iters: usize, config: &RunConfig, oracle: Option<&ControlVector>) -> Result<RunOutcome> {
    config.validate()?;
    if let Some(o) = oracle {
        o.check_len(feeder)?;
    }
    let line = Line::new(feeder);
    let rec = Recorder::new(&line, oracle, config.stride());
    hybrid_with(feeder, &line, warmup_iters, config, rec)
}

fn hybrid_with(feeder: &Feeder, line: &Line, warmup: usize, config: &RunConfig, mut rec: Recorder) -> Result<RunOutcome> {
    let base = match config.init {
        InitScheme::Hybrid => InitScheme::NoOpt,
        other => other,
    };
    let states = admm::init_states(line, &local_kvar(feeder), base, penalty(line, config));
    let warmup = warmup.min(config.max_iters);
    let mut net = AdmmNetwork::new(states, Variant::NoVoltage, config.exec);
    rec.observe(0, &net.injections(), 0.0, true);
    admm_rounds(&mut net, config, &mut rec, 0, warmup, false)?;

    let q_g = net.injections();
    let u = line.voltage_offsets(&line.reactive_flows(&q_g));
    for (k, s) in net.states.iter_mut().enumerate() {
        s.reseed_voltages(u[k], u[k + 1]);
    }
    net.variant = Variant::Full;
    let (k, converged) = admm_rounds(&mut net, config, &mut rec, warmup, config.max_iters, true)?;
    Ok(finish(net, rec, k, converged))
}

fn finish(net: AdmmNetwork, mut rec: Recorder, k: usize, converged: bool) -> RunOutcome {
    let q_g = net.injections();
    let residual: f64 = net.states.iter().map(|s| s.consensus_gap(net.variant)).sum();
    rec.observe(k, &q_g, residual, true);
    RunOutcome { control: to_control(&q_g), trace: rec.trace, converged, iterations: k, messages: net.messages }
}

fn local_kvar(feeder: &Feeder) -> Vec<f64> {
    local_control(feeder).q_g.into_iter().map(to_kvar).collect()
}

fn penalty(line: &Line, config: &RunConfig) -> Penalty {
    let mut p = Penalty::with_rho(config.rho.unwrap_or(Penalty::default_for(line).rho_q));
    if let Some(rho_u) = config.rho_u {
        p.rho_u = rho_u;
    }
    p
}

/// Runs rounds `start+1..=end`, returning the last round and whether the
/// stop rule fired. With `stop` set, returns once both the consensus residual
/// and the change in shared values fall below `stop_tol`, or once the oracle
/// target is met.
fn admm_rounds(
    net: &mut AdmmNetwork,
    config: &RunConfig,
    rec: &mut Recorder,
    start: usize,
    end: usize,
    stop: bool,
) -> Result<(usize, bool)> {
    let mut converged = false;
    let mut last = start;
    for k in start + 1..=end {
        last = k;
        let r = net.round()?;
        converged = r.residual < config.stop_tol && r.change < config.stop_tol;
        let d = rec.observe(k, &net.injections(), r.residual, false);
        let hit = config.target_deviation.is_some_and(|t| d.is_some_and(|d| d <= t));
        if stop && (converged || hit) {
            break;
        }
    }
    Ok((last, converged))
}

fn run_dual_ascent(line: &Line, config: &RunConfig, mut rec: Recorder) -> Result<RunOutcome> {
    if !matches!(config.init, InitScheme::ZeroQ) {
        return Err(Error::InvalidConfig("dual ascent supports only zero initialization".into()));
    }
    let alpha = config.alpha.unwrap_or_else(|| dual_ascent::default_alpha(line));
    let mut net = DualAscentNetwork::new(line, alpha, config.exec);
    rec.observe(0, &net.injections(), 0.0, true);
    let mut converged = false;
    let mut residual = 0.0;
    let mut k = 0;
    while k < config.max_iters {
        k += 1;
        residual = net.round(k)?;
        converged = residual < config.stop_tol;
        let d = rec.observe(k, &net.injections(), residual, converged);
        if converged || config.target_deviation.is_some_and(|t| d.is_some_and(|d| d <= t)) {
            break;
        }
    }
    let q_g = net.injections();
    rec.observe(k, &q_g, residual, true);
    Ok(RunOutcome { control: to_control(&q_g), trace: rec.trace, converged, iterations: k, messages: net.messages })
}
