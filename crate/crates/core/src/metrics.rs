//! Summary metrics over completed controls and runs.

use serde::{Deserialize, Serialize};

use crate::distflow::{self, normalized_min_max_voltage, solve_distflow};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::feeder::{ControlVector, Feeder};
use crate::lindistflow::{control_loss, LinFlowState};
use crate::simulator::{run, RunConfig, RunTrace};
use crate::units::{to_kvar, Line};

/// Mean absolute difference between two controls, kVAr.
pub fn deviation(control: &ControlVector, oracle: &ControlVector) -> Result<f64> {
    if control.len() != oracle.len() {
        return Err(Error::LengthMismatch { expected: oracle.len(), got: control.len() });
    }
    if control.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = control.q_g.iter().zip(&oracle.q_g).map(|(a, b)| (a - b).abs()).sum();
    Ok(to_kvar(sum / control.len() as f64))
}

/// The three controls a report compares.
#[derive(Debug, Clone, PartialEq)]
pub struct Controls {
    pub global: ControlVector,
    pub local: ControlVector,
    pub none: ControlVector,
}

/// Normalized voltage extrema over nodes `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageRange {
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeVoltages {
    pub lin: VoltageRange,
    pub df: VoltageRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub loss_ratio_lin_global: f64,
    pub loss_ratio_lin_local: f64,
    pub loss_ratio_df_global: f64,
    pub loss_ratio_df_local: f64,
    pub voltages_global: SchemeVoltages,
    pub voltages_local: SchemeVoltages,
    pub voltages_none: SchemeVoltages,
    /// `max_j |V_lin_j - V_df_j| / V0` under the global control.
    pub delta_v_max: f64,
}

struct SchemeEval {
    loss_lin: f64,
    loss_df: f64,
    voltages: SchemeVoltages,
    lin_v: Vec<f64>,
    df_v: Vec<f64>,
}

fn evaluate(feeder: &Feeder, control: &ControlVector) -> Result<SchemeEval> {
    let v0 = feeder.params().v0;
    let lin = LinFlowState::solve(feeder, control)?;
    let lin_v = lin.normalized_voltages(v0);
    let df = solve_distflow(feeder, control, distflow::DEFAULT_TOL, distflow::DEFAULT_MAX_SWEEPS)?;
    let (df_min, df_max) = normalized_min_max_voltage(&df, v0);
    let lin_range = VoltageRange {
        v_min: lin_v.iter().copied().fold(f64::INFINITY, f64::min),
        v_max: lin_v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(SchemeEval {
        loss_lin: control_loss(feeder, control)?,
        loss_df: df.loss,
        voltages: SchemeVoltages { lin: lin_range, df: VoltageRange { v_min: df_min, v_max: df_max } },
        lin_v,
        df_v: df.normalized_voltages(v0),
    })
}

/// Loss ratios against the uncontrolled feeder, voltage extrema for each
/// scheme, and the linear-vs-exact voltage gap under the global control.
pub fn case_report(feeder: &Feeder, controls: &Controls) -> Result<CaseReport> {
    let g = evaluate(feeder, &controls.global)?;
    let l = evaluate(feeder, &controls.local)?;
    let z = evaluate(feeder, &controls.none)?;
    let delta_v_max = g.lin_v.iter().zip(&g.df_v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(CaseReport {
        loss_ratio_lin_global: g.loss_lin / z.loss_lin,
        loss_ratio_lin_local: l.loss_lin / z.loss_lin,
        loss_ratio_df_global: g.loss_df / z.loss_df,
        loss_ratio_df_local: l.loss_df / z.loss_df,
        voltages_global: g.voltages,
        voltages_local: l.voltages,
        voltages_none: z.voltages,
        delta_v_max,
    })
}

/// Traces aligned on iteration number.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceComparison {
    pub labels: Vec<String>,
    /// `(k, d_k per label)`; `None` where a trace has no row at `k`.
    pub rows: Vec<(usize, Vec<Option<f64>>)>,
    /// First iteration reaching the threshold, per label.
    pub iterations_to_threshold: Vec<Option<usize>>,
    pub threshold: f64,
}

pub fn compare_traces(traces: &[(&str, &RunTrace)], threshold: f64) -> TraceComparison {
    let mut ks: Vec<usize> = traces.iter().flat_map(|(_, t)| t.rows.iter().map(|r| r.k)).collect();
    ks.sort_unstable();
    ks.dedup();
    let rows = ks
        .into_iter()
        .map(|k| {
            let vals = traces
                .iter()
                .map(|(_, t)| {
                    t.rows
                        .binary_search_by_key(&k, |r| r.k)
                        .ok()
                        .and_then(|i| t.rows[i].d_k)
                })
                .collect();
            (k, vals)
        })
        .collect();
    TraceComparison {
        labels: traces.iter().map(|(l, _)| l.to_string()).collect(),
        rows,
        iterations_to_threshold: traces.iter().map(|(_, t)| t.iterations_to(threshold)).collect(),
        threshold,
    }
}

impl TraceComparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (k, vals) in &self.rows {
            out.push_str(&k.to_string());
            for v in vals {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&format!("{v:e}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSweepRow {
    pub factor: f64,
    pub rho: f64,
    pub iterations_to_threshold: Option<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub final_deviation: Option<f64>,
}

/// Runs `config` once per factor with `rho = factor / V0^2`, in parallel over
/// factors when `mode` allows it.
pub fn rho_sweep(
    feeder: &Feeder,
    factors: &[f64],
    config: &RunConfig,
    oracle: Option<&ControlVector>,
    threshold: f64,
    mode: ExecMode,
) -> Result<Vec<RhoSweepRow>> {
    let base = 1.0 / Line::new(feeder).v0_sq();
    let results = exec::map(mode, factors, |&factor| {
        let mut cfg = config.clone();
        cfg.rho = Some(factor * base);
        cfg.rho_u = None;
        cfg.exec = ExecMode::Sequential;
        let out = run(feeder, &cfg, oracle)?;
        Ok(RhoSweepRow {
            factor,
            rho: factor * base,
            iterations_to_threshold: out.trace.iterations_to(threshold),
            iterations: out.iterations,
            converged: out.converged,
            final_deviation: out.trace.last().and_then(|r| r.d_k),
        })
    });
    exec::collect_ordered(results)
}
