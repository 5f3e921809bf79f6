//! Exhaustive grid oracle for tiny feeders.
//!
//! Every injection `q_g[k]` ranges over `grid_points` evenly spaced values in
//! `[-s~_k, s~_k]`. Nodes `2..=n` are enumerated; node 1 only enters the loss
//! through `Q_0`, where the loss is a convex parabola, so its best grid value
//! inside the voltage-feasible interval is one of the two grid points bracketing
//! the parabola's vertex. The result is the exact minimum over the full grid.

use crate::error::{Error, Result};
use crate::feeder::{ControlVector, Feeder};
use crate::units::{self, Line, DROP};

use super::QpSolution;

pub const MAX_NODES: usize = 3;

pub fn brute_force_oracle(feeder: &Feeder, grid_points: usize, with_voltage: bool) -> Result<QpSolution> {
    let n = feeder.len();
    if n > MAX_NODES {
        return Err(Error::DimensionTooLarge { max: MAX_NODES, got: n });
    }
    if grid_points < 2 {
        return Err(Error::InvalidConfig("grid needs at least two points per axis".into()));
    }
    let line = Line::new(feeder);
    let grid = |k: usize, i: usize| -> f64 {
        let s = line.s_tilde[k];
        -s + 2.0 * s * i as f64 / (grid_points - 1) as f64
    };
    let u_real = line.voltage_offsets(&vec![0.0; n + 1]);
    let v0_sq = line.v0_sq();
    let feas_tol = 1e-12;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut q_g = vec![0.0; n];
    let mut q = vec![0.0; n + 1];
    let outer: usize = grid_points.pow((n - 1) as u32);

    for mut code in 0..outer {
        for k in 1..n {
            q_g[k] = grid(k, code % grid_points);
            code /= grid_points;
        }
        for k in (1..n).rev() {
            q[k] = q[k + 1] + line.q_c[k] - q_g[k];
        }
        // feasible interval for Q_0 from the voltage window
        let mut q0_lo = f64::NEG_INFINITY;
        let mut q0_hi = f64::INFINITY;
        let beta = DROP * line.x[0];
        if with_voltage {
            let mut tail = 0.0;
            let mut ok = true;
            for k in 0..n {
                if k >= 1 {
                    tail += DROP * line.x[k] * q[k];
                }
                let a = u_real[k + 1] - tail;
                if beta > 0.0 {
                    q0_lo = q0_lo.max((a - line.u_max) / beta);
                    q0_hi = q0_hi.min((a - line.u_min) / beta);
                } else if a > line.u_max + feas_tol || a < line.u_min - feas_tol {
                    ok = false;
                }
            }
            if !ok || q0_lo > q0_hi + feas_tol {
                continue;
            }
        }
        // Q_0 = q[1] + q_c[0] - g0, so the g0 interval is reversed
        let base = q[1] + line.q_c[0];
        let g_lo = base - q0_hi;
        let g_hi = base - q0_lo;
        let s0 = line.s_tilde[0];
        let step = 2.0 * s0 / (grid_points - 1) as f64;
        let (i_lo, i_hi) = if step == 0.0 {
            if g_lo <= feas_tol && g_hi >= -feas_tol {
                (0, 0)
            } else {
                continue;
            }
        } else {
            let lo = ((g_lo + s0) / step - feas_tol).ceil().max(0.0);
            let hi = ((g_hi + s0) / step + feas_tol).floor().min((grid_points - 1) as f64);
            if lo > hi {
                continue;
            }
            (lo as usize, hi as usize)
        };
        let vertex = if step == 0.0 { 0.0 } else { ((base + s0) / step).clamp(i_lo as f64, i_hi as f64) };
        let mut candidates = [vertex.floor() as usize, vertex.ceil() as usize];
        candidates.iter_mut().for_each(|c| *c = (*c).clamp(i_lo, i_hi));
        for &i in &candidates {
            q_g[0] = grid(0, i);
            q[0] = base - q_g[0];
            let loss: f64 = (0..n).map(|k| line.r[k] * (line.p_flow[k].powi(2) + q[k].powi(2)) / v0_sq).sum();
            if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                best = Some((loss, q_g.clone()));
            }
        }
    }

    let (objective, q_g) =
        best.ok_or_else(|| Error::Infeasible { constraint: "no feasible grid point".into() })?;
    let flows = line.reactive_flows(&q_g);
    Ok(QpSolution {
        q_opt: flows[..n].iter().map(|q| units::to_var(*q)).collect(),
        control: ControlVector::new(q_g.into_iter().map(units::to_var).collect()),
        objective,
        kkt_residual: f64::NAN,
        active_sets: Vec::new(),
    })
}
