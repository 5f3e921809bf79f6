//! Shared helpers for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voltvar_core::admm::local::{LocalProblem, LocalSolution};
use voltvar_core::admm::Variant;
use voltvar_core::cases::{generate_case, CaseId};
use voltvar_core::feeder::{FeederParams, NodeSpec};
use voltvar_core::units::DROP;
use voltvar_core::Feeder;

/// Projected-gradient reference minimizer for one node's ADMM step,
/// independent of the active-set solver.
///
/// Works in coordinates where the feasible set is a box: `(Q-, g, U+)` with
/// `g = Q+ - Q- + q_c`. For node 1 (no `U-`) the voltage window becomes a box
/// on `Q-` directly.
pub fn reference_minimize(p: &LocalProblem, variant: Variant, iters: usize) -> LocalSolution {
    let full = variant == Variant::Full;
    let three = full && p.has_u_minus;
    let to_point = |y: [f64; 3]| -> LocalSolution {
        let q_minus = y[0];
        let q_plus = y[1] + q_minus - p.q_c;
        if three {
            let u_plus = y[2];
            let u_minus = u_plus + p.gamma + p.beta * q_minus;
            LocalSolution { q_minus, q_plus, u_minus, u_plus }
        } else {
            let u_minus = if p.has_u_minus { p.global[2] } else { 0.0 };
            LocalSolution { q_minus, q_plus, u_minus, u_plus: p.u_plus(q_minus, u_minus) }
        }
    };
    let mut lo = [f64::NEG_INFINITY, -p.s_tilde, f64::NEG_INFINITY];
    let mut hi = [f64::INFINITY, p.s_tilde, f64::INFINITY];
    if three {
        lo[2] = p.u_min;
        hi[2] = p.u_max;
    } else if full && p.beta > 0.0 {
        lo[0] = (-p.gamma - p.u_max) / p.beta;
        hi[0] = (-p.gamma - p.u_min) / p.beta;
    }
    let dims = if three { 3 } else { 2 };
    let obj = |y: [f64; 3]| p.lagrangian(&to_point(y), variant);
        let base = [0.0; 3];
    let f0 = obj(base);
    let mut g = [0.0; 3];
    let mut h = [[0.0; 3]; 3];
    let e = |i: usize, s: f64| {
        let mut y = [0.0; 3];
        y[i] = s;
        y
    };
    for i in 0..dims {
        let fp = obj(e(i, 1.0));
        let fm = obj(e(i, -1.0));
        g[i] = 0.5 * (fp - fm);
        h[i][i] = fp + fm - 2.0 * f0;
    }
    for i in 0..dims {
        for j in 0..dims {
            if i != j {
                let mut y = [0.0; 3];
                y[i] = 1.0;
                y[j] = 1.0;
                h[i][j] = obj(y) - f0 - g[i] - g[j] - 0.5 * (h[i][i] + h[j][j]);
            }
        }
    }
    // diagonal preconditioning keeps the box projection exact
    let d: Vec<f64> = (0..dims).map(|i| h[i][i].max(1e-300)).collect();
    let lmax = {
        let mut m: f64 = 0.0;
        for i in 0..dims {
            let row: f64 = (0..dims).map(|j| h[i][j].abs() / (d[i] * d[j]).sqrt()).sum();
            m = m.max(row);
        }
        m
    };
    let clamp = |y: &mut [f64; 3]| {
        for i in 0..dims {
            y[i] = y[i].clamp(lo[i], hi[i]);
        }
    };
    let grad = |y: &[f64; 3]| {
        let mut out = [0.0; 3];
        for i in 0..dims {
            out[i] = g[i] + (0..dims).map(|j| h[i][j] * y[j]).sum::<f64>();
        }
        out
    };
    let mut y = [0.0; 3];
    for i in 0..dims {
        y[i] = if lo[i].is_finite() && hi[i].is_finite() { 0.5 * (lo[i] + hi[i]) } else { lo[i].max(hi[i].min(0.0)) };
    }
    clamp(&mut y);
    let mut y_prev = y;
    let mut t = 1.0f64;
    for _ in 0..iters {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        let mut v = [0.0; 3];
        for i in 0..dims {
            v[i] = y[i] + mom * (y[i] - y_prev[i]);
        }
        let gv = grad(&v);
        let mut next = [0.0; 3];
        for i in 0..dims {
            next[i] = v[i] - gv[i] / (lmax * d[i]);
        }
        clamp(&mut next);
        if obj(next) > obj(y) {
            // adaptive restart
            t = 1.0;
            y_prev = y;
            continue;
        }
        y_prev = y;
        y = next;
        t = t_next;
    }
    to_point(y)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random local problem on realistic internal-unit scales.
pub fn random_problem(rng: &mut ChaCha8Rng) -> LocalProblem {
    let v0_sq = 51.84;
    let r = rng.gen_range(0.01..0.5);
    let x = rng.gen_range(0.01..0.5);
    let rho_q = 10f64.powf(rng.gen_range(-1.0..1.0)) / v0_sq;
    let rho_u = rho_q * 10f64.powf(rng.gen_range(0.0..3.0));
    let s_tilde = if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.0..8.0) };
    let u_max = v0_sq * 0.1025 * 1e6 / 1e5;
    let u_min = -v0_sq * 0.0975 * 1e6 / 1e5;
    let q = |rng: &mut ChaCha8Rng| rng.gen_range(-150.0..150.0);
    let u = |rng: &mut ChaCha8Rng| rng.gen_range(-80.0..80.0);
    let global = [q(rng), q(rng), u(rng), u(rng)];
    let lambda = [
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-20.0..20.0),
        rng.gen_range(-20.0..20.0),
    ];
    LocalProblem {
        loss_weight: r / v0_sq,
        rho_q,
        rho_u,
        beta: DROP * x,
        gamma: DROP * r * rng.gen_range(-800.0..800.0),
        q_c: rng.gen_range(0.0..3.0),
        s_tilde,
        u_min,
        u_max,
        has_u_minus: !rng.gen_bool(0.2),
        global,
        lambda,
    }
}

/// Checks the node constraints on a local solution, returning the worst
/// violation.
pub fn node_violation(p: &LocalProblem, s: &LocalSolution, variant: Variant) -> f64 {
    let cap = (s.q_plus - s.q_minus + p.q_c).abs() - p.s_tilde;
    let mut worst = cap.max(0.0);
    if variant == Variant::Full {
        worst = worst.max(s.u_plus - p.u_max).max(p.u_min - s.u_plus);
        let drop = s.u_minus - p.gamma - p.beta * s.q_minus;
        worst = worst.max((s.u_plus - drop).abs());
        if !p.has_u_minus {
            worst = worst.max(s.u_minus.abs());
        }
    }
    worst
}

/// A small random feeder with `n` nodes.
pub fn random_feeder(rng: &mut ChaCha8Rng, n: usize) -> Feeder {
    let nodes = (0..n)
        .map(|_| {
            let p_c = rng.gen_range(0.0..6000.0);
            let pv = rng.gen_bool(0.7);
            let s = if pv { rng.gen_range(500.0..4000.0) } else { 0.0 };
            let p_g = if pv { rng.gen_range(0.0..s) } else { 0.0 };
            NodeSpec {
                r: rng.gen_range(0.05..2.0),
                x: rng.gen_range(0.05..2.0),
                p_c,
                q_c: p_c * rng.gen_range(0.0..1.0),
                p_g,
                s,
            }
        })
        .collect();
    Feeder::new(FeederParams { v0: 7200.0, epsilon: 0.05 }, nodes).unwrap()
}

pub fn case(id: u32, seed: u64) -> Feeder {
    generate_case(CaseId::new(id).unwrap(), seed)
}
