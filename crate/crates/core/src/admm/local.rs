//! Exact solution of one node's ADMM minimization step.
//!
//! The voltage copy `U+` is eliminated through the linear drop equation
//! `U+ = U- - gamma - beta Q-`, leaving at most three unknowns `(Q-, Q+, U-)`
//! under two two-sided constraints: inverter capacity on `Q+ - Q- + q_c` and
//! the voltage window on `U+`. Each of the nine (capacity x voltage) active-set
//! combinations gives a small KKT linear system; the unique combination that is
//! primal feasible with nonnegative multipliers is the minimizer.

use super::Variant;

/// Everything a node needs for its local solve, in internal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalProblem {
    /// Loss weight `r_{j-1} / V0^2` on `(Q-)^2`.
    pub loss_weight: f64,
    pub rho_q: f64,
    pub rho_u: f64,
    /// `DROP * x_{j-1}`.
    pub beta: f64,
    /// `DROP * r_{j-1} * P_{j-1}`.
    pub gamma: f64,
    pub q_c: f64,
    pub s_tilde: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// `false` for node 1, whose `U-` is pinned to the substation's zero.
    pub has_u_minus: bool,
    /// Global values `(Q_{j-1}, Q_j, U_{j-1}, U_j)`.
    pub global: [f64; 4],
    /// Multipliers `(lambda Q-, lambda Q+, lambda U-, lambda U+)`.
    pub lambda: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSolution {
    pub q_minus: f64,
    pub q_plus: f64,
    pub u_minus: f64,
    pub u_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalError {
    NoValidActiveSet,
    InfeasibleNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Free,
    Upper,
    Lower,
}

const COMBOS: [(Side, Side); 9] = [
    (Side::Free, Side::Free),
    (Side::Upper, Side::Free),
    (Side::Lower, Side::Free),
    (Side::Free, Side::Upper),
    (Side::Free, Side::Lower),
    (Side::Upper, Side::Upper),
    (Side::Upper, Side::Lower),
    (Side::Lower, Side::Upper),
    (Side::Lower, Side::Lower),
];

const QM: usize = 0;
const QP: usize = 1;
const UM: usize = 2;

impl LocalProblem {
    /// Value of the node's augmented Lagrangian at a point.
    pub fn lagrangian(&self, s: &LocalSolution, variant: Variant) -> f64 {
        let [gqm, gqp, gum, gup] = self.global;
        let [lqm, lqp, lum, lup] = self.lambda;
        let mut v = self.loss_weight * s.q_minus * s.q_minus
            + 0.5 * self.rho_q * ((s.q_plus - gqp).powi(2) + (s.q_minus - gqm).powi(2))
            + lqp * (s.q_plus - gqp)
            + lqm * (s.q_minus - gqm);
        if variant == Variant::Full {
            v += 0.5 * self.rho_u * ((s.u_plus - gup).powi(2) + (s.u_minus - gum).powi(2))
                + lup * (s.u_plus - gup)
                + lum * (s.u_minus - gum);
        }
        v
    }

    /// `U+` implied by the drop equation.
    pub fn u_plus(&self, q_minus: f64, u_minus: f64) -> f64 {
        u_minus - self.gamma - self.beta * q_minus
    }

    fn dims(&self, variant: Variant) -> usize {
        if variant == Variant::Full && self.has_u_minus {
            3
        } else {
            2
        }
    }

    /// Quadratic model `1/2 z^T H z + f^T z` over `(Q-, Q+, [U-])`.
    fn quadratic(&self, variant: Variant) -> ([[f64; 3]; 3], [f64; 3], [f64; 3]) {
        let [gqm, gqp, gum, gup] = self.global;
        let [lqm, lqp, lum, lup] = self.lambda;
        let mut h = [[0.0; 3]; 3];
        let mut f = [0.0; 3];
        h[QM][QM] = 2.0 * self.loss_weight + self.rho_q;
        h[QP][QP] = self.rho_q;
        f[QM] = -self.rho_q * gqm + lqm;
        f[QP] = -self.rho_q * gqp + lqp;
        // U+ = w^T z - gamma
        let mut w = [-self.beta, 0.0, 0.0];
        if variant == Variant::Full {
            if self.has_u_minus {
                w[UM] = 1.0;
                h[UM][UM] += self.rho_u;
                f[UM] += -self.rho_u * gum + lum;
            }
            let shift = -self.rho_u * (self.gamma + gup) + lup;
            for a in 0..3 {
                f[a] += shift * w[a];
                for b in 0..3 {
                    h[a][b] += self.rho_u * w[a] * w[b];
                }
            }
        }
        (h, f, w)
    }
}

/// Rows `a^T z <= b` for (capacity upper, capacity lower, voltage upper, voltage lower).
fn constraint_rows(p: &LocalProblem, w: [f64; 3]) -> [([f64; 3], f64); 4] {
    [
        ([-1.0, 1.0, 0.0], p.s_tilde - p.q_c),
        ([1.0, -1.0, 0.0], p.s_tilde + p.q_c),
        (w, p.u_max + p.gamma),
        ([-w[0], -w[1], -w[2]], -(p.u_min + p.gamma)),
    ]
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N], size: usize) -> Option<[f64; N]> {
    let scale = a.iter().take(size).flat_map(|r| r.iter().take(size)).fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..size {
        let piv = (col..size).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..size {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..size {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = [0.0; N];
    for row in (0..size).rev() {
        let mut acc = b[row];
        for k in row + 1..size {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

pub fn local_minimize(p: &LocalProblem, variant: Variant) -> Result<LocalSolution, LocalError> {
    let dims = p.dims(variant);
    let (h, f, w) = p.quadratic(variant);
    let rows = constraint_rows(p, w);
    let with_voltage = variant == Variant::Full;

    if with_voltage && dims == 2 && p.beta == 0.0 {
        let u = -p.gamma;
        if u > p.u_max || u < p.u_min {
            return Err(LocalError::InfeasibleNode);
        }
    }

    let grad_scale = 1.0 + f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut fallback: Option<([f64; 3], f64)> = None;

    for &(cap, volt) in COMBOS.iter() {
        if !with_voltage && volt != Side::Free {
            continue;
        }
        let mut active: [usize; 2] = [0; 2];
        let mut na = 0;
        match cap {
            Side::Upper => { active[na] = 0; na += 1; }
            Side::Lower => { active[na] = 1; na += 1; }
            Side::Free => {}
        }
        match volt {
            Side::Upper => { active[na] = 2; na += 1; }
            Side::Lower => { active[na] = 3; na += 1; }
            Side::Free => {}
        }
        let size = dims + na;
        let mut kkt = [[0.0; 5]; 5];
        let mut rhs = [0.0; 5];
        for a in 0..dims {
            for b in 0..dims {
                kkt[a][b] = h[a][b];
            }
            rhs[a] = -f[a];
        }
        for (i, &c) in active[..na].iter().enumerate() {
            let (row, bound) = rows[c];
            for a in 0..dims {
                kkt[a][dims + i] = row[a];
                kkt[dims + i][a] = row[a];
            }
            rhs[dims + i] = bound;
        }
        let Some(sol) = solve_dense(kkt, rhs, size) else { continue };
        let mut z = [0.0; 3];
        z[..dims].copy_from_slice(&sol[..dims]);

        let mut worst_violation: f64 = 0.0;
        let n_rows = if with_voltage { 4 } else { 2 };
        for (row, bound) in rows.iter().take(n_rows) {
            let lhs: f64 = (0..dims).map(|a| row[a] * z[a]).sum();
            worst_violation = worst_violation.max((lhs - bound) / (1.0 + bound.abs()));
        }
        let min_mult = sol[dims..size].iter().fold(0.0f64, |m, v| m.min(*v));
        let badness = worst_violation.max(-min_mult / grad_scale);
        if worst_violation <= 1e-11 && min_mult >= -1e-11 * grad_scale {
            return Ok(finish(p, z, dims));
        }
        if fallback.is_none_or(|(_, b)| badness < b) {
            fallback = Some((z, badness));
        }
    }

    // near-degenerate corners can miss the strict test by rounding
    match fallback {
        Some((z, badness)) if badness <= 1e-8 => Ok(finish(p, z, dims)),
        _ => Err(LocalError::NoValidActiveSet),
    }
}

fn finish(p: &LocalProblem, z: [f64; 3], dims: usize) -> LocalSolution {
    let u_minus = if dims == 3 { z[UM] } else if p.has_u_minus { p.global[2] } else { 0.0 };
    LocalSolution { q_minus: z[QM], q_plus: z[QP], u_minus, u_plus: p.u_plus(z[QM], u_minus) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> LocalProblem {
        LocalProblem {
            loss_weight: 0.0,
            rho_q: 1.0 / 51.84,
            rho_u: 1.0 / 51.84,
            beta: 0.02 * 0.095,
            gamma: 0.02 * 0.0825 * 100.0,
            q_c: 0.3,
            s_tilde: 0.5,
            u_min: -50.544,
            u_max: 53.136,
            has_u_minus: true,
            global: [1.0, 0.8, -2.0, 0.0],
            lambda: [0.0; 4],
        }
    }

    #[test]
    fn consistent_interior_globals_are_a_fixed_point() {
        let mut p = base();
        // U_j consistent with the drop equation
        p.global[3] = p.u_plus(p.global[0], p.global[2]);
        for variant in [Variant::Full, Variant::NoVoltage] {
            let s = local_minimize(&p, variant).unwrap();
            assert!((s.q_minus - 1.0).abs() < 1e-12);
            assert!((s.q_plus - 0.8).abs() < 1e-12);
            if variant == Variant::Full {
                assert!((s.u_minus + 2.0).abs() < 1e-12);
                assert!((s.u_plus - p.global[3]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collapsed_box_forces_equality() {
        let mut p = base();
        p.s_tilde = 0.0;
        p.loss_weight = 0.0825 / 51.84;
        let s = local_minimize(&p, Variant::NoVoltage).unwrap();
        assert!((s.q_plus - s.q_minus + p.q_c).abs() < 1e-12);
        // closed form: minimize a m^2 + rho/2 (m - q_c - Qp)^2 + rho/2 (m - Qm)^2 over m = Q-
        let a = p.loss_weight;
        let rho = p.rho_q;
        let m = rho * (p.global[1] + p.q_c + p.global[0]) / (2.0 * a + 2.0 * rho);
        assert!((s.q_minus - m).abs() < 1e-12);
    }

    #[test]
    fn voltage_window_clips_u_plus() {
        let mut p = base();
        p.global[3] = 60.0;
        p.global[2] = 60.0;
        let s = local_minimize(&p, Variant::Full).unwrap();
        assert!(s.u_plus <= p.u_max + 1e-9);
        assert!((s.u_plus - p.u_plus(s.q_minus, s.u_minus)).abs() == 0.0);
    }

    #[test]
    fn first_node_without_reactance_outside_window() {
        let mut p = base();
        p.has_u_minus = false;
        p.beta = 0.0;
        p.gamma = 100.0;
        assert_eq!(local_minimize(&p, Variant::Full), Err(LocalError::InfeasibleNode));
        assert!(local_minimize(&p, Variant::NoVoltage).is_ok());
    }
}
