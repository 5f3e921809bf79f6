//! Goldfarb-Idnani dual active-set method for strictly convex QPs with a
//! diagonal Hessian:
//!
//! ```text
//! minimize  1/2 sum_i d_i x_i^2 + a^T x   subject to  c_k^T x >= b_k
//! ```
//!
//! Starts from the unconstrained minimizer and adds the most violated
//! constraint at each outer step, dropping constraints whose multipliers would
//! turn negative. The factorization `J = L^{-T} Q` and the upper-triangular `R`
//! are updated with Givens rotations, so each step costs O(n^2).

/// Inequality constraints `c_k^T x >= b_k`, evaluated lazily.
pub trait ConstraintSet {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes `c_k^T x - b_k` for every constraint.
    fn slacks(&self, x: &[f64], out: &mut [f64]);

    /// `c_k^T x - b_k` for a single constraint.
    fn slack(&self, k: usize, x: &[f64]) -> f64;

    /// Writes the dense normal `c_k`.
    fn normal(&self, k: usize, out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualActiveSetSolution {
    pub x: Vec<f64>,
    /// `(constraint index, multiplier)` for every active constraint.
    pub active: Vec<(usize, f64)>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualActiveSetError {
    /// No point satisfies the constraint together with the current active set.
    Infeasible { constraint: usize, slack: f64 },
    IterationLimit,
}

/// Column-major dense square matrix.
struct Square {
    n: usize,
    data: Vec<f64>,
}

impl Square {
    fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    #[inline]
    fn at(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.n + row]
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[col * self.n + row] = v;
    }

    fn col(&self, col: usize) -> &[f64] {
        &self.data[col * self.n..(col + 1) * self.n]
    }

    /// Replaces columns `(a, b)` with `(c a + s b, -s a + c b)`.
    fn rotate_cols(&mut self, a: usize, b: usize, c: f64, s: f64) {
        let n = self.n;
        for row in 0..n {
            let va = self.data[a * n + row];
            let vb = self.data[b * n + row];
            self.data[a * n + row] = c * va + s * vb;
            self.data[b * n + row] = -s * va + c * vb;
        }
    }
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

pub fn solve(
    hessian_diag: &[f64],
    linear: &[f64],
    constraints: &impl ConstraintSet,
    tol: f64,
) -> Result<DualActiveSetSolution, DualActiveSetError> {
    let n = hessian_diag.len();
    let m = constraints.len();
    assert_eq!(linear.len(), n);
    assert!(hessian_diag.iter().all(|d| *d > 0.0), "Hessian must be positive definite");

    let mut x: Vec<f64> = linear.iter().zip(hessian_diag).map(|(a, d)| -a / d).collect();
    let mut j = Square::zeros(n);
    for (i, d) in hessian_diag.iter().enumerate() {
        j.set(i, i, 1.0 / d.sqrt());
    }
    let mut r = Square::zeros(n);
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();

    let mut slacks = vec![0.0; m];
    let mut normal = vec![0.0; n];
    let mut dvec = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut rvec = vec![0.0; n];

    let max_iter = 50 * (n + m) + 100;
    let mut iterations = 0;

    loop {
        if m == 0 {
            break;
        }
        constraints.slacks(&x, &mut slacks);
        let (p, worst) = slacks
            .iter()
            .enumerate()
            .filter(|(k, _)| !active.contains(k))
            .fold((usize::MAX, f64::INFINITY), |acc, (k, &s)| if s < acc.1 { (k, s) } else { acc });
        if p == usize::MAX || worst >= -tol {
            break;
        }
        constraints.normal(p, &mut normal);
        let mut mult_p = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(DualActiveSetError::IterationLimit);
            }
            let q = active.len();
            for (i, d) in dvec.iter_mut().enumerate() {
                *d = j.col(i).iter().zip(&normal).map(|(a, b)| a * b).sum();
            }
            z.iter_mut().for_each(|v| *v = 0.0);
            for i in q..n {
                let di = dvec[i];
                if di != 0.0 {
                    for (zr, jr) in z.iter_mut().zip(j.col(i)) {
                        *zr += jr * di;
                    }
                }
            }
            for i in (0..q).rev() {
                let mut acc = dvec[i];
                for k in i + 1..q {
                    acc -= r.at(i, k) * rvec[k];
                }
                rvec[i] = acc / r.at(i, i);
            }

            let mut t1 = f64::INFINITY;
            let mut drop_at = usize::MAX;
            for i in 0..q {
                if rvec[i] > 0.0 {
                    let t = mult[i] / rvec[i];
                    if t < t1 {
                        t1 = t;
                        drop_at = i;
                    }
                }
            }
            let zn: f64 = z.iter().zip(&normal).map(|(a, b)| a * b).sum();
            let dn: f64 = dvec.iter().map(|v| v * v).sum();
            let slack_p = constraints.slack(p, &x);
            let t2 = if zn > 1e-14 * dn.max(f64::MIN_POSITIVE) { -slack_p / zn } else { f64::INFINITY };
            let t = t1.min(t2);

            if !t.is_finite() {
                return Err(DualActiveSetError::Infeasible { constraint: p, slack: slack_p });
            }

            for i in 0..q {
                mult[i] -= t * rvec[i];
            }
            mult_p += t;

            if t2.is_finite() {
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += t * zi;
                }
            }

            if t2.is_finite() && t2 <= t1 {
                // full step: p becomes active
                for i in (q + 1..n).rev() {
                    let (c, s, h) = givens(dvec[i - 1], dvec[i]);
                    if s != 0.0 {
                        dvec[i - 1] = h;
                        dvec[i] = 0.0;
                        j.rotate_cols(i - 1, i, c, s);
                    }
                }
                for i in 0..=q {
                    r.set(i, q, dvec[i]);
                }
                active.push(p);
                mult.push(mult_p);
                break;
            }

            // partial (or purely dual) step: drop the blocking constraint
            active.remove(drop_at);
            mult.remove(drop_at);
            for col in drop_at..q - 1 {
                for row in 0..=col + 1 {
                    r.set(row, col, r.at(row, col + 1));
                }
            }
            for row in 0..n {
                r.set(row, q - 1, 0.0);
            }
            for i in drop_at..q - 1 {
                let (c, s, h) = givens(r.at(i, i), r.at(i + 1, i));
                if s == 0.0 {
                    continue;
                }
                r.set(i, i, h);
                r.set(i + 1, i, 0.0);
                for col in i + 1..q - 1 {
                    let a = r.at(i, col);
                    let b = r.at(i + 1, col);
                    r.set(i, col, c * a + s * b);
                    r.set(i + 1, col, -s * a + c * b);
                }
                j.rotate_cols(i, i + 1, c, s);
            }
        }
    }

    Ok(DualActiveSetSolution { x, active: active.into_iter().zip(mult).collect(), iterations })
}

/// Constraints stored as dense rows; used by tests and small problems.
#[derive(Debug, Clone)]
pub struct DenseConstraints {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl ConstraintSet for DenseConstraints {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn slacks(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.slack(k, x);
        }
    }

    fn slack(&self, k: usize, x: &[f64]) -> f64 {
        self.rows[k].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.rhs[k]
    }

    fn normal(&self, k: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.rows[k]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_minimizer() {
        let cons = DenseConstraints { rows: vec![], rhs: vec![] };
        let sol = solve(&[2.0, 4.0], &[-2.0, 8.0], &cons, 1e-12).unwrap();
        assert_eq!(sol.x, vec![1.0, -2.0]);
    }

    #[test]
    fn single_active_bound() {
        // min 1/2 (x^2 + y^2) s.t. x + y >= 2  ->  (1, 1), multiplier 1
        let cons = DenseConstraints { rows: vec![vec![1.0, 1.0]], rhs: vec![2.0] };
        let sol = solve(&[1.0, 1.0], &[0.0, 0.0], &cons, 1e-12).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] - 1.0).abs() < 1e-12);
        assert_eq!(sol.active.len(), 1);
        assert!((sol.active[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constraint_gets_dropped() {
        // x >= 1 binds first, then x + y >= 3 with y <= 0.5 makes x >= 1 slack
        let cons = DenseConstraints {
            rows: vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, -1.0]],
            rhs: vec![1.0, 3.0, -0.5],
        };
        let sol = solve(&[1.0, 1.0], &[0.0, 0.0], &cons, 1e-12).unwrap();
        assert!((sol.x[0] - 2.5).abs() < 1e-10, "{:?}", sol.x);
        assert!((sol.x[1] - 0.5).abs() < 1e-10);
        assert!(sol.active.iter().all(|(k, _)| *k != 0));
    }

    #[test]
    fn detects_infeasibility() {
        let cons = DenseConstraints { rows: vec![vec![1.0], vec![-1.0]], rhs: vec![2.0, -1.0] };
        let err = solve(&[1.0], &[0.0], &cons, 1e-12).unwrap_err();
        assert!(matches!(err, DualActiveSetError::Infeasible { .. }));
    }

    #[test]
    fn equality_from_opposite_pair() {
        let cons = DenseConstraints { rows: vec![vec![1.0, -1.0], vec![-1.0, 1.0]], rhs: vec![1.0, -1.0] };
        let sol = solve(&[1.0, 1.0], &[0.0, 0.0], &cons, 1e-12).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-12 && (sol.x[1] + 0.5).abs() < 1e-12);
    }
}
