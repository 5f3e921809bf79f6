//! Linearized branch-flow model.
//!
//! Flows are suffix sums of net consumption (the boundary `P_n = Q_n = 0` fixes
//! them without iteration); squared-voltage offsets follow from a forward
//! recursion starting at `U_0 = 0`. Losses do not feed back into the flows.

use crate::error::Result;
use crate::feeder::{ControlVector, Feeder};
use crate::units;

/// Flows and squared-voltage offsets of the linear model, SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct LinFlowState {
    /// `P_0..P_n` (W).
    pub p_flow: Vec<f64>,
    /// `Q_0..Q_n` (VAr).
    pub q_flow: Vec<f64>,
    /// `U_0..U_n` (V^2).
    pub u: Vec<f64>,
}

impl LinFlowState {
    pub fn solve(feeder: &Feeder, control: &ControlVector) -> Result<Self> {
        let p_flow = real_flows(feeder);
        let q_flow = reactive_flows(feeder, control)?;
        let u = voltage_offsets(feeder, &p_flow, &q_flow);
        Ok(Self { p_flow, q_flow, u })
    }

    /// Normalized voltage magnitudes `sqrt(V0^2 + U_j) / V0` for nodes `1..=n`.
    pub fn normalized_voltages(&self, v0: f64) -> Vec<f64> {
        let v0_sq = v0 * v0;
        self.u[1..].iter().map(|u| ((v0_sq + u).max(0.0)).sqrt() / v0).collect()
    }
}

/// Real branch flows `P_0..P_n` (W): `P_j = sum_{i > j} (p_c_i - p_g_i)`.
pub fn real_flows(feeder: &Feeder) -> Vec<f64> {
    let nodes = feeder.nodes();
    let n = nodes.len();
    let mut p = vec![0.0; n + 1];
    for k in (0..n).rev() {
        p[k] = p[k + 1] + nodes[k].p_c - nodes[k].p_g;
    }
    p
}

/// Reactive branch flows `Q_0..Q_n` (VAr) for the given injections.
pub fn reactive_flows(feeder: &Feeder, control: &ControlVector) -> Result<Vec<f64>> {
    control.check_len(feeder)?;
    let nodes = feeder.nodes();
    let n = nodes.len();
    let mut q = vec![0.0; n + 1];
    for k in (0..n).rev() {
        q[k] = q[k + 1] + nodes[k].q_c - control.q_g[k];
    }
    Ok(q)
}

/// Squared-voltage offsets `U_0..U_n` (V^2): `U_{j+1} = U_j - 2 (r_j P_j + x_j Q_j)`.
pub fn voltage_offsets(feeder: &Feeder, p_flow: &[f64], q_flow: &[f64]) -> Vec<f64> {
    let nodes = feeder.nodes();
    let mut u = vec![0.0; nodes.len() + 1];
    for (k, node) in nodes.iter().enumerate() {
        u[k + 1] = u[k] - 2.0 * (node.r * p_flow[k] + node.x * q_flow[k]);
    }
    u
}

/// Linear loss `sum_j r_j (P_j^2 + Q_j^2) / V0^2` in watts.
pub fn linear_loss(feeder: &Feeder, p_flow: &[f64], q_flow: &[f64]) -> f64 {
    let v0_sq = feeder.params().v0.powi(2);
    feeder
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, node)| node.r * (p_flow[k].powi(2) + q_flow[k].powi(2)) / v0_sq)
        .sum()
}

/// Linear loss of a control vector, in watts.
pub fn control_loss(feeder: &Feeder, control: &ControlVector) -> Result<f64> {
    let state = LinFlowState::solve(feeder, control)?;
    Ok(linear_loss(feeder, &state.p_flow, &state.q_flow))
}

/// Signed worst-case constraint violations in internal units.
///
/// A value `<= 0` means the corresponding constraint family is satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// `max_j |q_g_j| - s~_j` in kVAr.
    pub capacity_violation: f64,
    /// Largest distance of any `U_j` outside `[u_min, u_max]`, in units of 1e5 V^2.
    /// Negative values give the smallest margin to either bound.
    pub voltage_violation: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.capacity_violation <= tol && self.voltage_violation <= tol
    }
}

pub fn check_feasibility(feeder: &Feeder, control: &ControlVector) -> Result<FeasibilityReport> {
    let state = LinFlowState::solve(feeder, control)?;
    let capacity_violation = control
        .q_g
        .iter()
        .zip(feeder.effective_capacities())
        .map(|(q, cap)| units::to_kvar(q.abs() - cap))
        .fold(f64::NEG_INFINITY, f64::max);
    let (u_min, u_max) = feeder.voltage_bounds();
    let voltage_violation = state.u[1..]
        .iter()
        .map(|&u| units::to_u_internal((u - u_max).max(u_min - u)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FeasibilityReport { capacity_violation, voltage_violation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::{FeederParams, NodeSpec};
    use proptest::prelude::*;

    const PARAMS: FeederParams = FeederParams { v0: 7200.0, epsilon: 0.05 };

    fn node(p_c: f64, q_c: f64, p_g: f64, s: f64) -> NodeSpec {
        NodeSpec { r: 0.0825, x: 0.095, p_c, q_c, p_g, s }
    }

    fn feeder(nodes: Vec<NodeSpec>) -> Feeder {
        Feeder::new(PARAMS, nodes).unwrap()
    }

    #[test]
    fn real_flow_examples() {
        let f = feeder(vec![node(1000.0, 0.0, 0.0, 0.0), node(2000.0, 0.0, 0.0, 0.0)]);
        assert_eq!(real_flows(&f), vec![3000.0, 2000.0, 0.0]);
        let f = feeder(vec![node(700.0, 0.0, 700.0, 800.0), node(300.0, 0.0, 300.0, 400.0)]);
        assert!(real_flows(&f).iter().all(|p| *p == 0.0));
        let f = feeder(vec![node(500.0, 0.0, 2000.0, 2500.0)]);
        assert_eq!(real_flows(&f), vec![-1500.0, 0.0]);
    }

    #[test]
    fn reactive_flow_examples() {
        let f = feeder(vec![node(0.0, 300.0, 0.0, 1000.0), node(0.0, 200.0, 0.0, 1000.0)]);
        let q = reactive_flows(&f, &ControlVector::new(vec![300.0, 200.0])).unwrap();
        assert!(q.iter().all(|v| *v == 0.0));
        let f = feeder(vec![node(0.0, 500.0, 0.0, 0.0)]);
        assert_eq!(reactive_flows(&f, &ControlVector::zeros(1)).unwrap(), vec![500.0, 0.0]);
        assert!(reactive_flows(&f, &ControlVector::zeros(2)).is_err());
    }

    #[test]
    fn voltage_and_loss_examples() {
        let f = feeder(vec![node(3000.0, 0.0, 0.0, 0.0)]);
        assert_eq!(voltage_offsets(&f, &[0.0, 0.0], &[0.0, 0.0]), vec![0.0, 0.0]);
        let u = voltage_offsets(&f, &[3000.0, 0.0], &[0.0, 0.0]);
        assert!((u[1] + 495.0).abs() < 1e-9);
        assert_eq!(linear_loss(&f, &[0.0, 0.0], &[0.0, 0.0]), 0.0);
        let loss = linear_loss(&f, &[3000.0, 0.0], &[0.0, 0.0]);
        assert!((loss - 0.0825 * 9e6 / 5.184e7).abs() < 1e-15);
        assert!((loss - 0.014_323).abs() < 1e-5);
    }

    #[test]
    fn state_satisfies_recursion() {
        let f = feeder((0..20).map(|k| node(100.0 * k as f64, 30.0 * k as f64, 500.0, 800.0)).collect());
        let s = LinFlowState::solve(&f, &ControlVector::new(vec![50.0; 20])).unwrap();
        assert_eq!(s.p_flow[20], 0.0);
        assert_eq!(s.q_flow[20], 0.0);
        assert_eq!(s.u[0], 0.0);
        for (k, nd) in f.nodes().iter().enumerate() {
            let expect = s.u[k] - 2.0 * (nd.r * s.p_flow[k] + nd.x * s.q_flow[k]);
            assert!((s.u[k + 1] - expect).abs() <= 1e-9 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn feasibility_report_signs() {
        let f = feeder(vec![node(1000.0, 300.0, 1000.0, 1100.0)]);
        let r = check_feasibility(&f, &ControlVector::zeros(1)).unwrap();
        assert!(r.capacity_violation < 0.0);
        assert!(r.voltage_violation < 0.0);
        let r = check_feasibility(&f, &ControlVector::new(vec![500.0])).unwrap();
        assert!(r.capacity_violation > 0.0);
    }

    fn random_feeder() -> impl Strategy<Value = (Feeder, Vec<f64>, Vec<f64>, f64)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec((0.0..4000.0f64, 0.0..1000.0f64, 0.0..1000.0f64), n),
                prop::collection::vec(-500.0..500.0f64, n),
                prop::collection::vec(-500.0..500.0f64, n),
                0.0..1.0f64,
            )
                .prop_map(|(loads, a, b, t)| {
                    let nodes = loads.into_iter().map(|(p, q, g)| node(p, q, g, 2000.0)).collect();
                    (feeder(nodes), a, b, t)
                })
        })
    }

    proptest! {
        #[test]
        fn reactive_flows_are_affine((f, a, b, t) in random_feeder()) {
            let qa = reactive_flows(&f, &ControlVector::new(a.clone())).unwrap();
            let qb = reactive_flows(&f, &ControlVector::new(b.clone())).unwrap();
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let qm = reactive_flows(&f, &ControlVector::new(mix)).unwrap();
            for k in 0..qm.len() {
                let expect = t * qa[k] + (1.0 - t) * qb[k];
                prop_assert!((qm[k] - expect).abs() <= 1e-8 * (1.0 + expect.abs()));
            }
        }

        #[test]
        fn loss_is_convex_in_control((f, a, b, _t) in random_feeder()) {
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let la = control_loss(&f, &ControlVector::new(a)).unwrap();
            let lb = control_loss(&f, &ControlVector::new(b)).unwrap();
            let lm = control_loss(&f, &ControlVector::new(mid)).unwrap();
            prop_assert!(lm <= 0.5 * (la + lb) + 1e-12 * (1.0 + la + lb));
        }

        #[test]
        fn injections_recovered_from_flows((f, a, _b, _t) in random_feeder()) {
            let q = reactive_flows(&f, &ControlVector::new(a.clone())).unwrap();
            for (k, nd) in f.nodes().iter().enumerate() {
                let rec = q[k + 1] - q[k] + nd.q_c;
                prop_assert!((rec - a[k]).abs() <= 1e-9 * (1.0 + q[k].abs()));
            }
        }

        #[test]
        fn voltage_offsets_superpose((f, a, b, _t) in random_feeder()) {
            let p = real_flows(&f);
            let qa = reactive_flows(&f, &ControlVector::new(a)).unwrap();
            let qb = reactive_flows(&f, &ControlVector::new(b)).unwrap();
            let zero_p = vec![0.0; p.len()];
            let zero_q = vec![0.0; p.len()];
            let sum_q: Vec<f64> = qa.iter().zip(&qb).map(|(x, y)| x + y).collect();
            let whole = voltage_offsets(&f, &p, &sum_q);
            let parts: Vec<f64> = voltage_offsets(&f, &p, &zero_q)
                .iter()
                .zip(voltage_offsets(&f, &zero_p, &qa))
                .zip(voltage_offsets(&f, &zero_p, &qb))
                .map(|((x, y), z)| x + y + z)
                .collect();
            for (w, s) in whole.iter().zip(&parts) {
                prop_assert!((w - s).abs() <= 1e-8 * (1.0 + w.abs()));
            }
        }
    }
}
