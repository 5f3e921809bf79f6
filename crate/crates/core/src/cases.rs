//! The seven benchmark feeders.
//!
//! Every case is a line of identical links (0.33 ohm/km and 0.38 ohm/km over
//! 0.25 km) below a 7.2 kV substation with a 5 % voltage window. Loads are drawn
//! from a seeded ChaCha8 stream in a fixed order: all `p_c` in node order, then
//! all `q_c / p_c` factors in node order (cases 5 and 7 only), then the PV
//! placement when it is random.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::{Feeder, FeederParams, NodeSpec};
use crate::io::CaseMeta;

pub const GENERATOR_NAME: &str = "ChaCha8Rng";

pub const LINK_R_OHM: f64 = 0.33 * 0.25;
pub const LINK_X_OHM: f64 = 0.38 * 0.25;
pub const SUBSTATION_V: f64 = 7200.0;
pub const EPSILON: f64 = 0.05;

/// Identifier of one of the seven benchmark feeders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CaseId(u32);

impl CaseId {
    pub const ALL: [CaseId; 7] = [CaseId(1), CaseId(2), CaseId(3), CaseId(4), CaseId(5), CaseId(6), CaseId(7)];

    pub fn new(id: u32) -> Result<Self> {
        if (1..=7).contains(&id) {
            Ok(Self(id))
        } else {
            Err(Error::UnknownCase(id))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn spec(self) -> CaseSpec {
        CASE_TABLE[(self.0 - 1) as usize]
    }
}

/// How the reactive consumption of each node relates to its real consumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReactiveLoad {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

/// One row of the case table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseSpec {
    pub nodes: usize,
    pub pv_penetration: f64,
    pub p_c_max_w: f64,
    pub p_g_w: f64,
    pub s_max_va: f64,
    pub reactive: ReactiveLoad,
}

const fn row(nodes: usize, pv: f64, p_c_max: f64, p_g: f64, s_max: f64, reactive: ReactiveLoad) -> CaseSpec {
    CaseSpec { nodes, pv_penetration: pv, p_c_max_w: p_c_max, p_g_w: p_g, s_max_va: s_max, reactive }
}

const CASE_TABLE: [CaseSpec; 7] = [
    row(100, 1.00, 4000.0, 1000.0, 1100.0, ReactiveLoad::Fixed(0.25)),
    row(100, 0.50, 4000.0, 1000.0, 1100.0, ReactiveLoad::Fixed(0.25)),
    row(250, 0.50, 2500.0, 1000.0, 2200.0, ReactiveLoad::Fixed(0.25)),
    row(250, 0.50, 1000.0, 2000.0, 2200.0, ReactiveLoad::Fixed(0.25)),
    row(150, 0.85, 4000.0, 900.0, 1100.0, ReactiveLoad::Uniform { lo: 0.01, hi: 1.0 }),
    row(200, 1.00, 3750.0, 0.0, 2200.0, ReactiveLoad::Fixed(0.25)),
    row(150, 0.70, 2000.0, 7000.0, 10000.0, ReactiveLoad::Uniform { lo: 0.0, hi: 1.0 }),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PvPlacement {
    /// PV nodes at a uniform stride, starting with node 1.
    #[default]
    Even,
    /// PV nodes drawn without replacement from the seeded stream.
    Random,
}

impl PvPlacement {
    pub fn name(self) -> &'static str {
        match self {
            PvPlacement::Even => "even",
            PvPlacement::Random => "random",
        }
    }
}

impl std::str::FromStr for PvPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(PvPlacement::Even),
            "random" => Ok(PvPlacement::Random),
            other => Err(Error::InvalidConfig(format!("unknown PV placement {other:?}"))),
        }
    }
}

/// Number of PV nodes for a penetration fraction: `round(penetration * n)`.
pub fn pv_count(n: usize, penetration: f64) -> usize {
    ((penetration * n as f64).round() as usize).min(n)
}

/// Which nodes host a PV inverter.
pub fn pv_node_mask(n: usize, penetration: f64, seed: u64, strategy: PvPlacement) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pv_mask_from(&mut rng, n, penetration, strategy)
}

fn pv_mask_from(rng: &mut ChaCha8Rng, n: usize, penetration: f64, strategy: PvPlacement) -> Vec<bool> {
    let m = pv_count(n, penetration);
    let mut mask = vec![false; n];
    if m == 0 {
        return mask;
    }
    match strategy {
        PvPlacement::Even => {
            for k in 0..m {
                mask[k * n / m] = true;
            }
        }
        PvPlacement::Random => {
            for i in index::sample(rng, n, m) {
                mask[i] = true;
            }
        }
    }
    mask
}

/// Builds benchmark case `id` from `seed` with the given PV placement.
pub fn generate_case_with(id: CaseId, seed: u64, placement: PvPlacement) -> Feeder {
    let spec = id.spec();
    let n = spec.nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let p_c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..spec.p_c_max_w)).collect();
    let factors: Vec<f64> = match spec.reactive {
        ReactiveLoad::Fixed(f) => vec![f; n],
        ReactiveLoad::Uniform { lo, hi } => (0..n).map(|_| rng.gen_range(lo..hi)).collect(),
    };
    let mask = pv_mask_from(&mut rng, n, spec.pv_penetration, placement);

    let nodes = (0..n)
        .map(|k| {
            let (p_g, s) = if mask[k] { (spec.p_g_w, spec.s_max_va) } else { (0.0, 0.0) };
            NodeSpec { r: LINK_R_OHM, x: LINK_X_OHM, p_c: p_c[k], q_c: factors[k] * p_c[k], p_g, s }
        })
        .collect();
    Feeder::new(FeederParams { v0: SUBSTATION_V, epsilon: EPSILON }, nodes)
        .expect("case table describes valid feeders")
}

pub fn generate_case(id: CaseId, seed: u64) -> Feeder {
    generate_case_with(id, seed, PvPlacement::Even)
}

pub fn case_meta(id: CaseId, seed: u64, placement: PvPlacement) -> CaseMeta {
    CaseMeta {
        case_id: id.get(),
        seed,
        pv_placement: placement.name().to_string(),
        generator: GENERATOR_NAME.to_string(),
    }
}
