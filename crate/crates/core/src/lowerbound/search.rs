use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{mask_point, HiddenBoxInstance, NeedleInstance};
use crate::point::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Candidates in their natural order.
    Scan,
    /// Candidates in a uniformly random order, without repeats.
    RandomProbe,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "scan" => Ok(Self::Scan),
            "random-probe" => Ok(Self::RandomProbe),
            _ => Err(format!("unknown strategy {s:?}")),
        }
    }
}

pub enum SearchInstance<'a> {
    /// Tests `q_i` with one query at `i`.
    Needle(&'a NeedleInstance),
    /// Tests the box for codeword `y'` with one query at `x = y'`, which is
    /// valid iff `y' = y` when both have weight `d/3`.
    HiddenBox {
        instance: &'a HiddenBoxInstance,
        candidates: &'a [u64],
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub strategy: Strategy,
    pub candidates: usize,
    pub queries: u64,
    /// Position (0-based) in the natural order of the first valid candidate.
    pub found: Option<usize>,
}

/// Tests family members one at a time until a valid one is found.
pub fn proper_search_demo(instance: SearchInstance<'_>, strategy: Strategy, rng: &mut dyn RngCore) -> SearchReport {
    let (oracle, probes): (_, Vec<Point>) = match instance {
        SearchInstance::Needle(inst) => (&inst.oracle, (1..=inst.n as u32).map(Point::index).collect()),
        SearchInstance::HiddenBox { instance, candidates } => (
            &instance.oracle,
            candidates.iter().map(|&c| mask_point(c, instance.d)).collect(),
        ),
    };
    let mut order: Vec<usize> = (0..probes.len()).collect();
    if strategy == Strategy::RandomProbe {
        let mut rng = rng;
        order.shuffle(&mut rng);
    }
    let start = oracle.queries();
    let found = order.into_iter().find(|&k| oracle.query(&probes[k]) == 0.0);
    SearchReport {
        strategy,
        candidates: probes.len(),
        queries: oracle.queries() - start,
        found,
    }
}
