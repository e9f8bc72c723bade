//! Proper learner for axis-aligned boxes.
//!
//! Boxes spanned by the positives' coordinates are ranked by empirical
//! loss. Each is tested, in order, with `box_tests` of its own samples, and
//! the first box whose samples are all valid is returned. This yields the
//! same box as testing every candidate and keeping the best survivor, but
//! usually queries far fewer candidates.

use std::cmp::Ordering;

use rand::RngCore;
use serde::Serialize;

use super::LearnerParams;
use crate::distribution::Generative;
use crate::error::{Error, Result};
use crate::families::{box_empirical_loss, spanned_boxes, spanned_count, BoxDistribution};
use crate::loss::{LossFunction, PointBag};
use crate::oracle::InvalidityOracle;

#[derive(Clone, Debug, Serialize)]
pub struct ProperBoxStats {
    pub positives: usize,
    pub tests_per_candidate: usize,
    pub candidates: u128,
    pub candidates_tested: usize,
    /// Positives drawn from the target.
    pub samples_used: u64,
    /// Draws from candidate boxes, each queried once.
    pub test_samples: u64,
    pub queries_used: u64,
}

#[derive(Clone, Debug)]
pub struct ProperBoxRun {
    pub output: BoxDistribution,
    pub empirical_loss: f64,
    pub stats: ProperBoxStats,
}

#[allow(clippy::too_many_arguments)]
pub fn proper_box_learn<P: Generative + ?Sized>(
    target: &P,
    inv: &InvalidityOracle,
    eps1: f64,
    eps2: f64,
    d: usize,
    delta: u32,
    loss: LossFunction,
    params: &LearnerParams,
    rng: &mut dyn RngCore,
) -> Result<ProperBoxRun> {
    for (name, v) in [("eps1", eps1), ("eps2", eps2)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Precondition(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    if !inv.is_binary() {
        return Err(Error::Precondition("proper box learning needs a binary oracle".into()));
    }
    loss.validate()?;
    let n = params.box_positives(d, loss.bound(), eps1);
    let tests = params.box_tests(n, d, eps2);
    let start_queries = inv.queries();

    let xp = PointBag::from_owned((0..n).map(|_| target.sample(rng)));
    if let Some((x, _)) = xp.distinct().iter().find(|(x, _)| !x.in_grid(d, delta)) {
        return Err(Error::Precondition(format!("positive {x} is off the grid")));
    }
    let candidates = spanned_count(&xp, d);
    if candidates > params.box_budget as u128 {
        return Err(Error::BudgetExceeded {
            candidates,
            budget: params.box_budget as u128,
        });
    }
    let mut ranked: Vec<(f64, BoxDistribution)> = spanned_boxes(&xp, d)
        .map(|b| (box_empirical_loss(&b, &xp, loss), b))
        .collect();
    ranked.sort_by(candidate_order);

    let mut samples = 0u64;
    for (tested, (l, b)) in ranked.into_iter().enumerate() {
        let mut clean = true;
        for _ in 0..tests {
            let x = b.sample(rng);
            samples += 1;
            match inv.query(&x) {
                v if v == 0.0 => {}
                v if v == 1.0 => {
                    clean = false;
                    break;
                }
                v => return Err(Error::NonBinaryOracle { point: x, value: v }),
            }
        }
        if clean {
            return Ok(ProperBoxRun {
                output: b,
                empirical_loss: l,
                stats: ProperBoxStats {
                    positives: n,
                    tests_per_candidate: tests,
                    candidates,
                    candidates_tested: tested + 1,
                    samples_used: n as u64,
                    test_samples: samples,
                    queries_used: inv.queries() - start_queries,
                },
            });
        }
    }
    // point boxes at positives are always candidates, and are valid when p is
    Err(Error::NoFeasibleDistribution { negatives: Vec::new() })
}

/// Orders `(loss, box)` pairs like the learner does.
pub fn candidate_order(a: &(f64, BoxDistribution), b: &(f64, BoxDistribution)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.lex_cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::DiscreteDistribution;
    use crate::oracle::exact_invalidity;
    use crate::point::Point;

    #[test]
    fn finds_valid_box_in_l_shape() {
        // valid: [0,3]x[0,1] union [0,1]x[0,3] in a 4x4 grid
        let valid = |x: &Point| {
            let c = x.coords().unwrap();
            (c[0] <= 3 && c[1] <= 1) || (c[0] <= 1 && c[1] <= 3)
        };
        let pts: Vec<Point> = (0..4u32)
            .flat_map(|a| (0..4u32).map(move |b| Point::grid([a, b])))
            .filter(|x| valid(x))
            .collect();
        let p = DiscreteDistribution::uniform(pts).unwrap();
        let inv = InvalidityOracle::binary(move |x: &Point| if valid(x) { 0.0 } else { 1.0 });
        let params = LearnerParams {
            box_positives: Some(200),
            ..Default::default()
        };
        let mut rng = crate::rng::stream_rng(3, 1);
        let run = proper_box_learn(&p, &inv, 0.3, 0.1, 2, 4, LossFunction::CappedLog { m: 4.0 }, &params, &mut rng).unwrap();
        assert_eq!(exact_invalidity(&run.output, &inv).unwrap(), 0.0);
        assert_eq!(run.output.volume(), 8);
        assert_eq!(run.stats.queries_used, inv.queries());
    }
}
