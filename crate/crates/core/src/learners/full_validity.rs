//! Improper learning with full validity.
//!
//! Each round asks the optimization oracle for the best member avoiding all
//! invalid points seen so far, then tests it with `T` fresh samples. A
//! member with no invalid samples is returned as-is. If all `R` rounds find
//! invalid samples, the output is a [`FilteredMeta`] built from a uniformly
//! chosen round.

use rand::{Rng, RngCore};
use serde::Serialize;

use super::LearnerParams;
use crate::distribution::Generative;
use crate::error::{Error, Result};
use crate::families::{GmnOracle, NegativeSet};
use crate::loss::PointBag;
use crate::oracle::InvalidityOracle;
use crate::point::Point;

/// Samples `x ~ q^i` and emits it if a later round's candidate supports it,
/// otherwise emits the fallback point.
///
/// The acceptance set `{x : exists j > i, x in supp(q^j)}` is never
/// materialized; membership is decided against the stored rounds.
#[derive(Clone, Debug)]
pub struct FilteredMeta<D> {
    rounds: Vec<D>,
    base: usize,
    fallback: Point,
    diverted: Option<f64>,
}

impl<D: Generative> FilteredMeta<D> {
    /// `base` is a 0-based round index.
    pub fn new(rounds: Vec<D>, base: usize, fallback: Point) -> Result<Self> {
        if base >= rounds.len() {
            return Err(Error::Precondition(format!(
                "base round {base} out of range for {} rounds",
                rounds.len()
            )));
        }
        let mut meta = Self {
            rounds,
            base,
            fallback,
            diverted: None,
        };
        meta.diverted = meta.rounds[base].support().map(|s| {
            s.iter()
                .filter(|(x, _)| !meta.accepts(x))
                .map(|(_, w)| w)
                .sum()
        });
        Ok(meta)
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn rounds(&self) -> &[D] {
        &self.rounds
    }

    pub fn fallback(&self) -> &Point {
        &self.fallback
    }

    pub fn base_distribution(&self) -> &D {
        &self.rounds[self.base]
    }

    pub fn accepts(&self, x: &Point) -> bool {
        self.rounds[self.base + 1..].iter().any(|q| q.in_support(x))
    }

    /// `Pr_{x ~ q^i}[x not accepted]`, when the base support is enumerable.
    pub fn diverted_mass(&self) -> Option<f64> {
        self.diverted
    }
}

impl<D: Generative> Generative for FilteredMeta<D> {
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        let x = self.rounds[self.base].sample(rng);
        if self.accepts(&x) {
            x
        } else {
            self.fallback.clone()
        }
    }

    /// NaN at the fallback point when the base support is not enumerable.
    fn density(&self, x: &Point) -> f64 {
        let kept = if self.accepts(x) {
            self.rounds[self.base].density(x)
        } else {
            0.0
        };
        if *x == self.fallback {
            kept + self.diverted.unwrap_or(f64::NAN)
        } else {
            kept
        }
    }

    fn in_support(&self, x: &Point) -> bool {
        *x == self.fallback || (self.accepts(x) && self.rounds[self.base].in_support(x))
    }

    fn support(&self) -> Option<Vec<(Point, f64)>> {
        let base = self.rounds[self.base].support()?;
        let mut out: Vec<(Point, f64)> = base.into_iter().filter(|(x, _)| self.accepts(x)).collect();
        let diverted = self.diverted?;
        match out.iter_mut().find(|(x, _)| *x == self.fallback) {
            Some((_, w)) => *w += diverted,
            None => out.push((self.fallback.clone(), diverted)),
        }
        out.retain(|(_, w)| *w > 0.0);
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Some(out)
    }
}

#[derive(Clone, Debug)]
pub enum VgmOutput<D> {
    /// A round's candidate that produced no invalid test samples.
    Proper { round: usize, dist: D },
    Filtered(FilteredMeta<D>),
}

impl<D> VgmOutput<D> {
    pub fn kind(&self) -> &'static str {
        match self {
            VgmOutput::Proper { .. } => "proper",
            VgmOutput::Filtered(_) => "filtered-meta",
        }
    }
}

impl<D: Generative> Generative for VgmOutput<D> {
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        match self {
            VgmOutput::Proper { dist, .. } => dist.sample(rng),
            VgmOutput::Filtered(m) => m.sample(rng),
        }
    }
    fn density(&self, x: &Point) -> f64 {
        match self {
            VgmOutput::Proper { dist, .. } => dist.density(x),
            VgmOutput::Filtered(m) => m.density(x),
        }
    }
    fn in_support(&self, x: &Point) -> bool {
        match self {
            VgmOutput::Proper { dist, .. } => dist.in_support(x),
            VgmOutput::Filtered(m) => m.in_support(x),
        }
    }
    fn support(&self) -> Option<Vec<(Point, f64)>> {
        match self {
            VgmOutput::Proper { dist, .. } => dist.support(),
            VgmOutput::Filtered(m) => m.support(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundRecord {
    /// Negatives known before this round's oracle call.
    pub negatives_before: usize,
    pub invalid_samples: usize,
    pub new_negatives: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VgmSettings {
    pub positives: usize,
    pub rounds: usize,
    pub tests_per_round: usize,
}

#[derive(Debug)]
pub struct VgmRun<D> {
    pub output: VgmOutput<D>,
    pub positives: PointBag,
    pub negatives: NegativeSet,
    pub settings: VgmSettings,
    pub rounds: Vec<RoundRecord>,
    /// Every round's candidate, in order.
    pub candidates: Vec<D>,
    pub samples_used: u64,
    pub queries_used: u64,
}

/// Learns a distribution with near-optimal loss among fully valid members
/// and invalidity at most `eps2`, with probability at least 3/4 under the
/// default parameters.
pub fn vgm_learn<O, P>(
    oracle: &O,
    target: &P,
    inv: &InvalidityOracle,
    eps1: f64,
    eps2: f64,
    params: &LearnerParams,
    rng: &mut dyn RngCore,
) -> Result<VgmRun<O::Output>>
where
    O: GmnOracle,
    P: Generative + ?Sized,
{
    for (name, v) in [("eps1", eps1), ("eps2", eps2)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Precondition(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    if !inv.is_binary() {
        return Err(Error::Precondition("full-validity learning needs a binary oracle".into()));
    }
    let loss = oracle.loss();
    loss.validate()?;
    let m = loss.bound();
    let size = oracle.family_size();
    let settings = VgmSettings {
        positives: params.positives(m, eps1, size),
        rounds: params.rounds(m, eps1),
        tests_per_round: 0,
    };
    let settings = VgmSettings {
        tests_per_round: params.tests_per_round(settings.rounds, eps2, size),
        ..settings
    };
    if settings.positives == 0 || settings.rounds == 0 {
        return Err(Error::Precondition("P and R must be positive".into()));
    }

    let start_queries = inv.queries();
    let first_draw = target.sample(rng);
    let mut draws = Vec::with_capacity(settings.positives);
    draws.push(first_draw.clone());
    draws.extend((1..settings.positives).map(|_| target.sample(rng)));
    let positives = PointBag::from_owned(draws);
    let fallback = first_draw;

    let mut negatives = NegativeSet::new();
    let mut candidates = Vec::with_capacity(settings.rounds.min(1024));
    let mut records = Vec::new();
    for round in 0..settings.rounds {
        let q = oracle.solve(&positives, &negatives)?;
        debug_assert!(negatives.iter().all(|x| !q.in_support(x)));
        let before = negatives.len();
        let mut invalid = 0;
        for _ in 0..settings.tests_per_round {
            let x = q.sample(rng);
            let v = inv.query(&x);
            if v == 1.0 {
                invalid += 1;
                negatives.insert(x);
            } else if v != 0.0 {
                return Err(Error::NonBinaryOracle { point: x, value: v });
            }
        }
        records.push(RoundRecord {
            negatives_before: before,
            invalid_samples: invalid,
            new_negatives: negatives.len() - before,
        });
        if invalid == 0 {
            candidates.push(q.clone());
            return Ok(VgmRun {
                output: VgmOutput::Proper { round, dist: q },
                positives,
                negatives,
                settings,
                rounds: records,
                candidates,
                samples_used: 0,
                queries_used: inv.queries() - start_queries,
            }
            .with_samples());
        }
        candidates.push(q);
    }

    let base = rng.random_range(0..settings.rounds);
    let meta = FilteredMeta::new(candidates.clone(), base, fallback)?;
    Ok(VgmRun {
        output: VgmOutput::Filtered(meta),
        positives,
        negatives,
        settings,
        rounds: records,
        candidates,
        samples_used: 0,
        queries_used: inv.queries() - start_queries,
    }
    .with_samples())
}

impl<D> VgmRun<D> {
    fn with_samples(mut self) -> Self {
        self.samples_used = self.positives.total() as u64;
        self
    }

    pub fn rounds_used(&self) -> usize {
        self.rounds.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::DiscreteDistribution;
    use crate::families::{FiniteFamily, FiniteOracle};
    use crate::loss::LossFunction;
    use crate::rng::stream_rng;

    fn p(i: u32) -> Point {
        Point::index(i)
    }

    /// Rounds whose candidates are explicit distributions.
    fn meta(rounds: Vec<DiscreteDistribution>, base: usize, fallback: u32) -> FilteredMeta<DiscreteDistribution> {
        FilteredMeta::new(rounds, base, p(fallback)).unwrap()
    }

    #[test]
    fn last_round_base_emits_fallback_only() {
        let r = vec![
            DiscreteDistribution::uniform([p(0), p(1)]).unwrap(),
            DiscreteDistribution::uniform([p(2), p(3)]).unwrap(),
        ];
        let m = meta(r, 1, 0);
        assert_eq!(m.density(&p(0)), 1.0);
        assert_eq!(m.density(&p(2)), 0.0);
        let mut rng = stream_rng(0, 0);
        assert!((0..100).all(|_| m.sample(&mut rng) == p(0)));
        assert_eq!(m.support().unwrap(), vec![(p(0), 1.0)]);
    }

    #[test]
    fn accepted_points_keep_base_mass() {
        let r = vec![
            DiscreteDistribution::from_weights([(p(1), 1.0), (p(2), 1.0), (p(3), 2.0)]).unwrap(),
            DiscreteDistribution::uniform([p(1), p(3)]).unwrap(),
        ];
        let m = meta(r, 0, 9);
        assert_eq!(m.density(&p(3)), 0.5);
        assert_eq!(m.density(&p(1)), 0.25);
        assert_eq!(m.density(&p(2)), 0.0);
        assert_eq!(m.density(&p(9)), 0.25);
        let total: f64 = m.support().unwrap().iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fallback_inside_acceptance_set_aggregates() {
        let r = vec![
            DiscreteDistribution::uniform([p(0), p(1)]).unwrap(),
            DiscreteDistribution::point_mass(p(0)),
        ];
        let m = meta(r, 0, 0);
        assert_eq!(m.density(&p(0)), 1.0);
    }

    #[test]
    fn histogram_matches_density() {
        let r = vec![
            DiscreteDistribution::from_weights((0..6).map(|i| (p(i), 1.0 + i as f64))).unwrap(),
            DiscreteDistribution::uniform([p(0), p(2), p(4)]).unwrap(),
            DiscreteDistribution::uniform([p(1), p(2)]).unwrap(),
        ];
        let m = meta(r, 0, 7);
        let mut rng = stream_rng(11, 0);
        let n = 100_000;
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..n {
            *counts.entry(m.sample(&mut rng)).or_insert(0usize) += 1;
        }
        let exact = m.support().unwrap();
        let l1: f64 = exact
            .iter()
            .map(|(x, w)| (counts.get(x).copied().unwrap_or(0) as f64 / n as f64 - w).abs())
            .sum();
        assert!(l1 < 0.02, "{l1}");
    }

    #[test]
    fn realizable_instance_returns_valid_member() {
        // member 0 sharpens mass on 0 and 1 (lower capped-log loss than the
        // target, whose point 2 is capped anyway) but leaks onto invalid 3
        let target = DiscreteDistribution::new([(p(0), 0.497), (p(1), 0.497), (p(2), 0.006)]).unwrap();
        let family = FiniteFamily::new(
            (0..4).map(p).collect(),
            vec![
                DiscreteDistribution::new([(p(0), 0.4985), (p(1), 0.4985), (p(3), 0.003)]).unwrap(),
                target.clone(),
                DiscreteDistribution::point_mass(p(0)),
            ],
        )
        .unwrap();
        let inv = InvalidityOracle::binary(|x: &Point| if *x == Point::index(3) { 1.0 } else { 0.0 });
        let oracle = FiniteOracle {
            family: &family,
            loss: LossFunction::CappedLog { m: 5.0 },
        };
        let params = LearnerParams {
            positives: Some(2000),
            tests_per_round: Some(4000),
            ..Default::default()
        };
        let run = vgm_learn(&oracle, &target, &inv, 0.1, 0.05, &params, &mut stream_rng(5, 0)).unwrap();
        match &run.output {
            VgmOutput::Proper { dist, round } => {
                assert_eq!(dist.index, 1);
                assert_eq!(*round, 1);
            }
            VgmOutput::Filtered(_) => panic!("expected a proper output"),
        }
        assert_eq!(run.queries_used, inv.queries());
        assert_eq!(run.queries_used, 2 * 4000);
        assert!(run.negatives.iter().all(|x| inv.truth(x) == 1.0));
    }

    #[test]
    fn rejects_fractional_oracle() {
        let target = DiscreteDistribution::point_mass(p(0));
        let family = FiniteFamily::new(vec![p(0)], vec![target.clone()]).unwrap();
        let oracle = FiniteOracle {
            family: &family,
            loss: LossFunction::Coverage,
        };
        let inv = InvalidityOracle::fractional(|_: &Point| 0.0);
        let r = vgm_learn(&oracle, &target, &inv, 0.1, 0.1, &LearnerParams::default(), &mut stream_rng(0, 0));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
