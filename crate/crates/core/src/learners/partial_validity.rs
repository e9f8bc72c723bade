//! Partial validity by importance-weighted elimination.
//!
//! Loss levels `0, eps1/3, 2 eps1/3, ..., M` are scanned in order. At each
//! level the candidate set `D` holds the members whose estimated loss is at
//! most the level. Samples from the uniform mixture `mu_D` are queried
//! once each; if the filtered mixture [`MuPrime`] looks valid enough it is
//! returned, otherwise every member whose importance-weighted invalidity
//! estimate is too high is removed and the mixture is tested again.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use serde::Serialize;

use super::LearnerParams;
use crate::distribution::Generative;
use crate::error::{Error, Result};
use crate::families::greedy_l1_cover;
use crate::loss::{empirical_loss_bag, LossFunction, PointBag};
use crate::oracle::InvalidityOracle;
use crate::point::Point;

/// Coefficient in the acceptance test `q(x) eps1 < 3 mu_D(x) M`.
const ACCEPT_COEF: f64 = 3.0;

fn accepted(qx: f64, mu: f64, eps1: f64, m: f64) -> bool {
    qx * eps1 < ACCEPT_COEF * mu * m
}

/// `Pr_{q ~ Uniform(D)}[q(x) eps1 < 3 mu_D(x) M]`.
///
/// Where `mu_D(x) = 0` the inequality fails for every member, but such `x`
/// is never drawn from `mu_D`; the probability is defined as 1 there.
pub fn mu_prime_accept_prob<D: Generative>(members: &[D], eps1: f64, m: f64, x: &Point) -> f64 {
    let dens: Vec<f64> = members.iter().map(|q| q.density(x)).collect();
    accept_prob_from(&dens, eps1, m)
}

fn accept_prob_from(dens: &[f64], eps1: f64, m: f64) -> f64 {
    if dens.is_empty() {
        return 1.0;
    }
    let mu = dens.iter().sum::<f64>() / dens.len() as f64;
    if mu == 0.0 {
        return 1.0;
    }
    let hits = dens.iter().filter(|&&qx| accepted(qx, mu, eps1, m)).count();
    hits as f64 / dens.len() as f64
}

/// Filtered uniform mixture: draw `x ~ mu_D`, keep it with probability
/// [`mu_prime_accept_prob`], else emit the fallback.
#[derive(Clone, Debug)]
pub struct MuPrime<D> {
    indices: Vec<usize>,
    members: Vec<D>,
    fallback: Point,
    eps1: f64,
    m: f64,
    diverted: Option<f64>,
}

impl<D: Generative> MuPrime<D> {
    pub fn new(indices: Vec<usize>, members: Vec<D>, fallback: Point, eps1: f64, m: f64) -> Result<Self> {
        if members.is_empty() || indices.len() != members.len() {
            return Err(Error::Precondition("mixture needs a non-empty, indexed member set".into()));
        }
        let mut out = Self {
            indices,
            members,
            fallback,
            eps1,
            m,
            diverted: None,
        };
        out.diverted = out.union_support().map(|s| {
            s.keys()
                .map(|x| out.mixture_density(x) * (1.0 - out.accept_prob(x)))
                .sum()
        });
        Ok(out)
    }

    /// Family indices of the mixture's members.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn members(&self) -> &[D] {
        &self.members
    }

    pub fn fallback(&self) -> &Point {
        &self.fallback
    }

    pub fn mixture_density(&self, x: &Point) -> f64 {
        self.members.iter().map(|q| q.density(x)).sum::<f64>() / self.members.len() as f64
    }

    pub fn accept_prob(&self, x: &Point) -> f64 {
        mu_prime_accept_prob(&self.members, self.eps1, self.m, x)
    }

    pub fn diverted_mass(&self) -> Option<f64> {
        self.diverted
    }

    fn union_support(&self) -> Option<BTreeMap<Point, ()>> {
        let mut all = BTreeMap::new();
        for q in &self.members {
            for (x, _) in q.support()? {
                all.insert(x, ());
            }
        }
        Some(all)
    }
}

impl<D: Generative> Generative for MuPrime<D> {
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        let j = rng.random_range(0..self.members.len());
        let x = self.members[j].sample(rng);
        if rng.random::<f64>() < self.accept_prob(&x) {
            x
        } else {
            self.fallback.clone()
        }
    }

    fn density(&self, x: &Point) -> f64 {
        let kept = self.mixture_density(x) * self.accept_prob(x);
        if *x == self.fallback {
            kept + self.diverted.unwrap_or(f64::NAN)
        } else {
            kept
        }
    }

    fn support(&self) -> Option<Vec<(Point, f64)>> {
        let mut out: Vec<(Point, f64)> = self
            .union_support()?
            .into_keys()
            .map(|x| {
                let w = self.density(&x);
                (x, w)
            })
            .collect();
        if !out.iter().any(|(x, _)| *x == self.fallback) {
            out.push((self.fallback.clone(), self.diverted?));
        }
        out.retain(|(_, w)| *w > 0.0);
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Some(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InnerIteration {
    pub members: Vec<usize>,
    /// `(1/n2) sum Inv(x_i) pi(x_i)`.
    pub mixture_estimate: f64,
    /// Importance-weighted invalidity estimate of each member's filtered
    /// version, aligned with `members`.
    pub estimates: Vec<f64>,
    pub removed: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelOutcome {
    Returned,
    Emptied,
    /// An iteration removed nothing; moved on to the next level.
    Stalled,
    IterationCap,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelTrace {
    pub level: f64,
    pub initial: Vec<usize>,
    pub iterations: Vec<InnerIteration>,
    pub outcome: LevelOutcome,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartialSettings {
    pub n1: usize,
    pub n2: usize,
    pub max_inner_iters: usize,
}

#[derive(Debug)]
pub struct PartialRun<D> {
    pub output: MuPrime<D>,
    pub level: f64,
    pub loss_estimates: Vec<f64>,
    pub history: Vec<LevelTrace>,
    pub settings: PartialSettings,
    /// Largest importance weight `q(x)/mu_D(x) I[...]` seen on any sample.
    pub max_importance_weight: f64,
    /// Weighted empirical invalidity of the returned mixture.
    pub inv_estimate: f64,
    pub samples_used: u64,
    pub queries_used: u64,
}

impl<D> PartialRun<D> {
    pub fn inner_iterations(&self) -> usize {
        self.history.iter().map(|l| l.iterations.len()).sum()
    }
}

/// `0, eps1/3, 2 eps1/3, ...` below `M`, then `M` itself.
pub fn loss_levels(eps1: f64, m: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (0..)
        .map(|k| k as f64 * eps1 / 3.0)
        .take_while(|&l| l < m * (1.0 - 1e-12))
        .collect();
    out.push(m);
    out
}

#[allow(clippy::too_many_arguments)]
pub fn partial_validity_learn<D, P>(
    members: &[D],
    target: &P,
    inv: &InvalidityOracle,
    loss: LossFunction,
    eps1: f64,
    eps2: f64,
    alpha: f64,
    fallback: Point,
    params: &LearnerParams,
    use_cover: bool,
    rng: &mut dyn RngCore,
) -> Result<PartialRun<D>>
where
    D: Generative + Clone,
    P: Generative + ?Sized,
{
    if !loss.is_convex() {
        return Err(Error::Precondition("partial-validity learning needs a convex loss".into()));
    }
    loss.validate()?;
    for (name, v) in [("eps1", eps1), ("eps2", eps2)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Precondition(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha = {alpha} must lie in [0, 1)")));
    }
    if members.is_empty() {
        return Err(Error::Precondition("empty family".into()));
    }
    let m = loss.bound();
    let size = members.len() as f64;
    let settings = PartialSettings {
        n1: params.n1(m, eps1, size),
        n2: params.n2(m, eps1, eps2, size),
        max_inner_iters: params.max_inner_iters(eps2, size),
    };
    let start_queries = inv.queries();

    let xp = PointBag::from_owned((0..settings.n1).map(|_| target.sample(rng)));
    let loss_estimates = members
        .iter()
        .map(|q| empirical_loss_bag(q, &xp, loss))
        .collect::<Result<Vec<f64>>>()?;

    let accept_threshold = alpha + 4.0 * eps2 / 5.0;
    let remove_threshold = alpha + eps2 / 5.0;
    let weight_cap = ACCEPT_COEF * m / eps1;
    let mut max_weight: f64 = 0.0;
    let mut history = Vec::new();

    for level in loss_levels(eps1, m) {
        let mut d: Vec<usize> = (0..members.len()).filter(|&i| loss_estimates[i] <= level).collect();
        if use_cover && !d.is_empty() {
            let pool: Vec<D> = d.iter().map(|&i| members[i].clone()).collect();
            d = greedy_l1_cover(&pool, eps2)?.into_iter().map(|k| d[k]).collect();
        }
        if d.is_empty() {
            continue;
        }
        let mut trace = LevelTrace {
            level,
            initial: d.clone(),
            iterations: Vec::new(),
            outcome: LevelOutcome::Emptied,
        };
        while !d.is_empty() {
            if trace.iterations.len() >= settings.max_inner_iters {
                trace.outcome = LevelOutcome::IterationCap;
                break;
            }
            // draw from mu_D, one query per sample, grouped by point
            let mut seen: BTreeMap<Point, f64> = BTreeMap::new();
            for _ in 0..settings.n2 {
                let j = d[rng.random_range(0..d.len())];
                let x = members[j].sample(rng);
                let v = inv.query(&x);
                *seen.entry(x).or_insert(0.0) += v;
            }
            let n2 = settings.n2 as f64;
            let mut mixture = 0.0;
            let mut sums = vec![0.0; d.len()];
            for (x, inv_sum) in &seen {
                let dens: Vec<f64> = d.iter().map(|&i| members[i].density(x)).collect();
                let mu = dens.iter().sum::<f64>() / dens.len() as f64;
                mixture += inv_sum * accept_prob_from(&dens, eps1, m);
                for (k, &qx) in dens.iter().enumerate() {
                    if accepted(qx, mu, eps1, m) {
                        let w = qx / mu;
                        debug_assert!(w <= weight_cap);
                        max_weight = max_weight.max(w);
                        sums[k] += inv_sum * w;
                    }
                }
            }
            let mixture_estimate = mixture / n2;
            let estimates: Vec<f64> = sums.iter().map(|s| s / n2).collect();
            if mixture_estimate <= accept_threshold {
                trace.iterations.push(InnerIteration {
                    members: d.clone(),
                    mixture_estimate,
                    estimates,
                    removed: Vec::new(),
                });
                trace.outcome = LevelOutcome::Returned;
                history.push(trace);
                let chosen: Vec<D> = d.iter().map(|&i| members[i].clone()).collect();
                let output = MuPrime::new(d, chosen, fallback, eps1, m)?;
                return Ok(PartialRun {
                    output,
                    level,
                    loss_estimates,
                    history,
                    settings,
                    max_importance_weight: max_weight,
                    inv_estimate: mixture_estimate,
                    samples_used: xp.total() as u64,
                    queries_used: inv.queries() - start_queries,
                });
            }
            let removed: Vec<usize> = d
                .iter()
                .zip(&estimates)
                .filter(|(_, &e)| e > remove_threshold)
                .map(|(&i, _)| i)
                .collect();
            let stalled = removed.is_empty();
            let before = d.clone();
            d.retain(|i| !removed.contains(i));
            trace.iterations.push(InnerIteration {
                members: before,
                mixture_estimate,
                estimates,
                removed,
            });
            if stalled {
                trace.outcome = LevelOutcome::Stalled;
                break;
            }
        }
        history.push(trace);
    }
    Err(Error::NoCandidateSurvived { history })
}
