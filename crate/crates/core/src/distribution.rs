//! Distributions over [`Point`]s.
//!
//! Every candidate, target and learner output implements [`Generative`]:
//! it can be sampled, its mass function evaluated pointwise, and (when the
//! support is finite) enumerated for exact loss and invalidity sums.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::RngCore;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::point::Point;

/// Masses at or below this are treated as zero for support membership.
pub const SUPPORT_EPS: f64 = 1e-12;

/// Tolerance on the total mass of an explicit distribution.
pub const MASS_TOL: f64 = 1e-9;

pub trait Generative: Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> Point;

    /// Probability mass at `x`.
    fn density(&self, x: &Point) -> f64;

    fn in_support(&self, x: &Point) -> bool {
        self.density(x) > SUPPORT_EPS
    }

    /// Every support point with its mass, when the support is finite and
    /// small enough to list. Used by exact evaluation only.
    fn support(&self) -> Option<Vec<(Point, f64)>>;
}

impl<T: Generative + ?Sized> Generative for &T {
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        (**self).sample(rng)
    }
    fn density(&self, x: &Point) -> f64 {
        (**self).density(x)
    }
    fn in_support(&self, x: &Point) -> bool {
        (**self).in_support(x)
    }
    fn support(&self) -> Option<Vec<(Point, f64)>> {
        (**self).support()
    }
}

impl<T: Generative + ?Sized> Generative for Arc<T> {
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        (**self).sample(rng)
    }
    fn density(&self, x: &Point) -> f64 {
        (**self).density(x)
    }
    fn in_support(&self, x: &Point) -> bool {
        (**self).in_support(x)
    }
    fn support(&self) -> Option<Vec<(Point, f64)>> {
        (**self).support()
    }
}

/// Explicit finite-support probability mass function.
///
/// Support points are kept sorted, so iteration order (and therefore every
/// exact sum) is deterministic. Sampling uses a Walker alias table.
#[derive(Clone, Debug)]
pub struct DiscreteDistribution {
    points: Vec<Point>,
    probs: Vec<f64>,
    index: HashMap<Point, usize>,
    alias: WeightedAliasIndex<f64>,
}

impl DiscreteDistribution {
    /// Builds from `(point, mass)` pairs. Duplicate points are merged and
    /// masses at or below [`SUPPORT_EPS`] dropped; the remaining total must
    /// be within [`MASS_TOL`] of one.
    pub fn new<I: IntoIterator<Item = (Point, f64)>>(pairs: I) -> Result<Self> {
        let merged = merge(pairs)?;
        let total: f64 = merged.values().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!(
                "total mass {total} differs from 1"
            )));
        }
        Self::from_merged(merged)
    }

    /// Builds from non-negative weights, normalizing them.
    pub fn from_weights<I: IntoIterator<Item = (Point, f64)>>(pairs: I) -> Result<Self> {
        let merged = merge(pairs)?;
        let total: f64 = merged.values().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        let normalized = merged
            .into_iter()
            .map(|(p, w)| (p, w / total))
            .filter(|(_, w)| *w > SUPPORT_EPS)
            .collect();
        Self::from_merged(normalized)
    }

    pub fn point_mass(x: Point) -> Self {
        Self::new([(x, 1.0)]).expect("point mass is a valid distribution")
    }

    pub fn uniform<I: IntoIterator<Item = Point>>(points: I) -> Result<Self> {
        Self::from_weights(points.into_iter().map(|p| (p, 1.0)))
    }

    fn from_merged(merged: BTreeMap<Point, f64>) -> Result<Self> {
        if merged.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let (points, probs): (Vec<Point>, Vec<f64>) = merged.into_iter().unzip();
        let index = points
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, p)| (p, i))
            .collect();
        let alias = WeightedAliasIndex::new(probs.clone())
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        Ok(Self {
            points,
            probs,
            index,
            alias,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.probs.iter().copied())
    }

    pub fn prob(&self, x: &Point) -> f64 {
        self.index.get(x).map_or(0.0, |&i| self.probs[i])
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.index.contains_key(x)
    }

    /// Samples a support position without cloning the point.
    pub fn sample_index(&self, rng: &mut dyn RngCore) -> usize {
        self.alias.sample(rng)
    }

    pub fn sample_ref(&self, rng: &mut dyn RngCore) -> &Point {
        &self.points[self.sample_index(rng)]
    }
}

fn merge<I: IntoIterator<Item = (Point, f64)>>(pairs: I) -> Result<BTreeMap<Point, f64>> {
    let mut merged: BTreeMap<Point, f64> = BTreeMap::new();
    for (p, w) in pairs {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "mass {w} at {p} is not a non-negative number"
            )));
        }
        *merged.entry(p).or_insert(0.0) += w;
    }
    merged.retain(|_, w| *w > SUPPORT_EPS);
    Ok(merged)
}

impl PartialEq for DiscreteDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.probs == other.probs
    }
}

impl Generative for DiscreteDistribution {
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        self.sample_ref(rng).clone()
    }

    fn density(&self, x: &Point) -> f64 {
        self.prob(x)
    }

    fn in_support(&self, x: &Point) -> bool {
        self.contains(x)
    }

    fn support(&self) -> Option<Vec<(Point, f64)>> {
        Some(self.iter().map(|(p, w)| (p.clone(), w)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionRecord {
    support: Vec<(Point, f64)>,
}

impl Serialize for DiscreteDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DistributionRecord {
            support: self.support().unwrap_or_default(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscreteDistribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = DistributionRecord::deserialize(d)?;
        DiscreteDistribution::new(rec.support).map_err(serde::de::Error::custom)
    }
}

/// Exact mass a distribution places on points satisfying `pred`, by
/// enumeration of its support.
pub fn mass_where<G, F>(q: &G, mut pred: F) -> Result<f64>
where
    G: Generative + ?Sized,
    F: FnMut(&Point) -> bool,
{
    let support = q.support().ok_or(Error::NotEnumerable)?;
    Ok(support
        .iter()
        .filter(|(x, _)| pred(x))
        .map(|(_, w)| *w)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_mass() {
        assert!(DiscreteDistribution::new([(Point::index(0), 0.5)]).is_err());
        assert!(DiscreteDistribution::new([(Point::index(0), -0.1), (Point::index(1), 1.1)]).is_err());
        assert!(DiscreteDistribution::new(Vec::<(Point, f64)>::new()).is_err());
    }

    #[test]
    fn tiny_masses_leave_support() {
        let q = DiscreteDistribution::new([
            (Point::index(0), 1.0 - 1e-13),
            (Point::index(1), 1e-13),
        ])
        .unwrap();
        assert_eq!(q.len(), 1);
        assert!(!q.in_support(&Point::index(1)));
    }

    #[test]
    fn merges_duplicates() {
        let q = DiscreteDistribution::new([
            (Point::index(0), 0.25),
            (Point::index(0), 0.25),
            (Point::index(1), 0.5),
        ])
        .unwrap();
        assert_eq!(q.prob(&Point::index(0)), 0.5);
    }

    #[test]
    fn sampling_matches_masses() {
        let q = DiscreteDistribution::from_weights([
            (Point::index(0), 1.0),
            (Point::index(1), 3.0),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| q.sample(&mut rng) == Point::index(1))
            .count();
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.01, "{frac}");
    }

    #[test]
    fn serde_round_trip() {
        let q = DiscreteDistribution::uniform([Point::index(2), Point::index(5)]).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        let back: DiscreteDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(q, back);
    }
}
