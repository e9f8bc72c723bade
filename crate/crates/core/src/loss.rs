//! Bounded, monotone non-increasing losses on point masses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distribution::{DiscreteDistribution, Generative, SUPPORT_EPS};
use crate::error::{Error, Result};
use crate::point::Point;

/// Slack allowed on a mass before it counts as outside `[0, 1]`.
const DOMAIN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LossFunction {
    /// `min(M, ln 1/q)`.
    CappedLog { m: f64 },
    /// `ln 1/(q + e^{-M})`, floored at zero. Convex.
    ShiftedLog { m: f64 },
    /// `1` when `q = 0`, else `0`.
    Coverage,
}

impl LossFunction {
    pub fn bound(&self) -> f64 {
        match *self {
            LossFunction::CappedLog { m } | LossFunction::ShiftedLog { m } => m,
            LossFunction::Coverage => 1.0,
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, LossFunction::ShiftedLog { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.bound();
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Precondition(format!("loss bound M = {m} must be positive")));
        }
        Ok(())
    }

    /// Loss of assigning mass `qx` to an observed point.
    pub fn eval(&self, qx: f64) -> Result<f64> {
        if !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&qx) {
            return Err(Error::Domain { value: qx });
        }
        Ok(self.value(qx.clamp(0.0, 1.0)))
    }

    /// Unchecked evaluation; `qx` is assumed to lie in `[0, 1]`.
    #[inline]
    pub fn value(&self, qx: f64) -> f64 {
        match *self {
            LossFunction::CappedLog { m } => {
                if qx <= 0.0 {
                    m
                } else {
                    (-qx.ln()).clamp(0.0, m).abs()
                }
            }
            LossFunction::ShiftedLog { m } => (-(qx + (-m).exp()).ln()).clamp(0.0, m).abs(),
            LossFunction::Coverage => {
                if qx <= SUPPORT_EPS {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Multiset of observed points, stored as sorted `(point, count)` pairs.
///
/// Every empirical sum iterates the distinct points in order, so results are
/// independent of sample order and cheap when samples repeat.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointBag {
    items: Vec<(Point, usize)>,
    total: usize,
}

impl PointBag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points<'a, I: IntoIterator<Item = &'a Point>>(points: I) -> Self {
        let mut counts: BTreeMap<&Point, usize> = BTreeMap::new();
        for p in points {
            *counts.entry(p).or_insert(0) += 1;
        }
        let items: Vec<(Point, usize)> = counts.into_iter().map(|(p, c)| (p.clone(), c)).collect();
        let total = items.iter().map(|(_, c)| c).sum();
        Self { items, total }
    }

    pub fn from_owned<I: IntoIterator<Item = Point>>(points: I) -> Self {
        let mut counts: BTreeMap<Point, usize> = BTreeMap::new();
        for p in points {
            *counts.entry(p).or_insert(0) += 1;
        }
        let total = counts.values().sum();
        Self {
            items: counts.into_iter().collect(),
            total,
        }
    }

    /// Total number of observations, counting multiplicity.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn distinct(&self) -> &[(Point, usize)] {
        &self.items
    }

    /// First observation in sorted order.
    pub fn first(&self) -> Option<&Point> {
        self.items.first().map(|(p, _)| p)
    }

    /// Mean of `f` over the observations.
    pub fn mean_by<F: FnMut(&Point) -> f64>(&self, mut f: F) -> f64 {
        let sum: f64 = self.items.iter().map(|(p, c)| *c as f64 * f(p)).sum();
        sum / self.total as f64
    }
}

/// Mean loss of `q` over the observed points `xp` (with multiplicity).
pub fn empirical_loss<G: Generative + ?Sized>(q: &G, xp: &[Point], loss: LossFunction) -> Result<f64> {
    if xp.is_empty() {
        return Err(Error::Precondition("empirical loss over an empty sample".into()));
    }
    empirical_loss_bag(q, &PointBag::from_points(xp), loss)
}

pub fn empirical_loss_bag<G: Generative + ?Sized>(
    q: &G,
    xp: &PointBag,
    loss: LossFunction,
) -> Result<f64> {
    if xp.is_empty() {
        return Err(Error::Precondition("empirical loss over an empty sample".into()));
    }
    Ok(xp.mean_by(|x| loss.value(q.density(x).clamp(0.0, 1.0))))
}

/// Exact expected loss `sum_x p_x L(q_x)` against an explicit target.
pub fn true_loss<G: Generative + ?Sized>(q: &G, p: &DiscreteDistribution, loss: LossFunction) -> f64 {
    p.iter()
        .map(|(x, px)| px * loss.value(q.density(x).clamp(0.0, 1.0)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const M5_CAPPED: LossFunction = LossFunction::CappedLog { m: 5.0 };

    #[test]
    fn capped_log_examples() {
        assert_eq!(M5_CAPPED.eval(1.0).unwrap(), 0.0);
        assert_eq!(M5_CAPPED.eval(0.0).unwrap(), 5.0);
        assert!((M5_CAPPED.eval((-2.0f64).exp()).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(LossFunction::Coverage.eval(0.0).unwrap(), 1.0);
        assert_eq!(LossFunction::Coverage.eval(0.3).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(M5_CAPPED.eval(1.5), Err(Error::Domain { .. })));
        assert!(M5_CAPPED.eval(-0.1).is_err());
        assert!(M5_CAPPED.eval(f64::NAN).is_err());
    }

    #[test]
    fn convexity_flag() {
        assert!(LossFunction::ShiftedLog { m: 5.0 }.is_convex());
        assert!(!M5_CAPPED.is_convex());
        assert!(!LossFunction::Coverage.is_convex());
    }

    #[test]
    fn empirical_loss_examples() {
        let (a, b, c) = (Point::index(0), Point::index(1), Point::index(2));
        let q = DiscreteDistribution::uniform([a.clone(), b.clone()]).unwrap();
        let l = empirical_loss(&q, &[a.clone(), a.clone(), b.clone()], LossFunction::CappedLog { m: 1.0 })
            .unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
        assert!((l - 0.6931).abs() < 1e-4);

        let mass = DiscreteDistribution::point_mass(a.clone());
        let l = empirical_loss(&mass, &[a.clone(), b, c], LossFunction::Coverage).unwrap();
        assert!((l - 2.0 / 3.0).abs() < 1e-15);

        assert_eq!(empirical_loss(&mass, &[a], M5_CAPPED).unwrap(), 0.0);
        assert!(empirical_loss(&mass, &[], M5_CAPPED).is_err());
    }

    #[test]
    fn true_loss_examples() {
        let (a, b) = (Point::index(0), Point::index(1));
        let p = DiscreteDistribution::uniform([a.clone(), b]).unwrap();
        let q = DiscreteDistribution::point_mass(a.clone());
        assert_eq!(true_loss(&q, &p, LossFunction::Coverage), 0.5);

        let four = DiscreteDistribution::uniform((0..4).map(Point::index)).unwrap();
        assert!((true_loss(&four, &four, M5_CAPPED) - 4f64.ln()).abs() < 1e-12);

        let pa = DiscreteDistribution::point_mass(a);
        assert_eq!(true_loss(&pa, &pa, M5_CAPPED), 0.0);
    }

    fn kinds() -> [LossFunction; 3] {
        [
            LossFunction::CappedLog { m: 5.0 },
            LossFunction::ShiftedLog { m: 5.0 },
            LossFunction::Coverage,
        ]
    }

    #[test]
    fn range_and_monotonicity_on_dense_grid() {
        let n = 1_000_000;
        for l in kinds() {
            let m = l.bound();
            let mut prev = f64::INFINITY;
            for i in 0..=n {
                let q = i as f64 / n as f64;
                let v = l.eval(q).unwrap();
                assert!((0.0..=m).contains(&v), "{l:?} at {q}: {v}");
                assert!(v <= prev, "{l:?} increases at {q}");
                prev = v;
            }
        }
    }

    proptest! {
        #[test]
        fn shifted_log_is_convex(q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0, lam in 0.0f64..=1.0, m in 0.5f64..20.0) {
            let l = LossFunction::ShiftedLog { m };
            let mid = l.value(lam * q1 + (1.0 - lam) * q2);
            let chord = lam * l.value(q1) + (1.0 - lam) * l.value(q2);
            prop_assert!(mid <= chord + 1e-12);
        }

        #[test]
        fn random_values_stay_in_range(q in 0.0f64..=1.0) {
            for l in kinds() {
                let v = l.eval(q).unwrap();
                prop_assert!(v >= 0.0 && v <= l.bound());
            }
        }
    }
}
