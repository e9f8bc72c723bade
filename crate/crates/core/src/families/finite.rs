use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{GmnOracle, NegativeSet};
use crate::distribution::{DiscreteDistribution, Generative};
use crate::error::{Error, Result};
use crate::loss::{empirical_loss_bag, LossFunction, PointBag};
use crate::point::Point;

/// Explicit list of candidate distributions over a shared finite domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "FamilyRecord", into = "FamilyRecord")]
pub struct FiniteFamily {
    domain: Vec<Point>,
    members: Vec<Arc<DiscreteDistribution>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyRecord {
    domain: Vec<Point>,
    members: Vec<DiscreteDistribution>,
}

impl TryFrom<FamilyRecord> for FiniteFamily {
    type Error = Error;
    fn try_from(r: FamilyRecord) -> Result<Self> {
        FiniteFamily::new(r.domain, r.members)
    }
}

impl From<FiniteFamily> for FamilyRecord {
    fn from(f: FiniteFamily) -> Self {
        FamilyRecord {
            domain: f.domain,
            members: f.members.iter().map(|m| (**m).clone()).collect(),
        }
    }
}

impl FiniteFamily {
    pub fn new(mut domain: Vec<Point>, members: Vec<DiscreteDistribution>) -> Result<Self> {
        domain.sort();
        domain.dedup();
        for (i, m) in members.iter().enumerate() {
            if let Some(x) = m.points().iter().find(|x| domain.binary_search(x).is_err()) {
                return Err(Error::InvalidDistribution(format!(
                    "member {i} has support point {x} outside the domain"
                )));
            }
        }
        Ok(Self {
            domain,
            members: members.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn domain(&self) -> &[Point] {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &DiscreteDistribution {
        &self.members[i]
    }

    pub fn members(&self) -> impl Iterator<Item = &DiscreteDistribution> {
        self.members.iter().map(|m| &**m)
    }

    pub fn handle(&self, i: usize) -> FamilyMember {
        FamilyMember {
            index: i,
            dist: Arc::clone(&self.members[i]),
        }
    }

    pub fn handles(&self) -> Vec<FamilyMember> {
        (0..self.len()).map(|i| self.handle(i)).collect()
    }

    /// Members at `indices`, in the given order.
    pub fn subfamily(&self, indices: &[usize]) -> FiniteFamily {
        FiniteFamily {
            domain: self.domain.clone(),
            members: indices.iter().map(|&i| Arc::clone(&self.members[i])).collect(),
        }
    }
}

/// A family member tagged with its index; cheap to clone.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub index: usize,
    pub dist: Arc<DiscreteDistribution>,
}

impl Generative for FamilyMember {
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        self.dist.sample(rng)
    }
    fn density(&self, x: &Point) -> f64 {
        self.dist.prob(x)
    }
    fn in_support(&self, x: &Point) -> bool {
        self.dist.contains(x)
    }
    fn support(&self) -> Option<Vec<(Point, f64)>> {
        self.dist.support()
    }
}

fn avoids(q: &DiscreteDistribution, xn: &NegativeSet) -> bool {
    if xn.len() <= q.len() {
        xn.iter().all(|x| !q.contains(x))
    } else {
        q.points().iter().all(|x| !xn.contains(x))
    }
}

/// Lowest-loss member avoiding `xn`; ties go to the lowest index.
pub fn gmn_oracle_finite(
    family: &FiniteFamily,
    xp: &PointBag,
    xn: &NegativeSet,
    loss: LossFunction,
) -> Result<(usize, f64)> {
    if xp.is_empty() {
        return Err(Error::Precondition("oracle needs at least one positive".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, q) in family.members().enumerate() {
        if !avoids(q, xn) {
            continue;
        }
        let l = empirical_loss_bag(q, xp, loss)?;
        if best.is_none_or(|(_, b)| l < b) {
            best = Some((i, l));
        }
    }
    best.ok_or_else(|| Error::NoFeasibleDistribution {
        negatives: xn.iter().cloned().collect(),
    })
}

#[derive(Clone, Debug)]
pub struct FiniteOracle<'a> {
    pub family: &'a FiniteFamily,
    pub loss: LossFunction,
}

impl GmnOracle for FiniteOracle<'_> {
    type Output = FamilyMember;

    fn solve(&self, xp: &PointBag, xn: &NegativeSet) -> Result<FamilyMember> {
        let (i, _) = gmn_oracle_finite(self.family, xp, xn, self.loss)?;
        Ok(self.family.handle(i))
    }

    fn loss(&self) -> LossFunction {
        self.loss
    }

    fn family_size(&self) -> f64 {
        self.family.len() as f64
    }
}
