//! Uniform distributions over axis-aligned boxes in `{0, ..., delta-1}^d`.

use std::cmp::Ordering;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{GmnOracle, NegativeSet};
use crate::distribution::Generative;
use crate::error::{Error, Result};
use crate::loss::{LossFunction, PointBag};
use crate::point::{Coords, Point};

/// Largest box volume that [`Generative::support`] will enumerate.
pub const MAX_ENUMERATED_VOLUME: u64 = 1 << 22;

/// Uniform over `{x : lo_i <= x_i <= hi_i for all i}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoxDistribution {
    pub lo: Coords,
    pub hi: Coords,
}

impl BoxDistribution {
    pub fn new(lo: Coords, hi: Coords) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Precondition("box corners must share a positive dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::Precondition("box needs lo <= hi on every axis".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: &[u32]) -> Self {
        Self {
            lo: x.iter().copied().collect(),
            hi: x.iter().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> u64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a + 1) as u64)
            .product()
    }

    pub fn contains_coords(&self, x: &[u32]) -> bool {
        x.len() == self.lo.len()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| a <= v && v <= b)
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.coords().is_some_and(|c| self.contains_coords(c))
    }

    /// `(lo, hi)` lexicographic order used for tie-breaking.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.lo.cmp(&other.lo).then_with(|| self.hi.cmp(&other.hi))
    }

    /// Every point of the box in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        let axes: Vec<Vec<u32>> = self.lo.iter().zip(&self.hi).map(|(&a, &b)| (a..=b).collect()).collect();
        Product::new(axes).map(Point::Grid)
    }
}

impl Generative for BoxDistribution {
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        Point::Grid(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(&a, &b)| rng.random_range(a..=b))
                .collect(),
        )
    }

    fn density(&self, x: &Point) -> f64 {
        if self.contains(x) {
            1.0 / self.volume() as f64
        } else {
            0.0
        }
    }

    fn in_support(&self, x: &Point) -> bool {
        self.contains(x)
    }

    fn support(&self) -> Option<Vec<(Point, f64)>> {
        let vol = self.volume();
        if vol > MAX_ENUMERATED_VOLUME {
            return None;
        }
        let w = 1.0 / vol as f64;
        Some(self.points().map(|x| (x, w)).collect())
    }
}

/// Cartesian product over per-axis value lists, in lexicographic order.
struct Product<T> {
    axes: Vec<Vec<T>>,
    pos: Vec<usize>,
    done: bool,
}

impl<T: Clone> Product<T> {
    fn new(axes: Vec<Vec<T>>) -> Self {
        let done = axes.is_empty() || axes.iter().any(Vec::is_empty);
        let pos = vec![0; axes.len()];
        Self { axes, pos, done }
    }
}

impl<T: Clone> Iterator for Product<T> {
    type Item = SmallVecOf<T>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.pos.iter().zip(&self.axes).map(|(&i, a)| a[i].clone()).collect();
        let mut k = self.axes.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.pos[k] += 1;
            if self.pos[k] < self.axes[k].len() {
                break;
            }
            self.pos[k] = 0;
        }
        Some(item)
    }
}

type SmallVecOf<T> = smallvec::SmallVec<[T; 4]>;

/// Family of all boxes in `{0, ..., delta-1}^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxFamily {
    pub d: usize,
    pub delta: u32,
}

impl BoxFamily {
    /// `(delta (delta + 1) / 2)^d`.
    pub fn size(&self) -> u128 {
        let per_axis = self.delta as u128 * (self.delta as u128 + 1) / 2;
        per_axis.pow(self.d as u32)
    }

    /// Every member, lazily.
    pub fn iter(&self) -> impl Iterator<Item = BoxDistribution> {
        let axis: Vec<u32> = (0..self.delta).collect();
        boxes_from_axis_values(vec![axis; self.d])
    }
}

/// Boxes whose per-axis endpoints are drawn from the given value lists.
fn boxes_from_axis_values(values: Vec<Vec<u32>>) -> impl Iterator<Item = BoxDistribution> {
    let intervals: Vec<Vec<(u32, u32)>> = values
        .iter()
        .map(|vs| {
            let mut out = Vec::new();
            for (i, &a) in vs.iter().enumerate() {
                for &b in &vs[i..] {
                    out.push((a, b));
                }
            }
            out
        })
        .collect();
    Product::new(intervals).map(|iv| BoxDistribution {
        lo: iv.iter().map(|&(a, _)| a).collect(),
        hi: iv.iter().map(|&(_, b)| b).collect(),
    })
}

/// Sorted distinct coordinate values of the positives, per axis.
fn axis_values(xp: &PointBag, d: usize) -> Vec<Vec<u32>> {
    let mut values = vec![Vec::new(); d];
    for (x, _) in xp.distinct() {
        if let Some(c) = x.coords() {
            for (axis, &v) in values.iter_mut().zip(c.iter()) {
                axis.push(v);
            }
        }
    }
    for v in &mut values {
        v.sort_unstable();
        v.dedup();
    }
    values
}

/// Number of boxes spanned by the positives' coordinates.
pub fn spanned_count(xp: &PointBag, d: usize) -> u128 {
    axis_values(xp, d)
        .iter()
        .map(|v| {
            let k = v.len() as u128;
            k * (k + 1) / 2
        })
        .product()
}

/// Boxes whose every endpoint is a coordinate of some positive, degenerate
/// boxes included.
pub fn spanned_boxes(xp: &PointBag, d: usize) -> impl Iterator<Item = BoxDistribution> {
    boxes_from_axis_values(axis_values(xp, d))
}

fn check_grid(points: &[(Point, usize)], d: usize, delta: u32) -> Result<()> {
    match points.iter().find(|(x, _)| !x.in_grid(d, delta)) {
        Some((x, _)) => Err(Error::Precondition(format!("point {x} is not in the {d}-dimensional grid of side {delta}"))),
        None => Ok(()),
    }
}

/// Empirical loss of a box: covered positives pay `L(1/vol)`, the rest `L(0)`.
pub fn box_empirical_loss(b: &BoxDistribution, xp: &PointBag, loss: LossFunction) -> f64 {
    let covered: usize = xp
        .distinct()
        .iter()
        .filter(|(x, _)| b.contains(x))
        .map(|(_, c)| c)
        .sum();
    let inside = loss.value(1.0 / b.volume() as f64);
    let outside = loss.value(0.0);
    (covered as f64 * inside + (xp.total() - covered) as f64 * outside) / xp.total() as f64
}

/// Exact constrained minimizer over boxes.
///
/// Shrinking an optimal box until each of its `2d` faces touches a positive
/// keeps every covered positive and does not grow the volume, so with a
/// non-increasing loss the optimum is attained among boxes spanned by
/// positive coordinates. Ties go to the lexicographically smallest
/// `(lo, hi)`. If every spanned box meets a negative, the answer is the
/// first free cell, which covers no positive.
pub fn gmn_oracle_box(
    xp: &PointBag,
    xn: &NegativeSet,
    loss: LossFunction,
    d: usize,
    delta: u32,
) -> Result<(BoxDistribution, f64)> {
    gmn_oracle_box_budgeted(xp, xn, loss, d, delta, u128::MAX)
}

pub fn gmn_oracle_box_budgeted(
    xp: &PointBag,
    xn: &NegativeSet,
    loss: LossFunction,
    d: usize,
    delta: u32,
    budget: u128,
) -> Result<(BoxDistribution, f64)> {
    if xp.is_empty() {
        return Err(Error::Precondition("oracle needs at least one positive".into()));
    }
    check_grid(xp.distinct(), d, delta)?;
    let candidates = spanned_count(xp, d);
    if candidates > budget {
        return Err(Error::BudgetExceeded { candidates, budget });
    }
    let negatives: Vec<&[u32]> = xn.iter().filter_map(Point::coords).collect();
    let mut best: Option<(BoxDistribution, f64)> = None;
    for b in spanned_boxes(xp, d) {
        if negatives.iter().any(|x| b.contains_coords(x)) {
            continue;
        }
        let l = box_empirical_loss(&b, xp, loss);
        let better = match &best {
            None => true,
            Some((cur, cl)) => l < *cl || (l == *cl && b.lex_cmp(cur) == Ordering::Less),
        };
        if better {
            best = Some((b, l));
        }
    }
    if best.is_none() {
        // every box covering a positive hits a negative; the best left is a
        // box covering nothing, and the smallest such is a single free cell
        best = first_free_cell(xn, d, delta).map(|b| {
            let l = box_empirical_loss(&b, xp, loss);
            (b, l)
        });
    }
    best.ok_or_else(|| Error::NoFeasibleDistribution {
        negatives: xn.iter().cloned().collect(),
    })
}

/// Lexicographically smallest grid cell not in `xn`, as a point box.
fn first_free_cell(xn: &NegativeSet, d: usize, delta: u32) -> Option<BoxDistribution> {
    if delta == 0 {
        return None;
    }
    let mut cell = vec![0u32; d];
    loop {
        let p = Point::grid(cell.iter().copied());
        if !xn.contains(&p) {
            return Some(BoxDistribution::point(&cell));
        }
        let axis = (0..d).rev().find(|&i| cell[i] + 1 < delta)?;
        cell[axis] += 1;
        cell[axis + 1..].iter_mut().for_each(|v| *v = 0);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoxOracle {
    pub family: BoxFamily,
    pub loss: LossFunction,
    pub budget: u128,
}

impl GmnOracle for BoxOracle {
    type Output = BoxDistribution;

    fn solve(&self, xp: &PointBag, xn: &NegativeSet) -> Result<BoxDistribution> {
        gmn_oracle_box_budgeted(xp, xn, self.loss, self.family.d, self.family.delta, self.budget).map(|(b, _)| b)
    }

    fn loss(&self) -> LossFunction {
        self.loss
    }

    fn family_size(&self) -> f64 {
        self.family.size() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::empirical_loss_bag;

    fn pt(c: &[u32]) -> Point {
        Point::grid(c.iter().copied())
    }

    #[test]
    fn diagonal_blocked_by_center() {
        let xp = PointBag::from_owned([pt(&[0, 0]), pt(&[2, 2])]);
        let xn: NegativeSet = [pt(&[1, 1])].into_iter().collect();
        let (b, l) = gmn_oracle_box(&xp, &xn, LossFunction::Coverage, 2, 3).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(b, BoxDistribution::point(&[0, 0]));

        // brute force over all 36 boxes of the 3x3 grid
        let fam = BoxFamily { d: 2, delta: 3 };
        assert_eq!(fam.size(), 36);
        let all: Vec<_> = fam.iter().collect();
        assert_eq!(all.len(), 36);
        let best = all
            .iter()
            .filter(|b| !b.contains(&pt(&[1, 1])))
            .map(|b| empirical_loss_bag(b, &xp, LossFunction::Coverage).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, 0.5);
    }

    #[test]
    fn spanned_box_when_unconstrained() {
        let xp = PointBag::from_owned([pt(&[0, 0]), pt(&[2, 2])]);
        let (b, l) = gmn_oracle_box(&xp, &NegativeSet::new(), LossFunction::Coverage, 2, 3).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(b.lo.as_slice(), &[0, 0]);
        // lexicographic tie-break on coverage: (0,0)-(0,0) covers one, the
        // full span covers both; only loss-0 boxes qualify
        assert_eq!(b.hi.as_slice(), &[2, 2]);
    }

    #[test]
    fn point_box_has_unit_density() {
        let xp = PointBag::from_owned([pt(&[1, 1])]);
        let (b, l) = gmn_oracle_box(&xp, &NegativeSet::new(), LossFunction::CappedLog { m: 5.0 }, 2, 3).unwrap();
        assert_eq!(b, BoxDistribution::point(&[1, 1]));
        assert_eq!(l, 0.0);
    }

    #[test]
    fn falls_back_to_a_free_cell() {
        let xp = PointBag::from_owned([pt(&[1, 1])]);
        let xn: NegativeSet = [pt(&[0, 0]), pt(&[1, 1])].into_iter().collect();
        let (b, l) = gmn_oracle_box(&xp, &xn, LossFunction::Coverage, 2, 3).unwrap();
        assert_eq!(b, BoxDistribution::point(&[0, 1]));
        assert_eq!(l, 1.0);
    }

    #[test]
    fn infeasible_only_when_every_cell_is_negative() {
        let xp = PointBag::from_owned([pt(&[1])]);
        let xn: NegativeSet = (0..2).map(|i| pt(&[i])).collect();
        assert!(matches!(
            gmn_oracle_box(&xp, &xn, LossFunction::Coverage, 1, 2),
            Err(Error::NoFeasibleDistribution { .. })
        ));
    }

    #[test]
    fn rejects_off_grid_and_budget() {
        let xp = PointBag::from_owned([pt(&[3, 0])]);
        assert!(gmn_oracle_box(&xp, &NegativeSet::new(), LossFunction::Coverage, 2, 3).is_err());
        let xp = PointBag::from_owned([pt(&[0, 0]), pt(&[1, 1]), pt(&[2, 2])]);
        assert!(matches!(
            gmn_oracle_box_budgeted(&xp, &NegativeSet::new(), LossFunction::Coverage, 2, 3, 10),
            Err(Error::BudgetExceeded { candidates: 36, .. })
        ));
    }

    #[test]
    fn density_sums_to_one() {
        let b = BoxDistribution::new([1, 0, 2].into_iter().collect(), [3, 0, 4].into_iter().collect()).unwrap();
        assert_eq!(b.volume(), 9);
        let s: f64 = b.support().unwrap().iter().map(|(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(BoxDistribution::new([2].into_iter().collect(), [1].into_iter().collect()).is_err());
    }
}
