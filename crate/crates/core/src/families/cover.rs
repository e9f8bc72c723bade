//! L1 distances and greedy covers of finite families.

use std::collections::BTreeMap;

use crate::distribution::Generative;
use crate::error::{Error, Result};
use crate::point::Point;

/// `sum_x |q1_x - q2_x|` over the union of supports.
pub fn l1_distance<A, B>(q1: &A, q2: &B) -> Result<f64>
where
    A: Generative + ?Sized,
    B: Generative + ?Sized,
{
    let s1 = q1.support().ok_or(Error::NotEnumerable)?;
    let s2 = q2.support().ok_or(Error::NotEnumerable)?;
    let mut diff: BTreeMap<Point, f64> = BTreeMap::new();
    for (x, w) in s1 {
        *diff.entry(x).or_insert(0.0) += w;
    }
    for (x, w) in s2 {
        *diff.entry(x).or_insert(0.0) -= w;
    }
    Ok(diff.values().map(|v| v.abs()).sum())
}

/// Indices of a subfamily such that every member lies within L1 distance
/// `eps` of one of them.
///
/// Scans in index order and keeps a member iff no kept member covers it.
/// Kept members are pairwise more than `eps` apart, so the cover is no
/// larger than the `eps/2`-packing number; it is not minimal.
pub fn greedy_l1_cover<D: Generative>(members: &[D], eps: f64) -> Result<Vec<usize>> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("cover radius {eps} must be positive")));
    }
    let mut cover: Vec<usize> = Vec::new();
    for (i, q) in members.iter().enumerate() {
        let mut covered = false;
        for &c in &cover {
            if l1_distance(q, &members[c])? <= eps {
                covered = true;
                break;
            }
        }
        if !covered {
            cover.push(i);
        }
    }
    Ok(cover)
}
