//! Seeded finite test families over the domain `{0, ..., 127}`.
//!
//! The binary variants hide 48 invalid points. Every family holds "dirty"
//! members that beat the best valid member on loss by zeroing the target's
//! light points (whose capped loss is `M` either way) at the price of a
//! little invalid mass, so the learner has to spend rounds discarding them.
//!
//! The fractional variants grade points with `Inv` in `{0, 0.25, 0.6, 1}`.
//! Members putting more weight on graded points fit better but exceed the
//! invalidity budget `alpha = 0.2`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use vgm_core::rng::{stream_rng, SimRng};
use vgm_core::{DiscreteDistribution, InvalidityOracle, Point, Result};
use vgm_core::families::FiniteFamily;

pub const DOMAIN: u32 = 128;
pub const FAMILY_SIZE: usize = 64;
const INVALID: usize = 48;
const HEAVY: usize = 18;
const LIGHT: usize = 8;
const LIGHT_MASS: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticVariant {
    /// The target is a family member.
    Realizable,
    /// The target is outside the family.
    Agnostic,
    /// Dirty members carry tiny, separate invalid masses.
    Shadow,
    /// Fractional labels; the target is a member that exceeds `alpha`.
    PartialMember,
    /// Fractional labels; the target is outside the family.
    PartialAgnostic,
}

impl SyntheticVariant {
    pub fn is_fractional(self) -> bool {
        matches!(self, Self::PartialMember | Self::PartialAgnostic)
    }
}

pub struct SyntheticInstance {
    pub family: FiniteFamily,
    pub target: DiscreteDistribution,
    pub labels: HashMap<Point, f64>,
}

impl SyntheticInstance {
    pub fn oracle(&self) -> InvalidityOracle {
        let labels = self.labels.clone();
        let rule = move |x: &Point| labels.get(x).copied().unwrap_or(1.0);
        if self.labels.values().all(|&v| v == 0.0 || v == 1.0) {
            InvalidityOracle::binary(rule)
        } else {
            InvalidityOracle::fractional(rule)
        }
    }
}

fn dist(weights: &[(u32, f64)]) -> Result<DiscreteDistribution> {
    DiscreteDistribution::from_weights(weights.iter().map(|&(i, w)| (Point::index(i), w)))
}

fn jitter(rng: &mut SimRng, w: &[(u32, f64)], lo: f64, hi: f64) -> Vec<(u32, f64)> {
    w.iter().map(|&(i, v)| (i, v * rng.random_range(lo..hi))).collect()
}

fn normalized(w: Vec<(u32, f64)>, total: f64) -> Vec<(u32, f64)> {
    let s: f64 = w.iter().map(|(_, v)| v).sum();
    w.into_iter().map(|(i, v)| (i, v * total / s)).collect()
}

fn smoothed(center: &[(u32, f64)], lambda: f64, over: &[u32]) -> Vec<(u32, f64)> {
    let mut out: Vec<(u32, f64)> = center.iter().map(|&(i, v)| (i, (1.0 - lambda) * v)).collect();
    out.extend(over.iter().map(|&i| (i, lambda / over.len() as f64)));
    out
}

fn random_filler(rng: &mut SimRng, pool: &[u32], k: usize) -> Vec<(u32, f64)> {
    let mut pts = pool.to_vec();
    pts.shuffle(rng);
    pts.truncate(k);
    pts.into_iter().map(|i| (i, rng.random_range(0.1..1.0))).collect()
}

pub fn make_synthetic(variant: SyntheticVariant, seed: u64) -> Result<SyntheticInstance> {
    if variant.is_fractional() {
        make_fractional(variant, seed)
    } else {
        make_binary(variant, seed)
    }
}

fn make_binary(variant: SyntheticVariant, seed: u64) -> Result<SyntheticInstance> {
    let mut rng = stream_rng(seed, 0);
    let mut idx: Vec<u32> = (0..DOMAIN).collect();
    idx.shuffle(&mut rng);
    let (invalid, valid) = idx.split_at(INVALID);
    let labels: HashMap<Point, f64> = idx
        .iter()
        .map(|&i| (Point::index(i), if invalid.contains(&i) { 1.0 } else { 0.0 }))
        .collect();

    let heavy_pts = &valid[..HEAVY];
    let light_pts = &valid[HEAVY..HEAVY + LIGHT];
    let heavy: Vec<(u32, f64)> = normalized(
        heavy_pts.iter().map(|&i| (i, rng.random_range(0.5..1.5))).collect(),
        1.0 - LIGHT as f64 * LIGHT_MASS,
    );
    let light: Vec<(u32, f64)> = light_pts.iter().map(|&i| (i, LIGHT_MASS)).collect();
    let target_w: Vec<(u32, f64)> = heavy.iter().chain(&light).copied().collect();
    let target = dist(&target_w)?;

    // family members are built around `center`
    let center = match variant {
        SyntheticVariant::Agnostic => {
            let h = normalized(jitter(&mut rng, &heavy, 0.85, 1.15), 1.0 - LIGHT as f64 * LIGHT_MASS);
            h.into_iter().chain(light.iter().copied()).collect()
        }
        _ => target_w.clone(),
    };
    let center_heavy: Vec<(u32, f64)> = center[..HEAVY].to_vec();

    let mut members: Vec<Vec<(u32, f64)>> = Vec::new();
    if variant == SyntheticVariant::Realizable {
        members.push(center.clone());
    }
    for k in 0..12 {
        members.push(smoothed(&center, 0.01 + 0.02 * k as f64, valid));
    }
    for _ in 0..12 {
        let h = normalized(jitter(&mut rng, &center_heavy, 0.8, 1.25), 1.0 - LIGHT as f64 * LIGHT_MASS);
        members.push(h.into_iter().chain(light.iter().copied()).collect());
    }

    // dirty members: light points zeroed (fully or half), invalid mass eta
    let sharpen = |drop: usize, eta: f64| -> Vec<(u32, f64)> {
        let kept_light = &light[drop..];
        let rest = 1.0 - eta - kept_light.len() as f64 * LIGHT_MASS;
        let mut w = normalized(center_heavy.clone(), rest);
        w.extend(kept_light.iter().copied());
        w
    };
    match variant {
        SyntheticVariant::Realizable | SyntheticVariant::Agnostic => {
            for (tier, drop, etas) in [(0, LIGHT, [0.004, 0.008, 0.012, 0.02]), (1, LIGHT / 2, [0.002, 0.004, 0.006, 0.01])] {
                for (k, &eta) in etas.iter().enumerate() {
                    let mut w = sharpen(drop, eta);
                    w.push((invalid[tier], eta / 2.0));
                    w.push((invalid[2 + 4 * tier + k], eta / 2.0));
                    members.push(w);
                }
            }
        }
        SyntheticVariant::Shadow => {
            for (k, &eta) in [2e-5, 5e-5, 2e-4, 1e-3, 3e-3].iter().enumerate() {
                let mut w = sharpen(LIGHT, eta);
                w.push((invalid[k], eta));
                members.push(w);
            }
            for (k, &eta) in [1e-6, 2e-6].iter().enumerate() {
                let mut w = sharpen(LIGHT - 2 * k, eta);
                w.push((invalid[10 + k], eta));
                members.push(w);
            }
        }
        _ => unreachable!(),
    }

    while members.len() < FAMILY_SIZE {
        let k = rng.random_range(10..40);
        let pool = if members.len().is_multiple_of(2) { valid } else { &idx[..] };
        members.push(random_filler(&mut rng, pool, k));
    }
    members.shuffle(&mut rng);
    let members = members.iter().map(|w| dist(w)).collect::<Result<Vec<_>>>()?;
    let domain = (0..DOMAIN).map(Point::index).collect();
    Ok(SyntheticInstance {
        family: FiniteFamily::new(domain, members)?,
        target,
        labels,
    })
}

fn make_fractional(variant: SyntheticVariant, seed: u64) -> Result<SyntheticInstance> {
    let mut rng = stream_rng(seed, 0);
    let mut idx: Vec<u32> = (0..DOMAIN).collect();
    idx.shuffle(&mut rng);
    // 64 clean points, then graded ones
    let grades = [0.25, 0.6, 1.0];
    let mut labels = HashMap::new();
    for (k, &i) in idx.iter().enumerate() {
        let v = if k < 64 { 0.0 } else { grades[k % 3] };
        labels.insert(Point::index(i), v);
    }
    let clean: Vec<u32> = idx[..64].to_vec();
    let graded: Vec<u32> = idx[64..].iter().copied().filter(|i| labels[&Point::index(*i)] >= 0.6).collect();

    let a: Vec<(u32, f64)> = clean[..20].iter().map(|&i| (i, rng.random_range(0.5..1.5))).collect();
    let b: Vec<(u32, f64)> = graded[..12].iter().map(|&i| (i, rng.random_range(0.5..1.5))).collect();
    // target: 40% of its mass on graded points
    let mix = |a: &[(u32, f64)], b: &[(u32, f64)], b_mass: f64| -> Vec<(u32, f64)> {
        let mut w = normalized(a.to_vec(), 1.0 - b_mass);
        w.extend(normalized(b.to_vec(), b_mass));
        w
    };
    let target_w = mix(&a, &b, 0.4);
    let target = dist(&target_w)?;

    let (ca, cb) = match variant {
        SyntheticVariant::PartialAgnostic => (jitter(&mut rng, &a, 0.85, 1.15), jitter(&mut rng, &b, 0.85, 1.15)),
        _ => (a.clone(), b.clone()),
    };
    let mut members: Vec<Vec<(u32, f64)>> = Vec::new();
    if variant == SyntheticVariant::PartialMember {
        members.push(target_w.clone());
    }
    // dirty: graded mass 0.34..0.45
    for k in 0..6 {
        let bm = 0.34 + 0.02 * k as f64;
        members.push(mix(&jitter(&mut rng, &ca, 0.95, 1.05), &cb, bm));
    }
    // admissible: graded mass 0.2..0.24
    for k in 0..8 {
        let bm = 0.2 + 0.005 * k as f64;
        members.push(mix(&jitter(&mut rng, &ca, 0.95, 1.05), &jitter(&mut rng, &cb, 0.95, 1.05), bm));
    }
    for k in 0..12 {
        members.push(smoothed(&mix(&ca, &cb, 0.15), 0.05 + 0.03 * k as f64, &clean));
    }
    while members.len() < FAMILY_SIZE {
        let n = rng.random_range(10..40);
        members.push(random_filler(&mut rng, &idx, n));
    }
    members.shuffle(&mut rng);
    let members = members.iter().map(|w| dist(w)).collect::<Result<Vec<_>>>()?;
    let domain = (0..DOMAIN).map(Point::index).collect();
    Ok(SyntheticInstance {
        family: FiniteFamily::new(domain, members)?,
        target,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use vgm_core::{exact_invalidity, true_loss, LossFunction};

    #[test]
    fn shapes() {
        for v in [
            SyntheticVariant::Realizable,
            SyntheticVariant::Agnostic,
            SyntheticVariant::Shadow,
            SyntheticVariant::PartialMember,
            SyntheticVariant::PartialAgnostic,
        ] {
            let inst = make_synthetic(v, 11).unwrap();
            assert_eq!(inst.family.len(), FAMILY_SIZE);
            assert_eq!(inst.family.domain().len(), DOMAIN as usize);
            assert_eq!(inst.oracle().is_binary(), !v.is_fractional());
        }
    }

    #[test]
    fn binary_targets_are_valid_and_dirty_members_fit_better() {
        let loss = LossFunction::CappedLog { m: 5.0 };
        for v in [SyntheticVariant::Realizable, SyntheticVariant::Agnostic, SyntheticVariant::Shadow] {
            let inst = make_synthetic(v, 3).unwrap();
            let oracle = inst.oracle();
            assert_eq!(exact_invalidity(&inst.target, &oracle).unwrap(), 0.0);
            let mut best_valid = f64::INFINITY;
            let mut best_dirty = f64::INFINITY;
            for q in inst.family.members() {
                let l = true_loss(q, &inst.target, loss);
                if exact_invalidity(q, &oracle).unwrap() == 0.0 {
                    best_valid = best_valid.min(l);
                } else {
                    best_dirty = best_dirty.min(l);
                }
            }
            assert!(best_dirty < best_valid, "{v:?}: {best_dirty} vs {best_valid}");
        }
    }
}
