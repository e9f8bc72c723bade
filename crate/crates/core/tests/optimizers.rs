use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgm_core::families::{gmn_oracle_box, gmn_oracle_finite, BoxFamily, FiniteFamily, NegativeSet};
use vgm_core::{DiscreteDistribution, LossFunction, Point, PointBag};

fn capped(m: f64, q: f64) -> f64 {
    if q <= 0.0 {
        m
    } else {
        (-q.ln()).min(m)
    }
}

fn random_family(rng: &mut ChaCha8Rng, n_members: usize, n_points: u32) -> FiniteFamily {
    let members = (0..n_members)
        .map(|_| {
            let k = rng.random_range(1..=n_points.min(12));
            let pts: BTreeSet<u32> = (0..k).map(|_| rng.random_range(0..n_points)).collect();
            DiscreteDistribution::from_weights(pts.into_iter().map(|i| (Point::index(i), rng.random_range(0.1..1.0))))
                .unwrap()
        })
        .collect();
    FiniteFamily::new((0..n_points).map(Point::index).collect(), members).unwrap()
}

/// Sort by loss (stable, so ties keep index order), then take the first
/// member whose support avoids every negative.
fn brute_force(family: &FiniteFamily, xp: &[Point], xn: &NegativeSet, m: f64) -> Option<usize> {
    let mut scored: Vec<(f64, usize)> = family
        .members()
        .enumerate()
        .map(|(i, q)| (xp.iter().map(|x| capped(m, q.prob(x))).sum::<f64>() / xp.len() as f64, i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored
        .into_iter()
        .find(|&(_, i)| xn.iter().all(|x| family.member(i).prob(x) == 0.0))
        .map(|(_, i)| i)
}

#[test]
fn finite_oracle_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let loss = LossFunction::CappedLog { m: 5.0 };
    let mut infeasible = 0;
    for _ in 0..100 {
        let n_points = rng.random_range(1..=128);
        let n_members = rng.random_range(1..=64);
        let family = random_family(&mut rng, n_members, n_points);
        let xp: Vec<Point> = (0..rng.random_range(1..50)).map(|_| Point::index(rng.random_range(0..n_points))).collect();
        let xn: NegativeSet = (0..rng.random_range(0..10)).map(|_| Point::index(rng.random_range(0..n_points))).collect();
        let got = gmn_oracle_finite(&family, &PointBag::from_points(&xp), &xn, loss).ok().map(|(i, _)| i);
        let want = brute_force(&family, &xp, &xn, 5.0);
        // sums are taken in different orders; only compare clear winners
        assert_eq!(got.is_some(), want.is_some());
        if let (Some(g), Some(w)) = (got, want) {
            if g != w {
                let l = |i: usize| xp.iter().map(|x| capped(5.0, family.member(i).prob(x))).sum::<f64>();
                assert!((l(g) - l(w)).abs() < 1e-9, "{g} vs {w}");
            }
        } else {
            infeasible += 1;
        }
    }
    assert!(infeasible < 100);
}

fn box_loss(lo: &[u32], hi: &[u32], xp: &[Vec<u32>], m: f64) -> f64 {
    let vol: u64 = lo.iter().zip(hi).map(|(l, h)| (h - l + 1) as u64).product();
    xp.iter()
        .map(|x| {
            let inside = x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h);
            capped(m, if inside { 1.0 / vol as f64 } else { 0.0 })
        })
        .sum::<f64>()
        / xp.len() as f64
}

#[test]
fn box_oracle_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let loss = LossFunction::CappedLog { m: 4.0 };
    for _ in 0..60 {
        let d = rng.random_range(1..=2);
        let delta = rng.random_range(1..=8u32);
        let xp: Vec<Vec<u32>> = (0..rng.random_range(1..12))
            .map(|_| (0..d).map(|_| rng.random_range(0..delta)).collect())
            .collect();
        let xn: NegativeSet = (0..rng.random_range(0..4))
            .map(|_| Point::grid((0..d).map(|_| rng.random_range(0..delta))))
            .collect();
        let best = BoxFamily { d, delta }
            .iter()
            .filter(|b| xn.iter().all(|x| !b.contains(x)))
            .map(|b| box_loss(&b.lo, &b.hi, &xp, 4.0))
            .min_by(f64::total_cmp);
        let bag = PointBag::from_owned(xp.iter().map(|c| Point::grid(c.iter().copied())));
        match (gmn_oracle_box(&bag, &xn, loss, d, delta), best) {
            (Ok((b, _)), Some(want)) => {
                assert!(xn.iter().all(|x| !b.contains(x)));
                assert_eq!(box_loss(&b.lo, &b.hi, &xp, 4.0), want);
            }
            (Err(_), None) => {}
            (got, want) => panic!("oracle {got:?} vs enumeration {want:?}"),
        }
    }
}

proptest! {
    #[test]
    fn finite_oracle_output_avoids_negatives(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = random_family(&mut rng, 16, 20);
        let xp: Vec<Point> = (0..10).map(|_| Point::index(rng.random_range(0..20))).collect();
        let xn: NegativeSet = (0..3).map(|_| Point::index(rng.random_range(0..20))).collect();
        if let Ok((i, l)) = gmn_oracle_finite(&family, &PointBag::from_points(&xp), &xn, LossFunction::Coverage) {
            prop_assert!(xn.iter().all(|x| !family.member(i).contains(x)));
            prop_assert!((0.0..=1.0).contains(&l));
        }
    }
}
