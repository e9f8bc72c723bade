use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgm_core::lowerbound::{
    collision_rate, evaluate_box_candidate_with, gv_packing, make_hidden_box_instance, make_needle_instance, mask_point,
    proper_search_demo, SearchInstance, Strategy,
};
use vgm_core::{exact_invalidity, Point};

fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Invalid mass of `prod {0, y'_i}`: subsets with `a` bits inside `y` and
/// `b >= 1` bits outside it, `a + b >= d/6`.
fn swapped_inv(d: u64, inside: u64, outside: u64) -> f64 {
    let mut hits = 0.0;
    for a in 0..=inside {
        for b in 1..=outside {
            if (a + b) * 6 >= d {
                hits += binom(inside, a) * binom(outside, b);
            }
        }
    }
    hits / 2f64.powi((inside + outside) as i32)
}

#[test]
fn oracle_consistency_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for d in [12, 18, 24, 36] {
        let inst = make_hidden_box_instance(d, &mut rng).unwrap();
        assert_eq!(exact_invalidity(&inst.target, &inst.oracle).unwrap(), 0.0);
        for _ in 0..10_000 {
            let x: u64 = rng.random::<u64>() & ((1u64 << d) - 1);
            let w = x.count_ones() as usize;
            let v = inst.oracle.truth(&mask_point(x, d));
            if w * 6 < d {
                assert_eq!(v, 0.0);
            }
            if w * 3 > d {
                assert_eq!(v, 1.0);
            }
        }
    }
}

#[test]
fn single_swaps_exceed_a_quarter() {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    for d in [12usize, 18, 24] {
        let inst = make_hidden_box_instance(d, &mut rng).unwrap();
        let y = inst.y;
        let want = swapped_inv(d as u64, (d / 3 - 1) as u64, 1);
        for j in (0..d).filter(|j| y >> j & 1 == 0) {
            for k in (0..d).filter(|k| y >> k & 1 == 1) {
                let cand = (y & !(1 << k)) | 1 << j;
                let e = evaluate_box_candidate_with(&inst, cand, 24, 0, &mut rng);
                assert_eq!(e.loss, (d - d / 3) as f64 / d as f64);
                assert!((e.inv - want).abs() < 1e-12, "d = {d}: {} vs {want}", e.inv);
                assert!(e.inv > 0.25);
            }
        }
    }
}

#[test]
fn exact_and_monte_carlo_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for d in [12usize, 18, 24] {
        let inst = make_hidden_box_instance(d, &mut rng).unwrap();
        for _ in 0..3 {
            let cand = inst.y | rng.random::<u64>() & ((1u64 << d) - 1) & rng.random::<u64>();
            let exact = evaluate_box_candidate_with(&inst, cand, 24, 0, &mut rng);
            let mc = evaluate_box_candidate_with(&inst, cand, 0, 50_000, &mut rng);
            assert!((exact.inv - mc.inv).abs() < 0.01);
        }
    }
}

#[test]
fn packing_reaches_three_at_d36() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pk = gv_packing(36, 3, &mut rng, 10_000).unwrap();
        assert!(pk.len() >= 3, "seed {seed}: {}", pk.len());
        assert!(pk.max_intersection() < 6);
    }
}

#[test]
fn collision_rate_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    for d in [36, 60] {
        let r = collision_rate(d, 20_000, &mut rng).unwrap();
        assert!(r.empirical > 0.0 && r.empirical < 1.0);
        assert!(r.ratio.is_finite());
    }
}

#[test]
fn needle_scan_mean_is_about_half() {
    let mut total = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = make_needle_instance(1000, None, &mut rng).unwrap();
        let r = proper_search_demo(SearchInstance::Needle(&inst), Strategy::Scan, &mut rng);
        assert_eq!(r.found, Some(inst.secret - 1));
        total += r.queries;
        assert_eq!(inst.oracle.truth(&Point::index(0)), 0.0);
    }
    let mean = total as f64 / 100.0;
    assert!((400.0..=600.0).contains(&mean), "{mean}");
}
