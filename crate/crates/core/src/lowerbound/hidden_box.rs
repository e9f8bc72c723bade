use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{mask_point, point_mask};
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::families::BoxDistribution;
use crate::loss::LossFunction;
use crate::oracle::InvalidityOracle;
use crate::point::Point;

/// Above this many free coordinates the candidate's invalidity is estimated.
pub const EXACT_BITS_LIMIT: u32 = 24;

const MC_SAMPLES: usize = 200_000;

/// Secret `y` of weight `d/3` hidden behind `Inv(x) = 0` iff `|x| < d/6` or
/// `x <= y` coordinatewise.
///
/// `p` is uniform over the standard basis vectors and the loss is coverage,
/// so the box `prod_i {0, y_i}` is valid with loss exactly 2/3.
pub struct HiddenBoxInstance {
    pub d: usize,
    /// Secret; kept for replay and ground-truth reports.
    pub y: u64,
    pub target: DiscreteDistribution,
    pub oracle: InvalidityOracle,
    pub loss: LossFunction,
}

#[derive(Serialize, Deserialize)]
struct HiddenBoxRecord {
    d: usize,
    secret_y: Vec<u8>,
}

impl Serialize for HiddenBoxInstance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        HiddenBoxRecord {
            d: self.d,
            secret_y: (0..self.d).map(|i| ((self.y >> i) & 1) as u8).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HiddenBoxInstance {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let rec = HiddenBoxRecord::deserialize(de)?;
        if rec.secret_y.len() != rec.d || rec.secret_y.iter().any(|&b| b > 1) {
            return Err(serde::de::Error::custom("secret_y must be a 0/1 vector of length d"));
        }
        let y = rec
            .secret_y
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &b)| m | (u64::from(b) << i));
        HiddenBoxInstance::with_secret(rec.d, y).map_err(serde::de::Error::custom)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if !d.is_multiple_of(6) || !(12..=64).contains(&d) {
        return Err(Error::Precondition(format!(
            "hidden-box dimension must be a multiple of 6 in [12, 64], got {d}"
        )));
    }
    Ok(())
}

pub(crate) fn hidden_box_inv(x: u64, y: u64, d: usize) -> f64 {
    if (x.count_ones() as usize) * 6 < d || x & !y == 0 {
        0.0
    } else {
        1.0
    }
}

impl HiddenBoxInstance {
    pub fn with_secret(d: usize, y: u64) -> Result<Self> {
        check_dim(d)?;
        if y >> d != 0 || y.count_ones() as usize * 3 != d {
            return Err(Error::Precondition(format!("secret must have weight {} within {d} bits", d / 3)));
        }
        let target = DiscreteDistribution::uniform((0..d).map(|i| mask_point(1 << i, d)))?;
        let oracle = InvalidityOracle::binary(move |x: &Point| match point_mask(x) {
            Some(m) if x.dim() == Some(d) => hidden_box_inv(m, y, d),
            _ => 1.0,
        });
        Ok(Self {
            d,
            y,
            target,
            oracle,
            loss: LossFunction::Coverage,
        })
    }

    pub fn secret_point(&self) -> Point {
        mask_point(self.y, self.d)
    }
}

/// Uniform vector of weight `w` in `{0,1}^d`.
pub fn random_weight_vector(d: usize, w: usize, rng: &mut dyn RngCore) -> u64 {
    let mut rng = rng;
    index::sample(&mut rng, d, w).into_iter().fold(0u64, |m, i| m | 1 << i)
}

/// `d` must be a multiple of 6 in `[12, 64]`. At `d = 6` a basis vector
/// outside `y` would already be invalid.
pub fn make_hidden_box_instance(d: usize, rng: &mut dyn RngCore) -> Result<HiddenBoxInstance> {
    check_dim(d)?;
    HiddenBoxInstance::with_secret(d, random_weight_vector(d, d / 3, rng))
}

/// The box `prod_i {0, y'_i}`.
pub fn box_for(y_prime: u64, d: usize) -> BoxDistribution {
    let lo = (0..d).map(|_| 0).collect();
    let hi = (0..d).map(|i| ((y_prime >> i) & 1) as u32).collect();
    BoxDistribution::new(lo, hi).expect("0 <= y'_i")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMethod {
    Exact,
    MonteCarlo { samples: usize },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CandidateEval {
    pub loss: f64,
    pub inv: f64,
    pub method: EvalMethod,
}

/// Coverage loss and invalidity of the box `prod_i {0, y'_i}`.
pub fn evaluate_box_candidate(inst: &HiddenBoxInstance, y_prime: u64, rng: &mut dyn RngCore) -> CandidateEval {
    evaluate_box_candidate_with(inst, y_prime, EXACT_BITS_LIMIT, MC_SAMPLES, rng)
}

pub fn evaluate_box_candidate_with(
    inst: &HiddenBoxInstance,
    y_prime: u64,
    exact_limit: u32,
    samples: usize,
    rng: &mut dyn RngCore,
) -> CandidateEval {
    let d = inst.d;
    let y_prime = y_prime & low_bits(d);
    let s = y_prime.count_ones();
    let loss = (d - s as usize) as f64 / d as f64;
    if s <= exact_limit {
        let mut invalid = 0u64;
        let mut sub = y_prime;
        loop {
            if hidden_box_inv(sub, inst.y, d) == 1.0 {
                invalid += 1;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & y_prime;
        }
        CandidateEval {
            loss,
            inv: invalid as f64 / (1u64 << s) as f64,
            method: EvalMethod::Exact,
        }
    } else {
        let invalid = (0..samples)
            .filter(|_| hidden_box_inv(rng.random::<u64>() & y_prime, inst.y, d) == 1.0)
            .count();
        CandidateEval {
            loss,
            inv: invalid as f64 / samples as f64,
            method: EvalMethod::MonteCarlo { samples },
        }
    }
}

fn low_bits(d: usize) -> u64 {
    if d >= 64 {
        u64::MAX
    } else {
        (1u64 << d) - 1
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GvPacking {
    pub d: usize,
    pub codewords: Vec<u64>,
    pub attempts: usize,
    pub target_size: usize,
}

impl GvPacking {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn reached_target(&self) -> bool {
        self.codewords.len() >= self.target_size
    }

    /// Largest pairwise intersection, or 0 for fewer than two codewords.
    pub fn max_intersection(&self) -> u32 {
        let c = &self.codewords;
        (0..c.len())
            .flat_map(|a| (a + 1..c.len()).map(move |b| (c[a] & c[b]).count_ones()))
            .max()
            .unwrap_or(0)
    }
}

/// Weight-`d/3` vectors with pairwise intersections below `d/6`, by
/// rejection sampling. Stops at `target_size` codewords or after
/// `max_attempts` draws, whichever comes first.
pub fn gv_packing(d: usize, target_size: usize, rng: &mut dyn RngCore, max_attempts: usize) -> Result<GvPacking> {
    if !d.is_multiple_of(6) || d == 0 || d > 64 {
        return Err(Error::Precondition(format!("packing dimension must be a multiple of 6 in [6, 64], got {d}")));
    }
    let limit = (d / 6) as u32;
    let mut codewords: Vec<u64> = Vec::new();
    let mut attempts = 0;
    while codewords.len() < target_size && attempts < max_attempts {
        attempts += 1;
        let v = random_weight_vector(d, d / 3, rng);
        if codewords.iter().all(|&c| (c & v).count_ones() < limit) {
            codewords.push(v);
        }
    }
    let out = GvPacking {
        d,
        codewords,
        attempts,
        target_size,
    };
    assert!(out.len() < 2 || out.max_intersection() < limit);
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CollisionReport {
    pub d: usize,
    pub pairs: usize,
    pub collisions: usize,
    pub empirical: f64,
    /// `e^{-d/108}`.
    pub bound: f64,
    /// `empirical / bound`.
    pub ratio: f64,
}

/// Frequency with which two independent weight-`d/3` vectors share at
/// least `d/6` coordinates.
pub fn collision_rate(d: usize, pairs: usize, rng: &mut dyn RngCore) -> Result<CollisionReport> {
    if !d.is_multiple_of(6) || d == 0 || d > 64 || pairs == 0 {
        return Err(Error::Precondition(format!("need d a multiple of 6 in [6, 64] and pairs > 0, got d = {d}")));
    }
    let limit = (d / 6) as u32;
    let collisions = (0..pairs)
        .filter(|_| {
            let a = random_weight_vector(d, d / 3, rng);
            let b = random_weight_vector(d, d / 3, rng);
            (a & b).count_ones() >= limit
        })
        .count();
    let empirical = collisions as f64 / pairs as f64;
    let bound = (-(d as f64) / 108.0).exp();
    Ok(CollisionReport {
        d,
        pairs,
        collisions,
        empirical,
        bound,
        ratio: empirical / bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn rejects_bad_dimensions() {
        let mut rng = stream_rng(0, 0);
        for d in [0, 5, 6, 13, 66] {
            assert!(make_hidden_box_instance(d, &mut rng).is_err(), "d = {d}");
        }
        assert!(make_hidden_box_instance(12, &mut rng).is_ok());
    }

    #[test]
    fn construction_examples() {
        let mut rng = stream_rng(1, 0);
        let inst = make_hidden_box_instance(12, &mut rng).unwrap();
        assert_eq!(inst.y.count_ones(), 4);
        for i in 0..12 {
            assert_eq!(inst.oracle.truth(&mask_point(1 << i, 12)), 0.0);
        }
        assert_eq!(inst.oracle.truth(&inst.secret_point()), 0.0);
        // weight d/3 with one coordinate outside y
        let j = (0..12).find(|j| inst.y >> j & 1 == 0).unwrap();
        let k = (0..12).find(|k| inst.y >> k & 1 == 1).unwrap();
        let moved = (inst.y & !(1 << k)) | 1 << j;
        assert_eq!(inst.oracle.truth(&mask_point(moved, 12)), 1.0);
        assert_eq!(inst.oracle.queries(), 0);
    }

    #[test]
    fn candidate_examples() {
        let mut rng = stream_rng(2, 0);
        let inst = HiddenBoxInstance::with_secret(12, 0b1111).unwrap();
        let e = evaluate_box_candidate(&inst, inst.y, &mut rng);
        assert_eq!((e.loss, e.inv), (2.0 / 3.0, 0.0));
        let e = evaluate_box_candidate(&inst, 0, &mut rng);
        assert_eq!((e.loss, e.inv), (1.0, 0.0));
        // x_j = 1 and at least one of the 3 kept bits: (1/2)(7/8)
        let e = evaluate_box_candidate(&inst, 0b1_0111, &mut rng);
        assert_eq!(e.inv, 7.0 / 16.0);
        assert_eq!(e.method, EvalMethod::Exact);
    }

    #[test]
    fn monte_carlo_path_agrees() {
        let mut rng = stream_rng(3, 0);
        let inst = make_hidden_box_instance(24, &mut rng).unwrap();
        let j = (0..24).find(|j| inst.y >> j & 1 == 0).unwrap();
        let cand = inst.y | 1 << j;
        let exact = evaluate_box_candidate_with(&inst, cand, 24, 0, &mut rng);
        let mc = evaluate_box_candidate_with(&inst, cand, 0, 100_000, &mut rng);
        assert!((exact.inv - mc.inv).abs() < 0.01);
    }

    #[test]
    fn packing_property_and_serde() {
        let mut rng = stream_rng(4, 0);
        let pk = gv_packing(36, 5, &mut rng, 10_000).unwrap();
        assert!(pk.max_intersection() < 6);
        let inst = make_hidden_box_instance(18, &mut rng).unwrap();
        let json = serde_json::to_string(&inst).unwrap();
        let back: HiddenBoxInstance = serde_json::from_str(&json).unwrap();
        assert_eq!(back.y, inst.y);
    }
}
