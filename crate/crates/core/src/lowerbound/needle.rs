use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::families::FiniteFamily;
use crate::oracle::InvalidityOracle;
use crate::point::Point;

/// Domain `{0, ..., N}`, family `q_i = (delta_0 + delta_i)/2` for
/// `i = 1..N`, target `p = delta_0`, and only `0` and the secret `i*` valid.
pub struct NeedleInstance {
    pub n: usize,
    /// Secret; kept for replay and ground-truth reports.
    pub secret: usize,
    pub family: FiniteFamily,
    pub target: DiscreteDistribution,
    pub oracle: InvalidityOracle,
}

#[derive(Serialize, Deserialize)]
struct NeedleRecord {
    n: usize,
    secret_index: usize,
}

impl Serialize for NeedleInstance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        NeedleRecord {
            n: self.n,
            secret_index: self.secret,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NeedleInstance {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let rec = NeedleRecord::deserialize(de)?;
        let mut rng = crate::rng::stream_rng(0, 0);
        make_needle_instance(rec.n, Some(rec.secret_index), &mut rng).map_err(serde::de::Error::custom)
    }
}

/// Family member `q_i` is at index `i - 1`. Without `secret`, `i*` is drawn
/// uniformly from `1..=N`.
pub fn make_needle_instance(n: usize, secret: Option<usize>, rng: &mut dyn RngCore) -> Result<NeedleInstance> {
    if n == 0 || n >= u32::MAX as usize {
        return Err(Error::Precondition(format!("needle size {n} out of range")));
    }
    let secret = match secret {
        Some(s) if (1..=n).contains(&s) => s,
        Some(s) => return Err(Error::Precondition(format!("secret index {s} outside 1..={n}"))),
        None => rng.random_range(1..=n),
    };
    let domain: Vec<Point> = (0..=n as u32).map(Point::index).collect();
    let members = (1..=n as u32)
        .map(|i| DiscreteDistribution::new([(Point::index(0), 0.5), (Point::index(i), 0.5)]))
        .collect::<Result<Vec<_>>>()?;
    let family = FiniteFamily::new(domain, members)?;
    let target = DiscreteDistribution::point_mass(Point::index(0));
    let s = secret as u32;
    let oracle = InvalidityOracle::binary(move |x: &Point| match x.coords() {
        Some([0]) => 0.0,
        Some([i]) if *i == s => 0.0,
        _ => 1.0,
    });
    Ok(NeedleInstance {
        n,
        secret,
        family,
        target,
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{true_loss, LossFunction};
    use crate::oracle::exact_invalidity;

    #[test]
    fn labels() {
        let mut rng = crate::rng::stream_rng(5, 0);
        let inst = make_needle_instance(50, None, &mut rng).unwrap();
        assert_eq!(inst.oracle.truth(&Point::index(0)), 0.0);
        assert_eq!(inst.oracle.truth(&Point::index(inst.secret as u32)), 0.0);
        let invalid = (1..=50u32).filter(|&i| inst.oracle.truth(&Point::index(i)) == 1.0).count();
        assert_eq!(invalid, 49);
        assert!(make_needle_instance(50, Some(0), &mut rng).is_err());
        assert!(make_needle_instance(50, Some(51), &mut rng).is_err());
    }

    #[test]
    fn point_mass_at_zero_is_optimal_and_valid() {
        let mut rng = crate::rng::stream_rng(6, 0);
        let inst = make_needle_instance(10, Some(3), &mut rng).unwrap();
        let zero = DiscreteDistribution::point_mass(Point::index(0));
        assert_eq!(exact_invalidity(&zero, &inst.oracle).unwrap(), 0.0);
        assert_eq!(true_loss(&zero, &inst.target, LossFunction::Coverage), 0.0);
        let json = serde_json::to_string(&inst).unwrap();
        let back: NeedleInstance = serde_json::from_str(&json).unwrap();
        assert_eq!(back.secret, 3);
    }
}
