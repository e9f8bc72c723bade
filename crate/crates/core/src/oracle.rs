//! Counted access to the invalidity function.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::RngCore;

use crate::distribution::{DiscreteDistribution, Generative};
use crate::error::{Error, Result};
use crate::point::Point;

pub type Rule = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Invalidity labels `Inv: X -> [0, 1]` behind a query counter.
///
/// Learners only see [`query`](Self::query), which counts. Ground-truth
/// evaluation in tests and reports goes through [`truth`](Self::truth),
/// which does not.
pub struct InvalidityOracle {
    rule: Rule,
    binary: bool,
    queries: AtomicU64,
    log: Option<Mutex<Vec<(Point, f64)>>>,
}

impl InvalidityOracle {
    pub fn binary<F>(rule: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Self::from_rule(Arc::new(rule), true)
    }

    pub fn fractional<F>(rule: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Self::from_rule(Arc::new(rule), false)
    }

    pub fn from_rule(rule: Rule, binary: bool) -> Self {
        Self {
            rule,
            binary,
            queries: AtomicU64::new(0),
            log: None,
        }
    }

    /// Explicit table; points absent from the table get `default`.
    pub fn from_table(table: HashMap<Point, f64>, default: f64) -> Self {
        let binary = default == 0.0 || default == 1.0;
        let binary = binary && table.values().all(|&v| v == 0.0 || v == 1.0);
        let rule = move |x: &Point| table.get(x).copied().unwrap_or(default);
        Self::from_rule(Arc::new(rule), binary)
    }

    pub fn with_log(mut self) -> Self {
        self.log = Some(Mutex::new(Vec::new()));
        self
    }

    /// Same rule, fresh counter and log.
    pub fn fork(&self) -> Self {
        Self {
            rule: Arc::clone(&self.rule),
            binary: self.binary,
            queries: AtomicU64::new(0),
            log: self.log.as_ref().map(|_| Mutex::new(Vec::new())),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    /// Counted query.
    pub fn query(&self, x: &Point) -> f64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let v = (self.rule)(x);
        if let Some(log) = &self.log {
            log.lock().expect("query log poisoned").push((x.clone(), v));
        }
        v
    }

    /// Uncounted evaluation, for exact bookkeeping outside the learner.
    pub fn truth(&self, x: &Point) -> f64 {
        (self.rule)(x)
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn take_log(&self) -> Vec<(Point, f64)> {
        self.log
            .as_ref()
            .map(|l| std::mem::take(&mut *l.lock().expect("query log poisoned")))
            .unwrap_or_default()
    }

    /// Checks that every support point of `p` is fully valid.
    pub fn check_valid_target(&self, p: &DiscreteDistribution) -> Result<()> {
        match p.points().iter().find(|x| self.truth(x) != 0.0) {
            Some(x) => Err(Error::Precondition(format!(
                "target support point {x} has nonzero invalidity"
            ))),
            None => Ok(()),
        }
    }
}

impl fmt::Debug for InvalidityOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InvalidityOracle")
            .field("binary", &self.binary)
            .field("queries", &self.queries())
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvalidityMode {
    /// `sum_x q_x Inv(x)` over the enumerated support; no queries counted.
    Exact,
    /// Mean of `Inv` over this many samples from `q`, one query each.
    MonteCarlo { samples: usize },
}

/// `Inv(q) = E_{x~q}[Inv(x)]`.
pub fn invalidity<G: Generative + ?Sized>(
    q: &G,
    oracle: &InvalidityOracle,
    mode: InvalidityMode,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    match mode {
        InvalidityMode::Exact => exact_invalidity(q, oracle),
        InvalidityMode::MonteCarlo { samples } => {
            if samples == 0 {
                return Err(Error::Precondition("Monte Carlo invalidity needs T >= 1".into()));
            }
            let sum: f64 = (0..samples).map(|_| oracle.query(&q.sample(rng))).sum();
            Ok(sum / samples as f64)
        }
    }
}

pub fn exact_invalidity<G: Generative + ?Sized>(q: &G, oracle: &InvalidityOracle) -> Result<f64> {
    let support = q.support().ok_or(Error::NotEnumerable)?;
    Ok(support.iter().map(|(x, w)| w * oracle.truth(x)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn odd_invalid() -> InvalidityOracle {
        InvalidityOracle::binary(|x: &Point| (x.weight() % 2) as f64)
    }

    struct Opaque;
    impl Generative for Opaque {
        fn sample(&self, _: &mut dyn RngCore) -> Point {
            Point::index(0)
        }
        fn density(&self, _: &Point) -> f64 {
            0.0
        }
        fn support(&self) -> Option<Vec<(Point, f64)>> {
            None
        }
    }

    #[test]
    fn point_masses() {
        let o = odd_invalid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bad = DiscreteDistribution::point_mass(Point::index(1));
        let good = DiscreteDistribution::point_mass(Point::index(2));
        for mode in [InvalidityMode::Exact, InvalidityMode::MonteCarlo { samples: 50 }] {
            assert_eq!(invalidity(&bad, &o, mode, &mut rng).unwrap(), 1.0);
            assert_eq!(invalidity(&good, &o, mode, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn monte_carlo_counts_queries() {
        let o = odd_invalid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let half = DiscreteDistribution::uniform([Point::index(1), Point::index(2)]).unwrap();
        let before = o.queries();
        let est = invalidity(&half, &o, InvalidityMode::MonteCarlo { samples: 10_000 }, &mut rng).unwrap();
        assert_eq!(o.queries() - before, 10_000);
        assert!((est - 0.5).abs() <= 0.02, "{est}");
        // exact mode reads the truth without touching the counter
        assert_eq!(invalidity(&half, &o, InvalidityMode::Exact, &mut rng).unwrap(), 0.5);
        assert_eq!(o.queries() - before, 10_000);
    }

    #[test]
    fn exact_needs_enumeration() {
        let o = odd_invalid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(matches!(
            invalidity(&Opaque, &o, InvalidityMode::Exact, &mut rng),
            Err(Error::NotEnumerable)
        ));
        assert!(invalidity(&Opaque, &o, InvalidityMode::MonteCarlo { samples: 0 }, &mut rng).is_err());
    }

    #[test]
    fn table_oracle_and_log() {
        let mut t = HashMap::new();
        t.insert(Point::index(3), 1.0);
        let o = InvalidityOracle::from_table(t, 0.0).with_log();
        assert!(o.is_binary());
        assert_eq!(o.query(&Point::index(3)), 1.0);
        assert_eq!(o.query(&Point::index(4)), 0.0);
        assert_eq!(o.take_log().len(), 2);
        let f = o.fork();
        assert_eq!(f.queries(), 0);
        assert_eq!(f.truth(&Point::index(3)), 1.0);
    }

    #[test]
    fn target_validity_check() {
        let o = odd_invalid();
        let p = DiscreteDistribution::uniform([Point::index(0), Point::index(2)]).unwrap();
        assert!(o.check_valid_target(&p).is_ok());
        let p = DiscreteDistribution::uniform([Point::index(0), Point::index(1)]).unwrap();
        assert!(o.check_valid_target(&p).is_err());
    }
}
