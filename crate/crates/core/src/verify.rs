//! Checking a candidate against the loss and validity targets, and
//! boosting a constant-probability learner by repetition.
//!
//! Sample sizes come from Hoeffding (loss on `[0, M]`, accuracy `eps1/2`
//! with probability `1 - delta/2`) and a multiplicative Chernoff bound on
//! the invalid fraction. A candidate passes the validity test when the
//! empirical invalid fraction is at most `2 * eps2`: true invalidity at
//! most `eps2` passes and at least `4 * eps2` fails, each with probability
//! at least `1 - delta/2`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::distribution::Generative;
use crate::error::{Error, Result};
use crate::loss::LossFunction;
use crate::oracle::InvalidityOracle;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub loss: LossFunction,
    pub eps1: f64,
    pub eps2: f64,
    pub delta: f64,
    /// Largest acceptable loss estimate.
    pub loss_threshold: f64,
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Precondition(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }

    /// `ceil(2 M^2 / eps1^2 * ln(4/delta))`.
    pub fn loss_samples(&self) -> usize {
        let m = self.loss.bound();
        (2.0 * m * m / (self.eps1 * self.eps1) * (4.0 / self.delta).ln()).ceil() as usize
    }

    /// `ceil(3 / eps2 * ln(4/delta))`.
    pub fn validity_samples(&self) -> usize {
        (3.0 / self.eps2 * (4.0 / self.delta).ln()).ceil() as usize
    }

    pub fn inv_threshold(&self) -> f64 {
        2.0 * self.eps2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub loss_estimate: f64,
    pub inv_estimate: f64,
    pub samples_used: u64,
    pub queries_used: u64,
    pub passed: bool,
    pub loss_threshold: f64,
    pub inv_threshold: f64,
}

pub fn verify_candidate<G, P>(
    q: &G,
    p: &P,
    oracle: &InvalidityOracle,
    cfg: &VerifyConfig,
    rng: &mut dyn RngCore,
) -> Result<VerificationReport>
where
    G: Generative + ?Sized,
    P: Generative + ?Sized,
{
    cfg.validate()?;
    let n_loss = cfg.loss_samples();
    let loss_sum: f64 = (0..n_loss)
        .map(|_| {
            let x = p.sample(rng);
            cfg.loss.value(q.density(&x).clamp(0.0, 1.0))
        })
        .sum();
    let loss_estimate = loss_sum / n_loss as f64;

    let n_inv = cfg.validity_samples();
    let before = oracle.queries();
    let inv_sum: f64 = (0..n_inv).map(|_| oracle.query(&q.sample(rng))).sum();
    let queries_used = oracle.queries() - before;
    let inv_estimate = inv_sum / n_inv as f64;

    let inv_threshold = cfg.inv_threshold();
    Ok(VerificationReport {
        loss_estimate,
        inv_estimate,
        samples_used: n_loss as u64,
        queries_used,
        passed: loss_estimate <= cfg.loss_threshold && inv_estimate <= inv_threshold,
        loss_threshold: cfg.loss_threshold,
        inv_threshold,
    })
}

/// Repetitions for a learner that succeeds with probability 3/4:
/// `ceil(ln(1/delta) / ln(4/3))`.
pub fn default_max_reps(delta: f64) -> usize {
    ((1.0 / delta).ln() / (4.0f64 / 3.0).ln()).ceil().max(1.0) as usize
}

#[derive(Debug)]
pub struct Amplified<C> {
    pub candidate: C,
    /// 1-based repetition that produced the accepted candidate.
    pub repetitions: usize,
    pub reports: Vec<Option<VerificationReport>>,
    /// Positive samples drawn by verification across all repetitions.
    pub samples_used: u64,
    /// Oracle counter delta over the whole call, learner queries included
    /// when the learner shares the oracle.
    pub queries_used: u64,
}

/// Runs `learner` until a candidate passes verification.
///
/// A learner error counts as a failed repetition and is recorded as `None`.
pub fn amplify<C, F, P>(
    mut learner: F,
    p: &P,
    oracle: &InvalidityOracle,
    cfg: &VerifyConfig,
    max_reps: usize,
    rng: &mut dyn RngCore,
) -> Result<Amplified<C>>
where
    C: Generative,
    F: FnMut(&mut dyn RngCore) -> Result<C>,
    P: Generative + ?Sized,
{
    cfg.validate()?;
    if max_reps == 0 {
        return Err(Error::Precondition("max_reps must be positive".into()));
    }
    let start = oracle.queries();
    let mut reports = Vec::with_capacity(max_reps);
    let mut samples_used = 0;
    for rep in 1..=max_reps {
        let candidate = match learner(rng) {
            Ok(c) => c,
            Err(_) => {
                reports.push(None);
                continue;
            }
        };
        let report = verify_candidate(&candidate, p, oracle, cfg, rng)?;
        samples_used += report.samples_used;
        let passed = report.passed;
        reports.push(Some(report));
        if passed {
            return Ok(Amplified {
                candidate,
                repetitions: rep,
                reports,
                samples_used,
                queries_used: oracle.queries() - start,
            });
        }
    }
    Err(Error::AmplificationExhausted { reports })
}
