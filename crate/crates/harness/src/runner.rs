//! Seeded multi-trial execution.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use vgm_core::families::{BoxFamily, BoxOracle, FiniteOracle, NgramOracle};
use vgm_core::learners::{partial_validity_learn, proper_box_learn, vgm_learn, VgmOutput, VgmRun};
use vgm_core::rng::stream_rng;
use vgm_core::{empirical_loss_bag, exact_invalidity, true_loss, Error, Generative, Point};

use crate::config::{ConfigError, LearnerKind, ScenarioConfig};
use crate::instance::{Family, Instance, Prepared};
use crate::outputs::{describe_box, describe_vgm, OutputRecord};

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub learner: String,
    pub output_kind: String,
    pub loss_true: Option<f64>,
    pub loss_est: Option<f64>,
    pub inv_true: Option<f64>,
    pub inv_est: Option<f64>,
    pub opt_loss: Option<f64>,
    pub samples: u64,
    pub queries: u64,
    pub rounds: usize,
    pub wall_ms: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialOutcome {
    pub report: TrialReport,
    /// Met both the loss and the invalidity threshold; `None` without OPT.
    pub success: Option<bool>,
    pub error: Option<String>,
    /// Oracle counter after the trial; equals `report.queries`.
    pub oracle_counter: u64,
    pub secret: Option<String>,
    pub output: Option<OutputRecord>,
    /// Scenario-specific measurements.
    pub extras: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub jobs: usize,
    pub timing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Totals {
    pub samples: u64,
    pub queries: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialError {
    pub trial: usize,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub version: u32,
    pub scenario: String,
    pub learner: String,
    pub instance: String,
    pub base_seed: u64,
    pub trials: usize,
    pub completed: usize,
    pub errors: Vec<TrialError>,
    pub opt_loss: Option<f64>,
    /// Success needs `loss_true <= opt + loss_slack` ...
    pub loss_slack: f64,
    /// ... and `inv_true <= inv_bound`.
    pub inv_bound: f64,
    pub successes: Option<usize>,
    pub success_fraction: Option<f64>,
    pub min_success_fraction: Option<f64>,
    pub totals: Totals,
    pub mean_loss_true: Option<f64>,
    pub mean_inv_true: Option<f64>,
    pub max_rounds: usize,
    pub max_queries: u64,
}

impl Summary {
    pub fn breached(&self) -> bool {
        match (self.min_success_fraction, self.success_fraction) {
            (Some(min), Some(f)) => f < min,
            (Some(_), None) => self.trials > 0,
            _ => false,
        }
    }
}

#[derive(Debug)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub outcomes: Vec<TrialOutcome>,
    pub summary: Summary,
}

pub fn inv_bound(cfg: &ScenarioConfig) -> f64 {
    cfg.alpha.unwrap_or(0.0) + cfg.eps2
}

pub fn run_scenario(cfg: &ScenarioConfig, opts: RunOptions) -> Result<ScenarioResult, ConfigError> {
    cfg.validate()?;
    let prepared = Prepared::new(cfg)?;
    let run = |t: usize| run_trial(cfg, &prepared, t, opts.timing);
    let mut outcomes: Vec<TrialOutcome> = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| ConfigError::Field {
                field: "--jobs".into(),
                message: e.to_string(),
            })?;
        pool.install(|| (0..cfg.trials).into_par_iter().map(run).collect())
    } else {
        (0..cfg.trials).map(run).collect()
    };
    outcomes.sort_by_key(|o| o.report.trial);
    let summary = summarize(cfg, &prepared, &outcomes);
    Ok(ScenarioResult {
        config: cfg.clone(),
        outcomes,
        summary,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn summarize(cfg: &ScenarioConfig, prepared: &Prepared, outcomes: &[TrialOutcome]) -> Summary {
    let opt_loss = match prepared {
        Prepared::Fixed(inst) => inst.opt_loss,
        _ => None,
    };
    let judged: Vec<bool> = outcomes.iter().filter_map(|o| o.success.or(o.error.as_ref().map(|_| false))).collect();
    let has_opt = outcomes.iter().any(|o| o.success.is_some());
    let successes = has_opt.then(|| judged.iter().filter(|&&s| s).count());
    let success_fraction = match successes {
        Some(s) if !outcomes.is_empty() => Some(s as f64 / outcomes.len() as f64),
        _ => None,
    };
    let reports = || outcomes.iter().map(|o| &o.report);
    Summary {
        version: crate::config::CONFIG_VERSION,
        scenario: cfg.scenario.clone(),
        learner: cfg.learner.name().into(),
        instance: cfg.instance.kind().into(),
        base_seed: cfg.base_seed,
        trials: cfg.trials,
        completed: outcomes.iter().filter(|o| o.error.is_none()).count(),
        errors: outcomes
            .iter()
            .filter_map(|o| {
                o.error.as_ref().map(|m| TrialError {
                    trial: o.report.trial,
                    message: m.clone(),
                })
            })
            .collect(),
        opt_loss,
        loss_slack: cfg.eps1,
        inv_bound: inv_bound(cfg),
        successes,
        success_fraction,
        min_success_fraction: cfg.min_success_fraction,
        totals: Totals {
            samples: reports().map(|r| r.samples).sum(),
            queries: reports().map(|r| r.queries).sum(),
        },
        mean_loss_true: mean(reports().filter_map(|r| r.loss_true)),
        mean_inv_true: mean(reports().filter_map(|r| r.inv_true)),
        max_rounds: reports().map(|r| r.rounds).max().unwrap_or(0),
        max_queries: reports().map(|r| r.queries).max().unwrap_or(0),
    }
}

/// Ground truth for an arbitrary output.
struct Truth {
    loss: Option<f64>,
    inv: Option<f64>,
}

fn truth<G: Generative>(q: &G, inst: &Instance, cfg: &ScenarioConfig, rng: &mut dyn RngCore) -> Truth {
    let loss = Some(true_loss(q, &inst.target, cfg.loss)).filter(|l| l.is_finite());
    let inv = match exact_invalidity(q, &inst.oracle) {
        Ok(v) => Some(v),
        Err(Error::NotEnumerable) => {
            let n = cfg.eval.invalidity_samples.max(1);
            let s: f64 = (0..n).map(|_| inst.oracle.truth(&q.sample(rng))).sum();
            Some(s / n as f64)
        }
        Err(_) => None,
    };
    Truth { loss, inv }
}

fn emit_zero<G: Generative>(q: &G, n: usize, extras: &mut BTreeMap<String, f64>, rng: &mut dyn RngCore) {
    let zero = Point::index(0);
    extras.insert("emit_zero_exact".into(), q.density(&zero));
    let hits = (0..n).filter(|_| q.sample(rng) == zero).count();
    extras.insert("emit_zero_samples".into(), n as f64);
    extras.insert("emit_zero_hits".into(), hits as f64);
}

struct LearnerResult {
    kind: String,
    truth: Truth,
    loss_est: Option<f64>,
    inv_est: Option<f64>,
    samples: u64,
    queries: u64,
    rounds: usize,
    output: OutputRecord,
    extras: BTreeMap<String, f64>,
}

fn vgm_result<D: Generative + Clone>(
    run: VgmRun<D>,
    inst: &Instance,
    cfg: &ScenarioConfig,
    eval: &mut dyn RngCore,
    describe: impl Fn(&D) -> serde_json::Value,
) -> LearnerResult {
    let truth = truth(&run.output, inst, cfg, eval);
    let mut extras = BTreeMap::new();
    if matches!(cfg.instance, crate::config::InstanceSpec::Needle { .. }) {
        emit_zero(&run.output, cfg.eval.emit_samples, &mut extras, eval);
    }
    extras.insert("negatives".into(), run.negatives.len() as f64);
    extras.insert("rounds_budget".into(), run.settings.rounds as f64);
    extras.insert("tests_per_round".into(), run.settings.tests_per_round as f64);
    let loss_est = empirical_loss_bag(&run.output, &run.positives, cfg.loss)
        .ok()
        .filter(|l| l.is_finite());
    let inv_est = match &run.output {
        VgmOutput::Proper { .. } => Some(0.0),
        VgmOutput::Filtered(_) => run
            .rounds
            .last()
            .map(|r| r.invalid_samples as f64 / run.settings.tests_per_round as f64),
    };
    LearnerResult {
        kind: run.output.kind().into(),
        loss_est,
        inv_est,
        samples: run.samples_used,
        queries: run.queries_used,
        rounds: run.rounds_used(),
        output: describe_vgm(&run.output, &describe),
        truth,
        extras,
    }
}

fn run_learner(cfg: &ScenarioConfig, inst: &Instance, seed: u64) -> vgm_core::Result<LearnerResult> {
    let mut rng = stream_rng(seed, 1);
    let mut eval = stream_rng(seed, 2);
    let (e1, e2) = (cfg.eps1, cfg.eps2);
    match (cfg.learner, &inst.family) {
        (LearnerKind::Vgm, Family::Finite(f)) => {
            let oracle = FiniteOracle {
                family: f,
                loss: cfg.loss,
            };
            let run = vgm_learn(&oracle, &*inst.target, &inst.oracle, e1, e2, &cfg.params, &mut rng)?;
            Ok(vgm_result(run, inst, cfg, &mut eval, |m| serde_json::json!(m.index)))
        }
        (LearnerKind::Vgm, Family::Boxes { d, delta }) => {
            let oracle = BoxOracle {
                family: BoxFamily { d: *d, delta: *delta },
                loss: cfg.loss,
                budget: cfg.params.box_budget as u128,
            };
            let run = vgm_learn(&oracle, &*inst.target, &inst.oracle, e1, e2, &cfg.params, &mut rng)?;
            Ok(vgm_result(run, inst, cfg, &mut eval, describe_box))
        }
        (LearnerKind::Vgm, Family::Ngram { order, alphabet, max_len }) => {
            let oracle = NgramOracle {
                order: *order,
                alphabet: alphabet.clone(),
                max_len: *max_len,
                loss: cfg.loss,
            };
            let run = vgm_learn(&oracle, &*inst.target, &inst.oracle, e1, e2, &cfg.params, &mut rng)?;
            Ok(vgm_result(run, inst, cfg, &mut eval, |m| {
                serde_json::json!({ "removed": m.removed() })
            }))
        }
        (LearnerKind::Partial, Family::Finite(f)) => {
            let fallback = match &cfg.fallback {
                Some(x) => x.clone(),
                None => Prepared::default_fallback(inst)
                    .ok_or_else(|| Error::Precondition("no valid point to fall back on".into()))?,
            };
            let members = f.handles();
            let alpha = cfg.alpha.unwrap_or(0.0);
            let run = partial_validity_learn(
                &members,
                &*inst.target,
                &inst.oracle,
                cfg.loss,
                e1,
                e2,
                alpha,
                fallback,
                &cfg.params,
                cfg.use_cover,
                &mut rng,
            )?;
            let truth = truth(&run.output, inst, cfg, &mut eval);
            let ids = run.output.indices().to_vec();
            let loss_est = ids.iter().map(|&i| run.loss_estimates[i]).sum::<f64>() / ids.len() as f64;
            let mut extras = BTreeMap::new();
            extras.insert("level".into(), run.level);
            extras.insert("max_importance_weight".into(), run.max_importance_weight);
            extras.insert("weight_cap".into(), 3.0 * cfg.loss.bound() / e1);
            extras.insert("n2".into(), run.settings.n2 as f64);
            Ok(LearnerResult {
                kind: "mu-prime".into(),
                truth,
                loss_est: Some(loss_est),
                inv_est: Some(run.inv_estimate),
                samples: run.samples_used,
                queries: run.queries_used,
                rounds: run.inner_iterations(),
                output: OutputRecord {
                    kind: "mu-prime".into(),
                    components: ids.iter().map(|&i| serde_json::json!(i)).collect(),
                    base: None,
                    fallback: Some(run.output.fallback().clone()),
                },
                extras,
            })
        }
        (LearnerKind::ProperBox, Family::Boxes { d, delta }) => {
            let run = proper_box_learn(&*inst.target, &inst.oracle, e1, e2, *d, *delta, cfg.loss, &cfg.params, &mut rng)?;
            let truth = truth(&run.output, inst, cfg, &mut eval);
            let mut extras = BTreeMap::new();
            extras.insert("candidates".into(), run.stats.candidates as f64);
            extras.insert("test_samples".into(), run.stats.test_samples as f64);
            extras.insert("tests_per_candidate".into(), run.stats.tests_per_candidate as f64);
            Ok(LearnerResult {
                kind: "proper".into(),
                truth,
                loss_est: Some(run.empirical_loss),
                inv_est: Some(0.0),
                samples: run.stats.samples_used,
                queries: run.stats.queries_used,
                rounds: run.stats.candidates_tested,
                output: OutputRecord {
                    kind: "proper".into(),
                    components: vec![describe_box(&run.output)],
                    base: None,
                    fallback: None,
                },
                extras,
            })
        }
        (l, _) => Err(Error::Precondition(format!("learner {} does not fit this instance", l.name()))),
    }
}

pub fn run_trial(cfg: &ScenarioConfig, prepared: &Prepared, trial: usize, timing: bool) -> TrialOutcome {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let start = Instant::now();
    let mut report = TrialReport {
        trial,
        seed,
        learner: cfg.learner.name().into(),
        output_kind: "error".into(),
        loss_true: None,
        loss_est: None,
        inv_true: None,
        inv_est: None,
        opt_loss: None,
        samples: 0,
        queries: 0,
        rounds: 0,
        wall_ms: None,
    };
    let inst = match prepared.trial(cfg, seed) {
        Ok(i) => i,
        Err(e) => {
            return TrialOutcome {
                report,
                success: None,
                error: Some(e.to_string()),
                oracle_counter: 0,
                secret: None,
                output: None,
                extras: BTreeMap::new(),
            }
        }
    };
    report.opt_loss = inst.opt_loss;
    let result = run_learner(cfg, &inst, seed);
    if timing {
        report.wall_ms = Some(start.elapsed().as_millis() as u64);
    }
    let oracle_counter = inst.oracle.queries();
    match result {
        Ok(r) => {
            report.output_kind = r.kind;
            report.loss_true = r.truth.loss;
            report.inv_true = r.truth.inv;
            report.loss_est = r.loss_est;
            report.inv_est = r.inv_est;
            report.samples = r.samples;
            report.queries = r.queries;
            report.rounds = r.rounds;
            let success = match (inst.opt_loss, r.truth.loss, r.truth.inv) {
                (Some(opt), Some(l), Some(v)) => Some(l <= opt + cfg.eps1 && v <= inv_bound(cfg)),
                _ => None,
            };
            TrialOutcome {
                report,
                success,
                error: None,
                oracle_counter,
                secret: inst.secret,
                output: Some(r.output),
                extras: r.extras,
            }
        }
        Err(e) => {
            report.queries = oracle_counter;
            TrialOutcome {
                success: inst.opt_loss.map(|_| false),
                report,
                error: Some(e.to_string()),
                oracle_counter,
                secret: inst.secret,
                output: None,
                extras: BTreeMap::new(),
            }
        }
    }
}
