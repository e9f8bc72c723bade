//! Turning an [`InstanceSpec`] into a family, a target and an oracle.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use vgm_core::families::{BoxDistribution, BoxFamily, FiniteFamily};
use vgm_core::lowerbound::{make_hidden_box_instance, make_needle_instance};
use vgm_core::rng::stream_rng;
use vgm_core::{exact_invalidity, true_loss, DiscreteDistribution, InvalidityOracle, LossFunction, Point};

use crate::braces::brace_validity;
use crate::config::{BoxSpec, ConfigError, InstanceSpec, LearnerKind, ScenarioConfig};
use crate::synthetic::make_synthetic;

/// On-disk finite instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteFile {
    pub family: FiniteFamily,
    pub target: DiscreteDistribution,
    /// Explicit labels; unlisted points get `default_invalidity`.
    pub invalidity: Vec<(Point, f64)>,
    #[serde(default = "one")]
    pub default_invalidity: f64,
}

fn one() -> f64 {
    1.0
}

/// Largest box-family size for which OPT is found by enumeration.
const OPT_BOX_DIM: usize = 2;
const OPT_BOX_DELTA: u32 = 16;

pub enum Family {
    Finite(Arc<FiniteFamily>),
    Boxes { d: usize, delta: u32 },
    Ngram { order: usize, alphabet: Vec<char>, max_len: usize },
}

/// Everything one trial needs. The oracle counter starts at zero.
pub struct Instance {
    pub family: Family,
    pub target: Arc<DiscreteDistribution>,
    pub oracle: InvalidityOracle,
    /// Best loss among admissible members, when computable.
    pub opt_loss: Option<f64>,
    /// Needle index or hidden-box vector, for the trial record.
    pub secret: Option<String>,
}

impl Instance {
    fn fork(&self) -> Instance {
        Instance {
            family: match &self.family {
                Family::Finite(f) => Family::Finite(f.clone()),
                Family::Boxes { d, delta } => Family::Boxes { d: *d, delta: *delta },
                Family::Ngram {
                    order,
                    alphabet,
                    max_len,
                } => Family::Ngram {
                    order: *order,
                    alphabet: alphabet.clone(),
                    max_len: *max_len,
                },
            },
            target: self.target.clone(),
            oracle: self.oracle.fork(),
            opt_loss: self.opt_loss,
            secret: self.secret.clone(),
        }
    }
}

/// Built once per scenario; hands out fresh per-trial instances.
pub enum Prepared {
    Fixed(Instance),
    Needle { n: usize, secret: Option<usize> },
    HiddenBox { d: usize },
}

fn config_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

/// Loss threshold set: members with `Inv <= admissible` count towards OPT.
pub fn admissible_invalidity(cfg: &ScenarioConfig) -> f64 {
    match cfg.learner {
        LearnerKind::Partial => cfg.alpha.unwrap_or(0.0),
        _ => 0.0,
    }
}

pub fn finite_opt(family: &FiniteFamily, target: &DiscreteDistribution, oracle: &InvalidityOracle, loss: LossFunction, admissible: f64) -> Option<f64> {
    family
        .members()
        .filter(|q| exact_invalidity(*q, oracle).is_ok_and(|v| v <= admissible))
        .map(|q| true_loss(q, target, loss))
        .min_by(f64::total_cmp)
}

pub fn box_opt(
    d: usize,
    delta: u32,
    target: &DiscreteDistribution,
    oracle: &InvalidityOracle,
    loss: LossFunction,
    admissible: f64,
) -> Option<f64> {
    BoxFamily { d, delta }
        .iter()
        .filter(|b| exact_invalidity(b, oracle).is_ok_and(|v| v <= admissible))
        .map(|b| true_loss(&b, target, loss))
        .min_by(f64::total_cmp)
}

fn region_points(valid: &[BoxSpec]) -> Result<Vec<Point>, ConfigError> {
    let mut pts = BTreeSet::new();
    for (k, b) in valid.iter().enumerate() {
        let bx = BoxDistribution::new(b.lo.iter().copied().collect(), b.hi.iter().copied().collect())
            .map_err(|e| config_err(&format!("instance.valid[{k}]"), e.to_string()))?;
        if bx.volume() > 1 << 22 {
            return Err(config_err(&format!("instance.valid[{k}]"), "box too large to enumerate"));
        }
        pts.extend(bx.points());
    }
    Ok(pts.into_iter().collect())
}

pub fn region_oracle(valid: &[BoxSpec]) -> InvalidityOracle {
    let boxes: Vec<BoxSpec> = valid.to_vec();
    InvalidityOracle::binary(move |x: &Point| {
        let inside = x.coords().is_some_and(|c| {
            boxes.iter().any(|b| {
                c.len() == b.lo.len() && c.iter().zip(b.lo.iter().zip(&b.hi)).all(|(v, (l, h))| l <= v && v <= h)
            })
        });
        if inside {
            0.0
        } else {
            1.0
        }
    })
}

pub fn brace_oracle() -> InvalidityOracle {
    InvalidityOracle::binary(|x: &Point| match x.as_token() {
        Some(s) => f64::from(brace_validity(s)),
        None => 1.0,
    })
}

impl Prepared {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        let admissible = admissible_invalidity(cfg);
        let inst = match &cfg.instance {
            InstanceSpec::Needle { n, secret } => return Ok(Prepared::Needle { n: *n, secret: *secret }),
            InstanceSpec::HiddenBox { d } => return Ok(Prepared::HiddenBox { d: *d }),
            InstanceSpec::SyntheticFinite { variant, seed } => {
                let s = make_synthetic(*variant, *seed).map_err(|e| config_err("instance", e.to_string()))?;
                let oracle = s.oracle();
                let opt = finite_opt(&s.family, &s.target, &oracle, cfg.loss, admissible);
                Instance {
                    family: Family::Finite(Arc::new(s.family)),
                    target: Arc::new(s.target),
                    oracle,
                    opt_loss: opt,
                    secret: None,
                }
            }
            InstanceSpec::FiniteFile { path } => {
                let full = cfg.resolve(path);
                let text = std::fs::read_to_string(&full).map_err(|source| ConfigError::Io { path: full.clone(), source })?;
                let file: FiniteFile = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                    path: full.display().to_string(),
                    source,
                })?;
                if let Some((x, v)) = file.invalidity.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
                    return Err(config_err("instance.path", format!("label {v} at {x} outside [0, 1]")));
                }
                let table: HashMap<Point, f64> = file.invalidity.into_iter().collect();
                let oracle = InvalidityOracle::from_table(table, file.default_invalidity);
                if cfg.learner == LearnerKind::Vgm && !oracle.is_binary() {
                    return Err(config_err("instance.path", "vgm needs 0/1 labels"));
                }
                let opt = finite_opt(&file.family, &file.target, &oracle, cfg.loss, admissible);
                Instance {
                    family: Family::Finite(Arc::new(file.family)),
                    target: Arc::new(file.target),
                    oracle,
                    opt_loss: opt,
                    secret: None,
                }
            }
            InstanceSpec::BoxRegion { d, delta, valid } => {
                let target = DiscreteDistribution::uniform(region_points(valid)?)
                    .map_err(|e| config_err("instance.valid", e.to_string()))?;
                let oracle = region_oracle(valid);
                let opt = (*d <= OPT_BOX_DIM && *delta <= OPT_BOX_DELTA)
                    .then(|| box_opt(*d, *delta, &target, &oracle, cfg.loss, admissible))
                    .flatten();
                Instance {
                    family: Family::Boxes { d: *d, delta: *delta },
                    target: Arc::new(target),
                    oracle,
                    opt_loss: opt,
                    secret: None,
                }
            }
            InstanceSpec::NgramBraces { order, max_len, corpus } => {
                let mut alphabet: Vec<char> = corpus.iter().flat_map(|s| s.chars()).chain(['{', '}']).collect();
                alphabet.sort_unstable();
                alphabet.dedup();
                let target = DiscreteDistribution::uniform(corpus.iter().map(Point::token))
                    .map_err(|e| config_err("instance.corpus", e.to_string()))?;
                Instance {
                    family: Family::Ngram {
                        order: *order,
                        alphabet,
                        max_len: *max_len,
                    },
                    target: Arc::new(target),
                    oracle: brace_oracle(),
                    opt_loss: None,
                    secret: None,
                }
            }
        };
        if cfg.learner != LearnerKind::Partial {
            inst.oracle
                .check_valid_target(&inst.target)
                .map_err(|e| config_err("instance", e.to_string()))?;
        }
        Ok(Prepared::Fixed(inst))
    }

    /// Per-trial instance; secrets come from stream 0 of the trial seed.
    pub fn trial(&self, cfg: &ScenarioConfig, seed: u64) -> vgm_core::Result<Instance> {
        match self {
            Prepared::Fixed(inst) => Ok(inst.fork()),
            Prepared::Needle { n, secret } => {
                let mut rng = stream_rng(seed, 0);
                let nd = make_needle_instance(*n, *secret, &mut rng)?;
                let opt = finite_opt(&nd.family, &nd.target, &nd.oracle, cfg.loss, 0.0);
                Ok(Instance {
                    secret: Some(nd.secret.to_string()),
                    family: Family::Finite(Arc::new(nd.family)),
                    target: Arc::new(nd.target),
                    oracle: nd.oracle,
                    opt_loss: opt,
                })
            }
            Prepared::HiddenBox { d } => {
                let mut rng = stream_rng(seed, 0);
                let hb = make_hidden_box_instance(*d, &mut rng)?;
                let secret = (0..hb.d).map(|i| if hb.y >> i & 1 == 1 { '1' } else { '0' }).collect();
                // the box prod {0, y_i} has the optimal coverage loss
                let opt = (hb.d - hb.d / 3) as f64 / hb.d as f64;
                Ok(Instance {
                    family: Family::Boxes { d: hb.d, delta: 2 },
                    target: Arc::new(hb.target),
                    oracle: hb.oracle,
                    opt_loss: Some(opt),
                    secret: Some(secret),
                })
            }
        }
    }

    /// Default fallback for the partial learner: the smallest valid point.
    pub fn default_fallback(inst: &Instance) -> Option<Point> {
        match &inst.family {
            Family::Finite(f) => f.domain().iter().find(|x| inst.oracle.truth(x) == 0.0).cloned(),
            _ => None,
        }
    }
}
