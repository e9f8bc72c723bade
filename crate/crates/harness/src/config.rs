//! Scenario configuration files (JSON, `version: 1`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vgm_core::learners::LearnerParams;
use vgm_core::{LossFunction, Point};

use crate::synthetic::SyntheticVariant;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Vgm,
    Partial,
    ProperBox,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Vgm => "vgm",
            Self::Partial => "partial",
            Self::ProperBox => "proper-box",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<u32>,
    pub hi: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceSpec {
    /// Seeded family from [`crate::synthetic`].
    SyntheticFinite { variant: SyntheticVariant, seed: u64 },
    /// A [`crate::instance::FiniteFile`] on disk, relative to the config.
    FiniteFile { path: PathBuf },
    /// Box family on `[0, delta)^d`; valid points form a union of boxes and
    /// the target is uniform over them.
    BoxRegion { d: usize, delta: u32, valid: Vec<BoxSpec> },
    /// Needle in a haystack over `{0, ..., n}`; the secret is drawn per
    /// trial unless given.
    Needle {
        n: usize,
        #[serde(default)]
        secret: Option<usize>,
    },
    /// Hidden box in `{0,1}^d` with a per-trial secret.
    HiddenBox { d: usize },
    /// N-gram models over brace strings; the target is uniform over `corpus`.
    NgramBraces {
        order: usize,
        max_len: usize,
        corpus: Vec<String>,
    },
}

impl InstanceSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SyntheticFinite { .. } => "synthetic-finite",
            Self::FiniteFile { .. } => "finite-file",
            Self::BoxRegion { .. } => "box-region",
            Self::Needle { .. } => "needle",
            Self::HiddenBox { .. } => "hidden-box",
            Self::NgramBraces { .. } => "ngram-braces",
        }
    }
}

/// Ground-truth evaluation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    /// Samples for invalidity when the output support cannot be enumerated.
    pub invalidity_samples: usize,
    /// Samples drawn from each output to measure how often it emits the
    /// needle instance's point 0.
    pub emit_samples: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            invalidity_samples: 100_000,
            emit_samples: 1_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub delta: f64,
    /// Defaults to the loss bound `M`.
    pub loss_threshold: Option<f64>,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            delta: 0.05,
            loss_threshold: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub scenario: String,
    #[serde(default)]
    pub description: String,
    pub instance: InstanceSpec,
    pub learner: LearnerKind,
    pub loss: LossFunction,
    pub eps1: f64,
    pub eps2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub params: LearnerParams,
    /// Valid point emitted when the partial learner's filter rejects a
    /// sample. Defaults to the smallest valid domain point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<Point>,
    /// Replace the candidate set by a greedy L1 cover (partial learner).
    #[serde(default)]
    pub use_cover: bool,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Exit with status 2 when the success fraction falls below this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_success_fraction: Option<f64>,
    #[serde(default)]
    pub eval: EvalSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    /// Directory that relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.into(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(field("version", format!("unsupported version {}, expected {CONFIG_VERSION}", self.version)));
        }
        if self.scenario.is_empty() || !self.scenario.chars().all(|c| c.is_ascii_alphanumeric() || "-_".contains(c)) {
            return Err(field("scenario", "must be a non-empty name of letters, digits, '-' or '_'"));
        }
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(field(name, format!("{v} must lie in (0, 1)")));
            }
        }
        self.loss
            .validate()
            .map_err(|e| field("loss", e.to_string()))?;
        match (self.learner, self.alpha) {
            (LearnerKind::Partial, None) => return Err(field("alpha", "required for the partial learner")),
            (LearnerKind::Partial, Some(a)) if !(0.0..1.0).contains(&a) => {
                return Err(field("alpha", format!("{a} must lie in [0, 1)")));
            }
            (LearnerKind::Vgm | LearnerKind::ProperBox, Some(_)) => {
                return Err(field("alpha", "only allowed for the partial learner"));
            }
            _ => {}
        }
        if self.fallback.is_some() && self.learner != LearnerKind::Partial {
            return Err(field("fallback", "only allowed for the partial learner"));
        }
        if self.use_cover && self.learner != LearnerKind::Partial {
            return Err(field("use_cover", "only allowed for the partial learner"));
        }
        if let Some(f) = self.min_success_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(field("min_success_fraction", format!("{f} must lie in [0, 1]")));
            }
        }
        if !(self.verify.delta > 0.0 && self.verify.delta < 1.0) {
            return Err(field("verify.delta", "must lie in (0, 1)"));
        }
        self.validate_instance()
    }

    fn validate_instance(&self) -> Result<(), ConfigError> {
        let learner = self.learner;
        let allowed: &[LearnerKind] = match &self.instance {
            InstanceSpec::SyntheticFinite { .. } | InstanceSpec::FiniteFile { .. } => {
                &[LearnerKind::Vgm, LearnerKind::Partial]
            }
            InstanceSpec::Needle { .. } | InstanceSpec::NgramBraces { .. } => &[LearnerKind::Vgm],
            InstanceSpec::BoxRegion { .. } => &[LearnerKind::Vgm, LearnerKind::ProperBox],
            InstanceSpec::HiddenBox { .. } => &[LearnerKind::ProperBox],
        };
        if !allowed.contains(&learner) {
            return Err(field(
                "learner",
                format!("{} is not supported on {} instances", learner.name(), self.instance.kind()),
            ));
        }
        match &self.instance {
            InstanceSpec::SyntheticFinite { variant, .. } => {
                if variant.is_fractional() != (learner == LearnerKind::Partial) {
                    return Err(field(
                        "instance.variant",
                        "fractional variants pair with the partial learner, binary ones with vgm",
                    ));
                }
            }
            InstanceSpec::FiniteFile { .. } => {}
            InstanceSpec::BoxRegion { d, delta, valid } => {
                if *d == 0 || *delta == 0 {
                    return Err(field("instance.d", "d and delta must be positive"));
                }
                if valid.is_empty() {
                    return Err(field("instance.valid", "needs at least one box"));
                }
                for (k, b) in valid.iter().enumerate() {
                    let ok = b.lo.len() == *d
                        && b.hi.len() == *d
                        && b.lo.iter().zip(&b.hi).all(|(l, h)| l <= h && *h < *delta);
                    if !ok {
                        return Err(field(
                            &format!("instance.valid[{k}]"),
                            format!("needs {d} coordinates with lo <= hi < {delta}"),
                        ));
                    }
                }
            }
            InstanceSpec::Needle { n, secret } => {
                if *n == 0 {
                    return Err(field("instance.n", "must be positive"));
                }
                if let Some(s) = secret {
                    if !(1..=*n).contains(s) {
                        return Err(field("instance.secret", format!("must lie in 1..={n}")));
                    }
                }
            }
            InstanceSpec::HiddenBox { d } => {
                if d % 6 != 0 || *d < 12 || *d > 64 {
                    return Err(field("instance.d", "must be a multiple of 6 in [12, 64]"));
                }
            }
            InstanceSpec::NgramBraces { corpus, max_len, .. } => {
                if corpus.is_empty() {
                    return Err(field("instance.corpus", "must not be empty"));
                }
                if let Some(s) = corpus.iter().find(|s| s.chars().count() > *max_len) {
                    return Err(field("instance.corpus", format!("{s:?} is longer than max_len")));
                }
                if let Some(s) = corpus.iter().find(|s| crate::braces::brace_validity(s) != 0) {
                    return Err(field("instance.corpus", format!("{s:?} has unbalanced braces")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "version": 1,
            "scenario": "t",
            "instance": {"kind": "needle", "n": 10},
            "learner": "vgm",
            "loss": {"kind": "coverage"},
            "eps1": 0.1,
            "eps2": 0.05,
            "trials": 3
        })
    }

    fn parse(v: &serde_json::Value) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::from_json(&v.to_string(), "inline")
    }

    #[test]
    fn minimal_parses() {
        let cfg = parse(&minimal()).unwrap();
        assert_eq!(cfg.params, LearnerParams::default());
        let back = parse(&serde_json::from_str(&cfg.to_json()).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = minimal();
        v["colour"] = serde_json::json!(1);
        assert!(matches!(parse(&v), Err(ConfigError::Parse { .. })));
        let mut v = minimal();
        v["params"] = serde_json::json!({"roundz": 3});
        assert!(matches!(parse(&v), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn field_paths_in_errors() {
        let mut v = minimal();
        v["version"] = serde_json::json!(2);
        assert!(parse(&v).unwrap_err().to_string().starts_with("version"));
        let mut v = minimal();
        v["alpha"] = serde_json::json!(0.2);
        assert!(parse(&v).unwrap_err().to_string().starts_with("alpha"));
        let mut v = minimal();
        v["instance"]["secret"] = serde_json::json!(11);
        assert!(parse(&v).unwrap_err().to_string().starts_with("instance.secret"));
        let mut v = minimal();
        v["learner"] = serde_json::json!("partial");
        v["alpha"] = serde_json::json!(0.2);
        assert!(parse(&v).unwrap_err().to_string().starts_with("learner"));
    }
}
