//! Built-in scenarios.

use serde_json::json;

use crate::config::ScenarioConfig;

pub struct Builtin {
    pub name: &'static str,
    pub description: &'static str,
    json: fn() -> serde_json::Value,
}

impl Builtin {
    pub fn config(&self) -> ScenarioConfig {
        let mut v = (self.json)();
        v["version"] = json!(crate::config::CONFIG_VERSION);
        v["scenario"] = json!(self.name);
        v["description"] = json!(self.description);
        ScenarioConfig::from_json(&v.to_string(), self.name).expect("built-in scenarios are valid")
    }
}

fn finite(variant: &str) -> serde_json::Value {
    json!({
        "instance": {"kind": "synthetic-finite", "variant": variant, "seed": 1},
        "learner": "vgm",
        "loss": {"kind": "capped-log", "m": 5.0},
        "eps1": 0.1,
        "eps2": 0.05,
        "trials": 100,
        "base_seed": 1000,
        "min_success_fraction": 0.7
    })
}

fn partial(variant: &str) -> serde_json::Value {
    json!({
        "instance": {"kind": "synthetic-finite", "variant": variant, "seed": 2},
        "learner": "partial",
        "loss": {"kind": "shifted-log", "m": 5.0},
        "eps1": 0.15,
        "eps2": 0.1,
        "alpha": 0.2,
        "trials": 100,
        "base_seed": 2000,
        "min_success_fraction": 0.7
    })
}

pub const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "finite-synthetic",
        description: "64 members over 128 points, target in the family, dirty members sharing invalid points",
        json: || finite("realizable"),
    },
    Builtin {
        name: "finite-agnostic",
        description: "as finite-synthetic, but the target is not a member",
        json: || finite("agnostic"),
    },
    Builtin {
        name: "finite-shadow",
        description: "dirty members with tiny separate invalid masses, some below detection",
        json: || finite("shadow"),
    },
    Builtin {
        name: "partial-member",
        description: "fractional labels, alpha = 0.2; the target is a member with too much invalid mass",
        json: || partial("partial-member"),
    },
    Builtin {
        name: "partial-agnostic",
        description: "fractional labels, alpha = 0.2; the target is not a member",
        json: || partial("partial-agnostic"),
    },
    Builtin {
        name: "figure1-rectangle",
        description: "proper box learner on a 16x16 grid whose valid points form an L, target uniform on it",
        json: || {
            json!({
                "instance": {
                    "kind": "box-region",
                    "d": 2,
                    "delta": 16,
                    "valid": [{"lo": [0, 0], "hi": [11, 5]}, {"lo": [0, 0], "hi": [5, 11]}]
                },
                "learner": "proper-box",
                "loss": {"kind": "capped-log", "m": 8.0},
                "eps1": 0.3,
                "eps2": 0.1,
                "trials": 100,
                "base_seed": 3000,
                "min_success_fraction": 0.7
            })
        },
    },
    Builtin {
        name: "needle",
        description: "1000 two-point members, one valid; the improper learner emits 0",
        json: || {
            json!({
                "instance": {"kind": "needle", "n": 1000},
                "learner": "vgm",
                "loss": {"kind": "coverage"},
                "eps1": 0.1,
                "eps2": 0.05,
                "params": {"positives": 32, "rounds": 16, "tests_per_round": 600},
                "trials": 100,
                "base_seed": 4000,
                "eval": {"emit_samples": 1000}
            })
        },
    },
    Builtin {
        name: "hidden-box",
        description: "proper box learner against a hidden weight-d/3 box in {0,1}^12 under coverage loss",
        json: || {
            json!({
                "instance": {"kind": "hidden-box", "d": 12},
                "learner": "proper-box",
                "loss": {"kind": "coverage"},
                "eps1": 0.1,
                "eps2": 0.1,
                "trials": 20,
                "base_seed": 5000
            })
        },
    },
    Builtin {
        name: "ngram-braces",
        description: "bigram models over brace strings, invalid when braces do not balance",
        json: || {
            json!({
                "instance": {
                    "kind": "ngram-braces",
                    "order": 1,
                    "max_len": 8,
                    "corpus": ["", "a", "{}", "{a}", "a{}", "{}{}", "{{}}", "{a}a", "{{a}}", "{}a{}"]
                },
                "learner": "vgm",
                "loss": {"kind": "capped-log", "m": 5.0},
                "eps1": 0.5,
                "eps2": 0.1,
                "params": {"positives": 400, "rounds": 8, "tests_per_round": 400},
                "trials": 10,
                "base_seed": 6000
            })
        },
    },
];

pub fn builtin(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_parse() {
        for b in BUILTINS {
            let cfg = b.config();
            assert_eq!(cfg.scenario, b.name);
        }
        for name in ["finite-synthetic", "figure1-rectangle", "needle", "hidden-box", "ngram-braces"] {
            assert!(builtin(name).is_some(), "{name}");
        }
    }
}
