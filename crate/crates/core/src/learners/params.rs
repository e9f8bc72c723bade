use serde::{Deserialize, Serialize};

/// Sample sizes and round counts for the learners.
///
/// Every explicit field overrides the default formula. Defaults for a
/// finite family of size `|Q|` (with `ln|Q|` floored at 1):
///
/// | knob | default |
/// |------|---------|
/// | `rounds` (R) | `ceil(32 M / eps1)` |
/// | `positives` (P) | `ceil(c_p M^2 / eps1^2 ln|Q|)`, `c_p = 32` |
/// | `tests_per_round` (T) | `ceil(c_t R / eps2 ln(8 |Q| R))`, `c_t = 1` |
/// | `n1` | `ceil(c_n1 M^2 / eps1^2 ln|Q|)`, `c_n1 = 8` |
/// | `n2` | `ceil(c_n2 M^2 / (eps1^2 eps2^2) ln|Q| ln(M ln|Q| / (eps1 eps2)))`, `c_n2 = 1` |
/// | `box_positives` | `ceil(c_box d M^2 / eps1^2)`, `c_box = 1` |
/// | `max_inner_iters` | `ceil(5 ln|Q| / eps2) + 1` |
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerParams {
    pub positives: Option<usize>,
    pub rounds: Option<usize>,
    pub tests_per_round: Option<usize>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub box_positives: Option<usize>,
    pub box_tests: Option<usize>,
    pub max_inner_iters: Option<usize>,
    pub c_p: f64,
    pub c_t: f64,
    pub c_n1: f64,
    pub c_n2: f64,
    pub c_box: f64,
    /// Largest number of candidate boxes the proper learner may enumerate.
    pub box_budget: u64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            positives: None,
            rounds: None,
            tests_per_round: None,
            n1: None,
            n2: None,
            box_positives: None,
            box_tests: None,
            max_inner_iters: None,
            c_p: 32.0,
            c_t: 1.0,
            c_n1: 8.0,
            c_n2: 1.0,
            c_box: 1.0,
            box_budget: 5_000_000,
        }
    }
}

fn log_size(family_size: f64) -> f64 {
    family_size.ln().max(1.0)
}

fn ceil(v: f64) -> usize {
    v.ceil().max(1.0) as usize
}

impl LearnerParams {
    pub fn rounds(&self, m: f64, eps1: f64) -> usize {
        self.rounds.unwrap_or_else(|| ceil(32.0 * m / eps1))
    }

    pub fn positives(&self, m: f64, eps1: f64, family_size: f64) -> usize {
        self.positives
            .unwrap_or_else(|| ceil(self.c_p * m * m / (eps1 * eps1) * log_size(family_size)))
    }

    pub fn tests_per_round(&self, rounds: usize, eps2: f64, family_size: f64) -> usize {
        self.tests_per_round.unwrap_or_else(|| {
            let r = rounds as f64;
            ceil(self.c_t * r / eps2 * (8.0 * family_size.max(1.0) * r).ln())
        })
    }

    pub fn n1(&self, m: f64, eps1: f64, family_size: f64) -> usize {
        self.n1
            .unwrap_or_else(|| ceil(self.c_n1 * m * m / (eps1 * eps1) * log_size(family_size)))
    }

    pub fn n2(&self, m: f64, eps1: f64, eps2: f64, family_size: f64) -> usize {
        self.n2.unwrap_or_else(|| {
            let lq = log_size(family_size);
            let inner = (m * lq / (eps1 * eps2)).ln().max(1.0);
            ceil(self.c_n2 * m * m / (eps1 * eps1 * eps2 * eps2) * lq * inner)
        })
    }

    pub fn max_inner_iters(&self, eps2: f64, family_size: f64) -> usize {
        self.max_inner_iters
            .unwrap_or_else(|| ceil(5.0 * log_size(family_size) / eps2) + 1)
    }

    pub fn box_positives(&self, d: usize, m: f64, eps1: f64) -> usize {
        self.box_positives
            .unwrap_or_else(|| ceil(self.c_box * d as f64 * m * m / (eps1 * eps1)))
    }

    /// `ceil(1/eps2 ln(8 P^{2d}))`.
    pub fn box_tests(&self, positives: usize, d: usize, eps2: f64) -> usize {
        self.box_tests.unwrap_or_else(|| {
            let ln = 8f64.ln() + 2.0 * d as f64 * (positives.max(1) as f64).ln();
            ceil(ln / eps2)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_formulas() {
        let p = LearnerParams::default();
        assert_eq!(p.rounds(5.0, 0.1), 1600);
        assert_eq!(p.positives(5.0, 0.1, 64.0), (32.0 * 2500.0 * 64f64.ln()).ceil() as usize);
        assert_eq!(p.tests_per_round(1600, 0.05, 64.0), (32000.0 * (8.0 * 64.0 * 1600.0f64).ln()).ceil() as usize);
        assert_eq!(p.box_tests(800, 2, 0.1), ((8f64.ln() + 4.0 * 800f64.ln()) / 0.1).ceil() as usize);
    }

    #[test]
    fn overrides_win() {
        let p = LearnerParams {
            rounds: Some(7),
            tests_per_round: Some(3),
            ..Default::default()
        };
        assert_eq!(p.rounds(5.0, 0.1), 7);
        assert_eq!(p.tests_per_round(7, 0.05, 64.0), 3);
    }
}
