//! Candidate families and their optimization oracles.
//!
//! An oracle answers the constrained problem: minimize the empirical loss
//! on the positives subject to the support avoiding every negative point.

use std::collections::BTreeSet;

use crate::distribution::Generative;
use crate::error::Result;
use crate::loss::{LossFunction, PointBag};
use crate::point::Point;

pub mod boxes;
pub mod cover;
pub mod finite;
pub mod ngram;

pub use boxes::{
    box_empirical_loss, gmn_oracle_box, gmn_oracle_box_budgeted, spanned_boxes, spanned_count, BoxDistribution,
    BoxFamily, BoxOracle,
};
pub use cover::{greedy_l1_cover, l1_distance};
pub use finite::{gmn_oracle_finite, FamilyMember, FiniteFamily, FiniteOracle};
pub use ngram::{ngram_gmn_greedy, NgramModel, NgramOracle};

pub type NegativeSet = BTreeSet<Point>;

pub trait GmnOracle {
    type Output: Generative + Clone;

    /// Empirical-loss minimizer over members whose support excludes `xn`.
    fn solve(&self, xp: &PointBag, xn: &NegativeSet) -> Result<Self::Output>;

    fn loss(&self) -> LossFunction;

    /// Family size `|Q|`, used only for default sample sizes.
    fn family_size(&self) -> f64;
}
