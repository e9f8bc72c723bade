//! Learners that combine a constrained minimizer with oracle queries.

mod full_validity;
mod params;
mod partial_validity;
mod proper_box;

pub use full_validity::{vgm_learn, FilteredMeta, RoundRecord, VgmOutput, VgmRun, VgmSettings};
pub use params::LearnerParams;
pub use partial_validity::{
    loss_levels, mu_prime_accept_prob, partial_validity_learn, InnerIteration, LevelOutcome, LevelTrace, MuPrime,
    PartialRun, PartialSettings,
};
pub use proper_box::{candidate_order, proper_box_learn, ProperBoxRun, ProperBoxStats};
