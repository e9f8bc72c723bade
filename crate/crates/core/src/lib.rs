//! Generative modeling with an invalidity oracle.
//!
//! Learners see random positive examples from a target `p` and may ask a
//! counted oracle whether generated points are invalid. They return a
//! distribution whose loss against `p` is close to the best valid member of
//! a family, while (almost) never generating invalid points.
//!
//! - [`families`]: candidate families and their constrained empirical-loss
//!   minimizers (finite lists, axis-aligned boxes, an n-gram demo).
//! - [`learners`]: the filtered improper learner, the importance-weighted
//!   elimination learner for partial validity, and a proper box learner.
//! - [`lowerbound`]: adversarial instances where proper learning needs many
//!   queries.

pub mod distribution;
pub mod error;
pub mod families;
pub mod learners;
pub mod loss;
pub mod lowerbound;
pub mod oracle;
pub mod point;
pub mod rng;
pub mod verify;

pub use distribution::{DiscreteDistribution, Generative, SUPPORT_EPS};
pub use error::{Error, Result};
pub use loss::{empirical_loss, empirical_loss_bag, true_loss, LossFunction, PointBag};
pub use oracle::{exact_invalidity, invalidity, InvalidityMode, InvalidityOracle};
pub use point::Point;
pub use verify::{amplify, verify_candidate, VerificationReport, VerifyConfig};
