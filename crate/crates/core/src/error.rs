use thiserror::Error;

use crate::point::Point;
use crate::verify::VerificationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} outside domain [0, 1]")]
    Domain { value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("exact mode needs an enumerable support")]
    NotEnumerable,

    #[error("no member of the family avoids all {} negative points", negatives.len())]
    NoFeasibleDistribution { negatives: Vec<Point> },

    #[error("candidate set emptied at every loss level up to M")]
    NoCandidateSurvived { history: Vec<crate::learners::LevelTrace> },

    #[error("oracle returned non-binary value {value} at {point}")]
    NonBinaryOracle { point: Point, value: f64 },

    #[error("enumeration of {candidates} candidates exceeds the budget of {budget}")]
    BudgetExceeded { candidates: u128, budget: u128 },

    #[error("all {} repetitions failed verification", reports.len())]
    AmplificationExhausted { reports: Vec<Option<VerificationReport>> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
