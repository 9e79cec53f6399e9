//! Executable regret bounds: conditioners, the bounded-output comparator,
//! and per-instance verifiers for the decomposition lemma, the adaptive
//! gradient lemma, the percentile lemma, both adaptive-conditioner
//! theorems and the permutation corollary.

pub mod adversary;
pub mod checks;
pub mod comparator;
pub mod conditioner;
pub mod suite;
pub mod trace;

pub use adversary::{empirical_s, AdversaryBall, PNorm};
pub use checks::*;
pub use comparator::{comparator_loss, measured_regret, ComparatorResult};
pub use conditioner::{
    hindsight_conditioner, minimax_conditioner, run_conditioned, streaming_conditioner_row,
    transductive_conditioner_row, CondRunConfig, CondRunResult, ConditionerKind,
};
pub use trace::{RunTrace, TraceError, TraceRound};

#[derive(Debug, thiserror::Error)]
pub enum TheoryError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("hindsight conditioner unbounded: zero comparator weight with gradient mass at features {0:?}")]
    UnboundedCoordinate(Vec<u32>),
    #[error("no scale entry S for feature {0} carrying gradient mass")]
    MissingScaleEntry(u32),
    #[error("ball precondition violated at round {round}: ||S^1/2 x||^2 = {value}")]
    BallViolation { round: usize, value: f64 },
    #[error("run configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Trace(#[from] trace::TraceError),
    #[error(transparent)]
    Projection(#[from] crate::projection::ProjectionError),
    #[error(transparent)]
    Loss(#[from] crate::loss::LossError),
}
