//! Scale-invariant online linear learning.
//!
//! The learners here (NG, NAG, sNAG) keep per-feature scale estimates so
//! their prediction sequences are unchanged when any feature is
//! multiplied by a constant, which removes the need to pre-normalize
//! streaming data. Diagonal AdaGrad and plain SGD are included as
//! non-invariant baselines, together with:
//!
//! - sparse svmlight/CSV ingestion and synthetic generators for scaling
//!   experiments ([`data`]),
//! - projection onto scaled norm balls under a diagonal metric
//!   ([`projection`]),
//! - executable versions of the regret bounds driving the algorithms:
//!   conditioners, a constrained comparator, and per-instance inequality
//!   verifiers ([`theory`]),
//! - a CLI (`normlearn`) exposing train / sweep / generate / verify /
//!   stats / scale-experiment ([`cli`]).

pub mod cli;
pub mod data;
pub mod learner;
pub mod loss;
pub mod model_io;
pub mod projection;
pub mod sparse;
pub mod theory;

pub use learner::{
    predict, run_on, run_stream, update, Algorithm, EtaSchedule, LearnerConfig, LearnerState,
    Prediction, RunOptions, RunResult, UpdateOutcome,
};
pub use loss::Loss;
pub use sparse::{Example, SparseVec};
