//! Desk-scale RLVR simulator: a tabular autoregressive policy trained with
//! a clipped group-relative surrogate on synthetic verifiable tasks.

pub mod objective;
pub mod policy;
pub mod rollout;
pub mod task;
pub mod train;

pub use objective::{policy_entropy, surrogate_objective, ScoredGroup, SurrogateOutput};
pub use policy::{PolicyTable, Snapshot, StateId};
pub use rollout::{sample_group, RolloutGroup};
pub use task::{Difficulty, TaskKind, TaskSpec};
pub use train::{train, train_observed, GroupTrace, RunMetrics, StepMetrics, Trainer};
