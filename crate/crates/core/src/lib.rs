//! Intrinsic-confidence group relative preference optimization.
//!
//! The scoring pipeline turns a group of sampled responses into advantages:
//!
//! 1. [`seqprob`] reduces each response to its mean per-token log-probability.
//! 2. [`preference`] ranks the group by that confidence and computes a
//!    preference advantage score per response.
//! 3. [`reward`] fuses the score into the verifiable reward under a clip, with
//!    a bonus weight that follows a schedule over training.
//! 4. [`advantage`] normalizes rewards within the group, for both the GRPO
//!    baseline and ICPO.
//!
//! [`scenarios`] provides the noisy and coarse-grained reward transforms,
//! [`trainer`] a tabular policy-gradient simulator, and [`harness`] the file
//! formats and command entry points used by the `icpo` binary.

pub mod advantage;
pub mod config;
pub mod error;
pub mod harness;
pub mod preference;
pub mod reward;
pub mod scenarios;
pub mod seqprob;
pub mod trainer;

pub use advantage::{
    grpo_advantages, icpo_advantages, icpo_breakdown, normalize, AdvantageSource, AdvantageVector,
    Group, IcpoBreakdown, IcpoParams,
};
pub use config::{Algorithm, RunConfig, Scenario};
pub use error::{Error, Result};
pub use preference::{build_pairs, preference_scores, rank_by_confidence, PreferencePairSet, PreferenceScore, Ranking};
pub use reward::{fuse, verifiable_reward, FusedReward, ScheduleKind, ScheduleSpec, VerifiableReward};
pub use scenarios::{coarse_filter, inject_noise, NoiseSpec};
pub use seqprob::{mean_logprob, Response, SeqScore, LOGPROB_FLOOR};
