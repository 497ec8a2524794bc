//! Group-relative advantage normalization for the GRPO baseline (raw
//! verifiable rewards) and for ICPO (fused rewards).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preference::{self, PreferenceScore, Ranking};
use crate::reward::{self, FusedReward};
use crate::seqprob::{self, Response, SeqScore};

/// Standard deviations at or below this value are treated as zero.
pub const STD_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageSource {
    Grpo,
    Icpo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageVector {
    pub values: Vec<f64>,
    pub source: AdvantageSource,
    pub group_mean: f64,
    /// Population standard deviation of the rewards.
    pub group_std: f64,
}

impl AdvantageVector {
    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// True when at least two entries differ.
    pub fn is_non_constant(&self) -> bool {
        self.values.windows(2).any(|w| w[0] != w[1])
    }
}

fn normalize_as(rewards: &[f64], source: AdvantageSource) -> Result<AdvantageVector> {
    if rewards.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let values = if std <= STD_EPSILON {
        vec![0.0; rewards.len()]
    } else {
        rewards.iter().map(|r| (r - mean) / std).collect()
    };
    Ok(AdvantageVector {
        values,
        source,
        group_mean: mean,
        group_std: std,
    })
}

/// `(R_k - mean) / std` with the population standard deviation; a
/// zero-variance group yields all-zero advantages.
pub fn normalize(rewards: &[f64]) -> Result<AdvantageVector> {
    normalize_as(rewards, AdvantageSource::Grpo)
}

/// The responses of one prompt, reduced to what the advantage pipeline needs.
///
/// `rewards` are the verifiable rewards the update actually sees; under the
/// noisy scenario they differ from the clean composite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub scores: Vec<SeqScore>,
    pub rewards: Vec<f64>,
}

impl Group {
    pub fn new(scores: Vec<SeqScore>, rewards: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyGroup);
        }
        if scores.len() != rewards.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} scores but {} rewards",
                scores.len(),
                rewards.len()
            )));
        }
        preference::check_ids(&scores)?;
        if let Some((index, r)) = rewards.iter().enumerate().find(|(_, r)| !r.is_finite()) {
            return Err(Error::InvalidResponse(format!(
                "non-finite reward {r} at position {index}"
            )));
        }
        Ok(Self { scores, rewards })
    }

    /// Scores each response and applies the composite verifiable reward.
    pub fn from_responses(responses: &[Response]) -> Result<Self> {
        let scores = responses
            .iter()
            .map(seqprob::mean_logprob)
            .collect::<Result<Vec<_>>>()?;
        let rewards = responses
            .iter()
            .map(|r| reward::verifiable_reward(r.answer_correct, r.format_ok).value)
            .collect();
        Self::new(scores, rewards)
    }

    /// Mean log-probabilities in response order.
    pub fn mean_logprobs(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.mean_logprob).collect()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Parameters of the ICPO reward path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpoParams {
    pub omega: f64,
    pub tau: f64,
    pub delta: f64,
}

impl Default for IcpoParams {
    fn default() -> Self {
        Self {
            omega: 1.0,
            tau: reward::DEFAULT_TAU,
            delta: preference::DEFAULT_DELTA,
        }
    }
}

/// Every intermediate of the ICPO reward path for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpoBreakdown {
    pub ranking: Ranking,
    pub preference: Vec<PreferenceScore>,
    pub fused: Vec<FusedReward>,
    pub advantages: AdvantageVector,
}

pub fn grpo_advantages(group: &Group) -> Result<AdvantageVector> {
    normalize_as(&group.rewards, AdvantageSource::Grpo)
}

/// rank -> preference scores -> fuse -> normalize.
pub fn icpo_breakdown(group: &Group, params: IcpoParams) -> Result<IcpoBreakdown> {
    let ranking = preference::rank_by_confidence(&group.scores)?;
    let preference = preference::preference_scores(&ranking, &group.scores, params.delta)?;
    let fused = group
        .rewards
        .iter()
        .zip(&preference)
        .map(|(r, p)| reward::fuse(*r, p.score, params.omega, params.tau))
        .collect::<Result<Vec<_>>>()?;
    let finals: Vec<f64> = fused.iter().map(|f| f.value).collect();
    let advantages = normalize_as(&finals, AdvantageSource::Icpo)?;
    Ok(IcpoBreakdown {
        ranking,
        preference,
        fused,
        advantages,
    })
}

pub fn icpo_advantages(group: &Group, params: IcpoParams) -> Result<AdvantageVector> {
    icpo_breakdown(group, params).map(|b| b.advantages)
}
