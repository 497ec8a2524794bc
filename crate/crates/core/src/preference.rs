//! Intrinsic-confidence ranking, preference pairs and preference advantage
//! scores.
//!
//! Responses of a group are ordered ascending by mean log-probability, so the
//! least confident response comes first. Every response `k` is paired with
//! each response ranked after it, and its score accumulates the confidence
//! ratios of those later responses:
//!
//! ```text
//! S_k = delta * sum_{j ranked after k} (L_j / L_k)  -  delta * L_last
//! ```
//!
//! where `L_last` is the mean log-probability of the most confident response.
//! Since all `L` are negative and sorted ascending, every ratio lies in
//! `(0, 1]` and every score is non-negative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqprob::SeqScore;

/// Default temperature scaling factor for the preference score.
pub const DEFAULT_DELTA: f64 = 0.4;

/// Response ids ordered from least to most confident.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn group_size(&self) -> usize {
        self.order.len()
    }

    /// 1-based ascending rank of `id`, if present.
    pub fn rank_of(&self, id: usize) -> Option<usize> {
        self.order.iter().position(|&x| x == id).map(|p| p + 1)
    }

    /// Id of the most confident response.
    pub fn last(&self) -> usize {
        *self.order.last().expect("rankings are never empty")
    }
}

/// Ordered pairs `(earlier, later)` in rank order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePairSet {
    pub pairs: Vec<(usize, usize)>,
}

impl PreferencePairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceScore {
    pub response_id: usize,
    pub score: f64,
    pub delta: f64,
}

/// Checks that the ids of `scores` are exactly `1..=G`.
pub(crate) fn check_ids(scores: &[SeqScore]) -> Result<()> {
    let n = scores.len();
    let mut seen = vec![false; n];
    for s in scores {
        if s.response_id == 0 || s.response_id > n || seen[s.response_id - 1] {
            return Err(Error::InvalidResponse(format!(
                "response ids must be a permutation of 1..={n}, found {}",
                s.response_id
            )));
        }
        seen[s.response_id - 1] = true;
    }
    Ok(())
}

/// Sorts responses ascending by mean log-probability; equal scores keep the
/// smaller id first.
pub fn rank_by_confidence(scores: &[SeqScore]) -> Result<Ranking> {
    if scores.is_empty() {
        return Err(Error::EmptyGroup);
    }
    check_ids(scores)?;
    if let Some((index, s)) = scores
        .iter()
        .enumerate()
        .find(|(_, s)| !s.mean_logprob.is_finite())
    {
        return Err(Error::InvalidLogProb {
            index,
            value: s.mean_logprob,
        });
    }
    let mut sorted: Vec<&SeqScore> = scores.iter().collect();
    sorted.sort_by(|a, b| {
        a.mean_logprob
            .total_cmp(&b.mean_logprob)
            .then(a.response_id.cmp(&b.response_id))
    });
    Ok(Ranking {
        order: sorted.into_iter().map(|s| s.response_id).collect(),
    })
}

pub fn build_pairs(ranking: &Ranking) -> PreferencePairSet {
    let order = ranking.order();
    let pairs = order
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| order[i + 1..].iter().map(move |&j| (k, j)))
        .collect();
    PreferencePairSet { pairs }
}

/// Preference advantage score of every response, returned in the order of
/// `scores`.
pub fn preference_scores(
    ranking: &Ranking,
    scores: &[SeqScore],
    delta: f64,
) -> Result<Vec<PreferenceScore>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidTemperature(delta));
    }
    if ranking.group_size() != scores.len() {
        return Err(Error::ShapeMismatch(format!(
            "ranking covers {} responses, got {} scores",
            ranking.group_size(),
            scores.len()
        )));
    }
    check_ids(scores)?;
    let mut by_id = vec![0.0; scores.len()];
    for (index, s) in scores.iter().enumerate() {
        if !(s.mean_logprob < 0.0) || !s.mean_logprob.is_finite() {
            return Err(Error::InvalidLogProb {
                index,
                value: s.mean_logprob,
            });
        }
        by_id[s.response_id - 1] = s.mean_logprob;
    }

    let sorted: Vec<f64> = ranking.order().iter().map(|&id| by_id[id - 1]).collect();
    let anchor = -delta * sorted[sorted.len() - 1];
    let mut result = vec![0.0; by_id.len()];
    for (pos, &id) in ranking.order().iter().enumerate() {
        let own = sorted[pos];
        let ratios: f64 = sorted[pos + 1..].iter().map(|later| later / own).sum();
        result[id - 1] = delta * ratios + anchor;
    }

    Ok(scores
        .iter()
        .map(|s| PreferenceScore {
            response_id: s.response_id,
            score: result[s.response_id - 1],
            delta,
        })
        .collect())
}
