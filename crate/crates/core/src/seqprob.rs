//! Sequence-level confidence: the length-normalized log-probability of a
//! sampled response.
//!
//! A response's confidence is the arithmetic mean of its per-token natural
//! log-probabilities over non-padding tokens. Means are clamped to at most
//! `-LOGPROB_FLOOR` so that a probability-one sequence never produces a zero
//! denominator when scores are compared as ratios downstream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper clamp (negated) for mean log-probabilities.
pub const LOGPROB_FLOOR: f64 = 1e-8;

/// Marker for padding positions in [`Response::from_padded`].
pub const PAD_TOKEN: u32 = u32::MAX;

/// One sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    /// Group-local index, 1-based.
    pub id: usize,
    pub tokens: Vec<u32>,
    /// Natural-log probabilities, one per non-padding token.
    pub token_logprobs: Vec<f64>,
    pub answer_correct: bool,
    pub format_ok: bool,
}

impl Response {
    pub fn new(
        id: usize,
        tokens: Vec<u32>,
        token_logprobs: Vec<f64>,
        answer_correct: bool,
        format_ok: bool,
    ) -> Result<Self> {
        if tokens.len() != token_logprobs.len() {
            return Err(Error::InvalidResponse(format!(
                "{} tokens but {} log-probabilities",
                tokens.len(),
                token_logprobs.len()
            )));
        }
        if tokens.is_empty() {
            return Err(Error::InvalidResponse("empty token list".into()));
        }
        validate_logprobs(&token_logprobs)?;
        Ok(Self {
            id,
            tokens,
            token_logprobs,
            answer_correct,
            format_ok,
        })
    }

    /// Builds a response from aligned token/log-prob buffers that may contain
    /// [`PAD_TOKEN`] positions. Padding positions are dropped together with
    /// whatever log-probability sits next to them.
    pub fn from_padded(
        id: usize,
        tokens: &[u32],
        token_logprobs: &[f64],
        answer_correct: bool,
        format_ok: bool,
    ) -> Result<Self> {
        if tokens.len() != token_logprobs.len() {
            return Err(Error::InvalidResponse(format!(
                "{} tokens but {} log-probabilities",
                tokens.len(),
                token_logprobs.len()
            )));
        }
        let (tokens, logprobs): (Vec<u32>, Vec<f64>) = tokens
            .iter()
            .zip(token_logprobs)
            .filter(|(t, _)| **t != PAD_TOKEN)
            .map(|(t, lp)| (*t, *lp))
            .unzip();
        Self::new(id, tokens, logprobs, answer_correct, format_ok)
    }

    /// Number of non-padding tokens (`L_i`).
    pub fn effective_length(&self) -> usize {
        self.token_logprobs.len()
    }
}

/// Length-normalized confidence of one response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeqScore {
    pub response_id: usize,
    /// Nats per token, always `<= -LOGPROB_FLOOR`.
    pub mean_logprob: f64,
}

impl SeqScore {
    /// Wraps an externally computed mean log-probability, applying the same
    /// validation and clamp as [`mean_logprob`].
    pub fn from_mean(response_id: usize, mean: f64) -> Result<Self> {
        if !mean.is_finite() || mean > 0.0 {
            return Err(Error::InvalidLogProb {
                index: 0,
                value: mean,
            });
        }
        Ok(Self {
            response_id,
            mean_logprob: mean.min(-LOGPROB_FLOOR),
        })
    }
}

fn validate_logprobs(logprobs: &[f64]) -> Result<()> {
    match logprobs
        .iter()
        .enumerate()
        .find(|(_, lp)| !lp.is_finite() || **lp > 0.0)
    {
        Some((index, &value)) => Err(Error::InvalidLogProb { index, value }),
        None => Ok(()),
    }
}

/// Mean per-token log-probability of a raw log-prob slice.
pub fn mean_of_logprobs(response_id: usize, logprobs: &[f64]) -> Result<SeqScore> {
    if logprobs.is_empty() {
        return Err(Error::InvalidResponse("empty token list".into()));
    }
    validate_logprobs(logprobs)?;
    let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
    Ok(SeqScore {
        response_id,
        mean_logprob: mean.min(-LOGPROB_FLOOR),
    })
}

pub fn mean_logprob(response: &Response) -> Result<SeqScore> {
    mean_of_logprobs(response.id, &response.token_logprobs)
}
