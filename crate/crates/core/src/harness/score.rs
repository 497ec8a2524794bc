//! Line-delimited group scoring.
//!
//! Input, one group per line:
//!
//! ```text
//! {"group_id": ..., "responses": [{"id": 1, "mean_logprob": -0.01,
//!   "answer_correct": true, "format_ok": true}, ...]}
//! ```
//!
//! A response may give `token_logprobs` instead of `mean_logprob`, and may
//! carry an explicit `r_verif` that overrides the composite reward (this is
//! how `perturb` output feeds back in). Blank lines are skipped.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::advantage::{grpo_advantages, icpo_breakdown, Group, IcpoParams};
use crate::reward::verifiable_reward;
use crate::scenarios::{inject_noise, NoiseSpec};
use crate::seqprob::{mean_of_logprobs, SeqScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputResponse {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_logprob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
    pub answer_correct: bool,
    pub format_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_verif: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputGroup {
    pub group_id: serde_json::Value,
    pub responses: Vec<InputResponse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResponse {
    pub id: usize,
    #[serde(rename = "S_p")]
    pub s_p: f64,
    pub r_verif: f64,
    pub r_final: f64,
    pub advantage_grpo: f64,
    pub advantage_icpo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredGroup {
    pub group_id: serde_json::Value,
    pub responses: Vec<ScoredResponse>,
}

impl InputResponse {
    fn seq_score(&self) -> crate::error::Result<SeqScore> {
        match (&self.mean_logprob, &self.token_logprobs) {
            (Some(m), None) => SeqScore::from_mean(self.id, *m),
            (None, Some(t)) => mean_of_logprobs(self.id, t),
            _ => Err(crate::error::Error::InvalidResponse(format!(
                "response {} needs exactly one of mean_logprob or token_logprobs",
                self.id
            ))),
        }
    }

    fn reward(&self) -> f64 {
        self.r_verif
            .unwrap_or_else(|| verifiable_reward(self.answer_correct, self.format_ok).value)
    }
}

/// Responses are reordered by id so that ids `1..=G` line up with positions.
fn sorted(group: &InputGroup) -> Vec<&InputResponse> {
    let mut rs: Vec<&InputResponse> = group.responses.iter().collect();
    rs.sort_by_key(|r| r.id);
    rs
}

pub fn score_group(group: &InputGroup, params: IcpoParams) -> crate::error::Result<ScoredGroup> {
    let responses = sorted(group);
    let scores = responses
        .iter()
        .map(|r| r.seq_score())
        .collect::<crate::error::Result<Vec<_>>>()?;
    let rewards: Vec<f64> = responses.iter().map(|r| r.reward()).collect();
    let g = Group::new(scores, rewards)?;
    let icpo = icpo_breakdown(&g, params)?;
    let grpo = grpo_advantages(&g)?;
    Ok(ScoredGroup {
        group_id: group.group_id.clone(),
        responses: responses
            .iter()
            .enumerate()
            .map(|(i, r)| ScoredResponse {
                id: r.id,
                s_p: icpo.preference[i].score,
                r_verif: g.rewards[i],
                r_final: icpo.fused[i].value,
                advantage_grpo: grpo.values[i],
                advantage_icpo: icpo.advantages.values[i],
            })
            .collect(),
    })
}

fn parse_line(line: &str, lineno: usize) -> Result<InputGroup> {
    serde_json::from_str(line).map_err(|e| HarnessError::Record {
        line: lineno,
        message: e.to_string(),
    })
}

/// Scores every line of `input` into `output`. Stops at the first bad line.
pub fn score_stream<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    params: IcpoParams,
) -> Result<usize> {
    let mut count = 0;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| HarnessError::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let group = parse_line(&line, lineno)?;
        let scored = score_group(&group, params).map_err(|e| HarnessError::Record {
            line: lineno,
            message: e.to_string(),
        })?;
        let text = serde_json::to_string(&scored).expect("scored groups serialize");
        writeln!(output, "{text}").map_err(|e| HarnessError::io("<output>", e))?;
        count += 1;
    }
    Ok(count)
}

/// Applies reward noise to every response of every line, writing the
/// perturbed reward into `r_verif`. Line `n` (counting non-blank lines from
/// zero) draws from ChaCha stream `n` of `seed`.
pub fn perturb_stream<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    spec: &NoiseSpec,
    seed: u64,
) -> Result<usize> {
    let mut count = 0;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| HarnessError::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut group = parse_line(&line, lineno)?;
        let rewards: Vec<f64> = group.responses.iter().map(|r| r.reward()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(count as u64);
        let noisy = inject_noise(&rewards, spec, &mut rng)?;
        for (r, v) in group.responses.iter_mut().zip(noisy) {
            r.r_verif = Some(v);
        }
        let text = serde_json::to_string(&group).expect("groups serialize");
        writeln!(output, "{text}").map_err(|e| HarnessError::io("<output>", e))?;
        count += 1;
    }
    Ok(count)
}
