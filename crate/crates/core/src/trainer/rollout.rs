//! Group sampling from the old-policy snapshot.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{log_softmax, PolicyTable, Snapshot, StateId};
use super::task::TaskSpec;
use crate::error::{Error, Result};
use crate::scenarios::AnswerFlags;
use crate::seqprob::Response;

/// G responses to one prompt, with the conditioning state of every token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub prompt: usize,
    pub responses: Vec<Response>,
    #[serde(skip)]
    pub states: Vec<Vec<StateId>>,
}

impl RolloutGroup {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn format_flags(&self) -> Vec<bool> {
        self.responses.iter().map(|r| r.format_ok).collect()
    }
}

impl AnswerFlags for RolloutGroup {
    fn answer_flags(&self) -> Vec<bool> {
        self.responses.iter().map(|r| r.answer_correct).collect()
    }
}

/// Samples `group_size` responses token by token from the old policy at
/// `temperature`. Recorded log-probabilities are those of the untempered
/// old policy.
pub fn sample_group<R: Rng + ?Sized>(
    policy: &PolicyTable,
    task: &TaskSpec,
    prompt: usize,
    group_size: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<RolloutGroup> {
    if group_size < 1 {
        return Err(Error::InvalidGroupSize(group_size));
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::config("temperature", "must be positive"));
    }
    if prompt >= policy.num_prompts() || prompt >= task.num_prompts() {
        return Err(Error::ShapeMismatch(format!("prompt {prompt} out of range")));
    }
    let end = task.end_token();
    let mut responses = Vec::with_capacity(group_size);
    let mut states = Vec::with_capacity(group_size);
    for id in 1..=group_size {
        let mut tokens = Vec::new();
        let mut logprobs = Vec::new();
        let mut visited = Vec::new();
        let mut previous = None;
        for position in 0..policy.max_len() {
            let state = policy.state(prompt, position, previous);
            let row = policy.row(Snapshot::Old, state);
            let log_p = log_softmax(row);
            let token = if temperature == 1.0 {
                draw(&log_p, rng)
            } else {
                let tempered: Vec<f64> = row.iter().map(|l| l / temperature).collect();
                draw(&log_softmax(&tempered), rng)
            };
            tokens.push(token as u32);
            logprobs.push(log_p[token].min(0.0));
            visited.push(state);
            previous = Some(token as u32);
            if token as u32 == end {
                break;
            }
        }
        let (answer_correct, format_ok) = task.verify(prompt, &tokens);
        responses.push(Response::new(id, tokens, logprobs, answer_correct, format_ok)?);
        states.push(visited);
    }
    Ok(RolloutGroup {
        prompt,
        responses,
        states,
    })
}

fn draw<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R) -> usize {
    let weights = log_probs.iter().map(|lp| lp.exp());
    WeightedIndex::new(weights)
        .expect("softmax rows have positive mass")
        .sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqprob::{mean_logprob, LOGPROB_FLOOR};
    use crate::trainer::task::{Difficulty, TaskKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collapsed_policy_repeats_itself() {
        let task = TaskSpec::build(TaskKind::ModSum, 4, 3, 1, Difficulty::default(), 0).unwrap();
        let mut logits = vec![0.0; PolicyTable::uniform(4, 3, 1).unwrap().logits().len()];
        // Always emit the end token, with a 40-nat margin.
        for row in logits.chunks_mut(4) {
            row[3] = 40.0;
        }
        let policy = PolicyTable::from_logits(4, 3, 1, logits).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = sample_group(&policy, &task, 0, 5, 1.0, &mut rng).unwrap();
        assert_eq!(g.len(), 5);
        for r in &g.responses {
            assert_eq!(r.tokens, vec![3]);
            assert_eq!(mean_logprob(r).unwrap().mean_logprob, -LOGPROB_FLOOR);
        }
    }

    #[test]
    fn uniform_sampling_frequencies() {
        // max_len 1: a single draw per response.
        let policy = PolicyTable::uniform(4, 1, 1).unwrap();
        let task = TaskSpec {
            kind: TaskKind::ModSum,
            vocab: 4,
            max_len: 1,
            prompts: vec![crate::trainer::task::Prompt {
                id: 0,
                operands: (0, 0),
                targets: vec![vec![]],
            }],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = sample_group(&policy, &task, 0, 10_000, 1.0, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        for r in &g.responses {
            counts[r.tokens[0] as usize] += 1;
            assert!((r.token_logprobs[0] + 4f64.ln()).abs() < 1e-12);
        }
        let sigma = (10_000.0f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - 2500.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn default_group_size_and_errors() {
        let policy = PolicyTable::uniform(8, 6, 2).unwrap();
        let task = TaskSpec::build(TaskKind::MultiPath, 8, 6, 2, Difficulty::default(), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = sample_group(&policy, &task, 1, 5, 1.0, &mut rng).unwrap();
        assert_eq!(g.responses.len(), 5);
        assert_eq!(g.states.len(), 5);
        for (r, s) in g.responses.iter().zip(&g.states) {
            assert_eq!(r.tokens.len(), s.len());
            assert!(r.tokens.len() <= 6);
        }
        assert_eq!(
            sample_group(&policy, &task, 0, 0, 1.0, &mut rng),
            Err(Error::InvalidGroupSize(0))
        );
    }
}
