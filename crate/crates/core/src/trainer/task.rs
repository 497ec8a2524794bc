//! Synthetic verifiable tasks.
//!
//! Token `vocab - 1` is the end token; the other `vocab - 1` tokens are
//! payload digits. A response is well-formed when it emits the end token
//! within `max_len` tokens, and correct when it is well-formed and its
//! payload (the tokens before the end token) is one of the prompt's targets.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// One target: the single digit `(a + b) mod (vocab - 1)`.
    ModSum,
    /// Several targets with distinct first digits.
    MultiPath,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::ModSum => "modsum",
            TaskKind::MultiPath => "multipath",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modsum" => Ok(TaskKind::ModSum),
            "multipath" => Ok(TaskKind::MultiPath),
            other => Err(Error::config("task", format!("unknown task `{other}`"))),
        }
    }
}

/// Controls how many correct sequences a `multipath` prompt has.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Difficulty {
    pub paths_per_prompt: usize,
    /// Longest payload a target may have.
    pub max_path_len: usize,
}

impl Default for Difficulty {
    fn default() -> Self {
        Self {
            paths_per_prompt: 3,
            max_path_len: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: usize,
    /// Operands, meaningful for `modsum` only.
    pub operands: (u32, u32),
    pub targets: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub vocab: usize,
    pub max_len: usize,
    pub prompts: Vec<Prompt>,
}

impl TaskSpec {
    pub fn build(
        kind: TaskKind,
        vocab: usize,
        max_len: usize,
        num_prompts: usize,
        difficulty: Difficulty,
        task_seed: u64,
    ) -> Result<Self> {
        if vocab < 2 {
            return Err(Error::config("vocab_size", "must be at least 2"));
        }
        if max_len < 2 {
            return Err(Error::config(
                "max_len",
                "must leave room for a payload and the end token",
            ));
        }
        if num_prompts == 0 {
            return Err(Error::config("num_prompts", "must be positive"));
        }
        let digits = (vocab - 1) as u32;
        let mut rng = ChaCha8Rng::seed_from_u64(task_seed);
        let prompts = match kind {
            TaskKind::ModSum => (0..num_prompts)
                .map(|id| {
                    let a = rng.gen_range(0..digits);
                    let b = rng.gen_range(0..digits);
                    Prompt {
                        id,
                        operands: (a, b),
                        targets: vec![vec![(a + b) % digits]],
                    }
                })
                .collect(),
            TaskKind::MultiPath => {
                let paths = difficulty.paths_per_prompt;
                if paths == 0 || paths > digits as usize {
                    return Err(Error::config(
                        "paths_per_prompt",
                        format!("must lie in 1..={digits}"),
                    ));
                }
                let longest = difficulty.max_path_len;
                if longest == 0 || longest >= max_len {
                    return Err(Error::config(
                        "max_path_len",
                        format!("must lie in 1..{max_len}"),
                    ));
                }
                (0..num_prompts)
                    .map(|id| {
                        let mut firsts: Vec<u32> = (0..digits).collect();
                        firsts.shuffle(&mut rng);
                        let targets = firsts[..paths]
                            .iter()
                            .map(|&first| {
                                let len = rng.gen_range(1..=longest);
                                let mut t = vec![first];
                                t.extend((1..len).map(|_| rng.gen_range(0..digits)));
                                t
                            })
                            .collect();
                        Prompt {
                            id,
                            operands: (0, 0),
                            targets,
                        }
                    })
                    .collect()
            }
        };
        Ok(Self {
            kind,
            vocab,
            max_len,
            prompts,
        })
    }

    pub fn end_token(&self) -> u32 {
        (self.vocab - 1) as u32
    }

    pub fn num_prompts(&self) -> usize {
        self.prompts.len()
    }

    /// Rule verifier: `(answer_correct, format_ok)`.
    pub fn verify(&self, prompt: usize, tokens: &[u32]) -> (bool, bool) {
        let end = self.end_token();
        let format_ok = tokens.last() == Some(&end) && tokens.len() <= self.max_len;
        let payload = if format_ok {
            &tokens[..tokens.len() - 1]
        } else {
            tokens
        };
        let correct = format_ok
            && self
                .prompts
                .get(prompt)
                .is_some_and(|p| p.targets.iter().any(|t| t.as_slice() == payload));
        (correct, format_ok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modsum_verifier() {
        let task = TaskSpec::build(TaskKind::ModSum, 8, 6, 4, Difficulty::default(), 1).unwrap();
        let p = &task.prompts[0];
        let (a, b) = p.operands;
        let answer = (a + b) % 7;
        assert_eq!(task.verify(0, &[answer, 7]), (true, true));
        assert_eq!(task.verify(0, &[answer]), (false, false));
        assert_eq!(task.verify(0, &[(answer + 1) % 7, 7]), (false, true));
        assert_eq!(task.verify(0, &[7]), (false, true));
    }

    #[test]
    fn multipath_targets_have_distinct_prefixes() {
        let task = TaskSpec::build(TaskKind::MultiPath, 8, 6, 16, Difficulty::default(), 3).unwrap();
        for p in &task.prompts {
            assert_eq!(p.targets.len(), 3);
            let mut firsts: Vec<u32> = p.targets.iter().map(|t| t[0]).collect();
            firsts.sort();
            firsts.dedup();
            assert_eq!(firsts.len(), 3);
            for t in &p.targets {
                assert!(!t.is_empty() && t.len() <= 2);
                assert!(t.iter().all(|d| *d < 7));
                let mut resp = t.clone();
                resp.push(7);
                assert_eq!(task.verify(p.id, &resp), (true, true));
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let a = TaskSpec::build(TaskKind::MultiPath, 8, 6, 8, Difficulty::default(), 9).unwrap();
        let b = TaskSpec::build(TaskKind::MultiPath, 8, 6, 8, Difficulty::default(), 9).unwrap();
        assert_eq!(a, b);
        assert!(TaskSpec::build(TaskKind::MultiPath, 3, 6, 8, Difficulty::default(), 9).is_err());
    }
}
