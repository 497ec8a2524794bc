//! Outer training loop.
//!
//! Each step: snapshot the old policy, sample one group per selected prompt,
//! score the groups (verifiable reward, optional noise or coarse filtering,
//! ICPO fusion), normalize advantages within each group, then take one
//! gradient-ascent step per mini-batch on the clipped surrogate.
//!
//! Every random draw comes from a ChaCha stream keyed by `(seed, purpose,
//! step, index)`, so results do not depend on thread scheduling.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{mean_reference_kl, policy_entropy, surrogate_objective, visited_states, ScoredGroup};
use super::policy::PolicyTable;
use super::rollout::{sample_group, RolloutGroup};
use super::task::TaskSpec;
use crate::advantage::{grpo_advantages, icpo_advantages, Group, IcpoParams};
use crate::config::{Algorithm, RunConfig, Scenario};
use crate::error::Result;
use crate::reward::verifiable_reward;
use crate::scenarios::{self, AnswerFlags};
use crate::seqprob::{mean_logprob, Response};

const STREAM_INIT: u64 = 1;
const STREAM_PROMPTS: u64 = 2;
const STREAM_SAMPLE: u64 = 3;
const STREAM_NOISE: u64 = 4;

fn stream(seed: u64, purpose: u64, step: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream((step << 32) | (index & 0xffff_ffff));
    rng
}

/// One row of per-step telemetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub omega: f64,
    /// Mean clean verifiable reward over every sampled response.
    pub mean_reward: f64,
    pub accuracy: f64,
    pub entropy: f64,
    pub kl: f64,
    /// Mean |advantage| over responses that entered the update.
    pub mean_abs_advantage: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub rows: Vec<StepMetrics>,
}

/// Everything about one sampled group that an audit needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTrace {
    pub step: usize,
    pub prompt: usize,
    pub retained: bool,
    pub responses: Vec<Response>,
    pub mean_logprobs: Vec<f64>,
    pub clean_rewards: Vec<f64>,
    /// Rewards the update sees (after noise injection, if any).
    pub rewards: Vec<f64>,
    /// Empty when the group was filtered out.
    pub advantages: Vec<f64>,
}

impl AnswerFlags for GroupTrace {
    fn answer_flags(&self) -> Vec<bool> {
        self.responses.iter().map(|r| r.answer_correct).collect()
    }
}

pub struct Trainer {
    config: RunConfig,
    task: TaskSpec,
    policy: PolicyTable,
    step: usize,
}

impl Trainer {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let task = TaskSpec::build(
            config.task,
            config.vocab_size,
            config.max_len,
            config.num_prompts,
            config.difficulty(),
            config.task_seed,
        )?;
        let policy = PolicyTable::random(
            config.vocab_size,
            config.max_len,
            config.num_prompts,
            config.init_scale,
            &mut stream(config.seed, STREAM_INIT, 0, 0),
        )?;
        Ok(Self {
            config: config.clone(),
            task,
            policy,
            step: 0,
        })
    }

    pub fn policy(&self) -> &PolicyTable {
        &self.policy
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Switches the reward scenario for the remaining steps, e.g. to apply the
    /// coarse filter to a policy that has already been trained.
    pub fn set_scenario(&mut self, scenario: Scenario) {
        self.config.scenario = scenario;
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// Runs one outer step; `observe` sees every sampled group.
    pub fn step(&mut self, observe: &mut dyn FnMut(&GroupTrace)) -> Result<StepMetrics> {
        let cfg = &self.config;
        let step = self.step;
        let omega = match cfg.algorithm {
            Algorithm::Grpo => 0.0,
            Algorithm::Icpo => cfg.schedule_spec()?.omega_at(step.min(cfg.steps.max(1)))?,
        };

        self.policy.snapshot_old();

        let per_step = cfg.prompts_each_step();
        let prompts: Vec<usize> = if per_step == cfg.num_prompts {
            (0..cfg.num_prompts).collect()
        } else {
            let mut rng = stream(cfg.seed, STREAM_PROMPTS, step as u64, 0);
            let mut picked = sample(&mut rng, cfg.num_prompts, per_step).into_vec();
            picked.sort_unstable();
            picked
        };

        let policy = &self.policy;
        let task = &self.task;
        let rollouts: Vec<RolloutGroup> = prompts
            .par_iter()
            .map(|&p| {
                let mut rng = stream(cfg.seed, STREAM_SAMPLE, step as u64, p as u64);
                sample_group(policy, task, p, cfg.group_size, cfg.temperature, &mut rng)
            })
            .collect::<Result<_>>()?;

        let noise = cfg.noise_spec()?;
        let params = IcpoParams {
            omega,
            tau: cfg.tau,
            delta: cfg.delta,
        };
        let traces: Vec<GroupTrace> = rollouts
            .par_iter()
            .map(|g| -> Result<GroupTrace> {
                let clean: Vec<f64> = g
                    .responses
                    .iter()
                    .map(|r| verifiable_reward(r.answer_correct, r.format_ok).value)
                    .collect();
                let rewards = match cfg.scenario {
                    Scenario::Noisy => {
                        let mut rng = stream(cfg.seed, STREAM_NOISE, step as u64, g.prompt as u64);
                        scenarios::inject_noise(&clean, &noise, &mut rng)?
                    }
                    _ => clean.clone(),
                };
                // Coarse groups must be reward-uniform, so format must agree too.
                let retained = cfg.scenario != Scenario::Coarse
                    || (scenarios::is_uniform(&g.answer_flags())
                        && scenarios::is_uniform(&g.format_flags()));
                let scores = g
                    .responses
                    .iter()
                    .map(mean_logprob)
                    .collect::<Result<Vec<_>>>()?;
                let mean_logprobs = scores.iter().map(|s| s.mean_logprob).collect();
                let advantages = if retained {
                    let group = Group::new(scores, rewards.clone())?;
                    match cfg.algorithm {
                        Algorithm::Grpo => grpo_advantages(&group)?.values,
                        Algorithm::Icpo => icpo_advantages(&group, params)?.values,
                    }
                } else {
                    Vec::new()
                };
                Ok(GroupTrace {
                    step,
                    prompt: g.prompt,
                    retained,
                    responses: g.responses.clone(),
                    mean_logprobs,
                    clean_rewards: clean,
                    rewards,
                    advantages,
                })
            })
            .collect::<Result<_>>()?;

        let states = visited_states(&rollouts);
        let entropy = policy_entropy(&self.policy, &states)?;
        let kl = mean_reference_kl(&self.policy, &states)?;
        let total: usize = traces.iter().map(|t| t.responses.len()).sum();
        let mean_reward = traces.iter().flat_map(|t| &t.clean_rewards).sum::<f64>() / total as f64;
        let accuracy = traces
            .iter()
            .flat_map(|t| &t.responses)
            .filter(|r| r.answer_correct)
            .count() as f64
            / total as f64;
        let used: Vec<f64> = traces.iter().flat_map(|t| t.advantages.iter().copied()).collect();
        let mean_abs_advantage = if used.is_empty() {
            0.0
        } else {
            used.iter().map(|a| a.abs()).sum::<f64>() / used.len() as f64
        };

        for t in &traces {
            observe(t);
        }

        let batch: Vec<ScoredGroup<'_>> = rollouts
            .iter()
            .zip(&traces)
            .filter(|(_, t)| t.retained)
            .map(|(g, t)| ScoredGroup {
                rollout: g,
                advantages: &t.advantages,
            })
            .collect();
        if !batch.is_empty() {
            let chunk = batch.len().div_ceil(cfg.mini_batches);
            for _ in 0..cfg.inner_passes {
                for mini in batch.chunks(chunk) {
                    let out = surrogate_objective(&self.policy, mini, cfg.clip_eps, cfg.kl_coef)?;
                    self.policy.ascend(&out.gradient, cfg.learning_rate)?;
                }
            }
        }

        self.step += 1;
        Ok(StepMetrics {
            step,
            omega,
            mean_reward,
            accuracy,
            entropy,
            kl,
            mean_abs_advantage,
        })
    }
}

/// Runs `config.steps` steps and returns the per-step metrics.
pub fn train(config: &RunConfig) -> Result<RunMetrics> {
    train_observed(config, |_| {})
}

pub fn train_observed(
    config: &RunConfig,
    mut observe: impl FnMut(&GroupTrace),
) -> Result<RunMetrics> {
    let mut trainer = Trainer::new(config)?;
    let mut rows = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        rows.push(trainer.step(&mut observe)?);
    }
    Ok(RunMetrics { rows })
}
