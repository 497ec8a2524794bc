//! Clipped surrogate objective with an exact per-state KL penalty, and its
//! analytic gradient with respect to every logit.
//!
//! For one group of G responses:
//!
//! ```text
//! J = 1/G sum_k 1/|o_k| sum_t [ min(r A_k, clip(r, 1-eps, 1+eps) A_k) - beta KL_t ]
//! ```
//!
//! where `r = pi(o_t|s_t) / pi_old(o_t|s_t)` and `KL_t` is the categorical
//! `KL(pi(.|s_t) || pi_ref(.|s_t))` at the token's conditioning state. A
//! batch objective is the mean of its groups' objectives.

use std::collections::BTreeSet;

use super::policy::{entropy, kl_divergence, PolicyTable, Snapshot, StateId};
use super::rollout::RolloutGroup;
use crate::error::{Error, Result};

/// A rollout group paired with one advantage per response.
#[derive(Debug, Clone, Copy)]
pub struct ScoredGroup<'a> {
    pub rollout: &'a RolloutGroup,
    pub advantages: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateOutput {
    pub objective: f64,
    /// Clipped policy-gradient part, before the KL penalty.
    pub policy_term: f64,
    /// Token-averaged KL to the reference (not multiplied by beta).
    pub kl: f64,
    /// d objective / d logits, laid out like [`PolicyTable::logits`].
    pub gradient: Vec<f64>,
}

fn check_hyper(clip_eps: f64, kl_coef: f64) -> Result<()> {
    if !(clip_eps > 0.0 && clip_eps < 1.0) {
        return Err(Error::config("clip_eps", "must lie in (0, 1)"));
    }
    if !(kl_coef >= 0.0) || !kl_coef.is_finite() {
        return Err(Error::config("kl_coef", "must be non-negative"));
    }
    Ok(())
}

pub fn surrogate_objective(
    policy: &PolicyTable,
    batch: &[ScoredGroup<'_>],
    clip_eps: f64,
    kl_coef: f64,
) -> Result<SurrogateOutput> {
    check_hyper(clip_eps, kl_coef)?;
    let vocab = policy.vocab();
    let mut gradient = vec![0.0; policy.logits().len()];
    let mut policy_term = 0.0;
    let mut kl_total = 0.0;
    if batch.is_empty() {
        return Ok(SurrogateOutput {
            objective: 0.0,
            policy_term,
            kl: kl_total,
            gradient,
        });
    }
    let batch_weight = 1.0 / batch.len() as f64;

    for group in batch {
        let rollout = group.rollout;
        if group.advantages.len() != rollout.responses.len()
            || rollout.states.len() != rollout.responses.len()
        {
            return Err(Error::ShapeMismatch(format!(
                "{} responses, {} advantages, {} state lists",
                rollout.responses.len(),
                group.advantages.len(),
                rollout.states.len()
            )));
        }
        if rollout.responses.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let group_weight = batch_weight / rollout.responses.len() as f64;
        for ((response, states), &adv) in rollout
            .responses
            .iter()
            .zip(&rollout.states)
            .zip(group.advantages)
        {
            if states.len() != response.tokens.len() {
                return Err(Error::ShapeMismatch(format!(
                    "response {} has {} tokens but {} states",
                    response.id,
                    response.tokens.len(),
                    states.len()
                )));
            }
            let weight = group_weight / response.tokens.len() as f64;
            for ((&token, &old_lp), &state) in response
                .tokens
                .iter()
                .zip(&response.token_logprobs)
                .zip(states)
            {
                let log_p = policy.log_probs(Snapshot::Current, state);
                let log_ref = policy.log_probs(Snapshot::Reference, state);
                let a = token as usize;
                let ratio = (log_p[a] - old_lp).exp();
                let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
                let unclipped_term = ratio * adv;
                let clipped_term = clipped * adv;
                let row = &mut gradient[state.0 * vocab..(state.0 + 1) * vocab];
                if unclipped_term <= clipped_term {
                    policy_term += weight * unclipped_term;
                    // d(r)/dz_j = r (1[j = a] - p_j)
                    let scale = weight * adv * ratio;
                    for (j, g) in row.iter_mut().enumerate() {
                        let indicator = if j == a { 1.0 } else { 0.0 };
                        *g += scale * (indicator - log_p[j].exp());
                    }
                } else {
                    policy_term += weight * clipped_term;
                }

                let kl = kl_divergence(&log_p, &log_ref);
                kl_total += weight * kl;
                if kl_coef > 0.0 {
                    // dKL/dz_j = p_j (log p_j - log q_j - KL)
                    for (j, g) in row.iter_mut().enumerate() {
                        let p = log_p[j].exp();
                        *g -= kl_coef * weight * p * (log_p[j] - log_ref[j] - kl);
                    }
                }
            }
        }
    }
    Ok(SurrogateOutput {
        objective: policy_term - kl_coef * kl_total,
        policy_term,
        kl: kl_total,
        gradient,
    })
}

/// Distinct conditioning states visited by a set of rollouts, sorted.
pub fn visited_states<'a>(groups: impl IntoIterator<Item = &'a RolloutGroup>) -> Vec<StateId> {
    let set: BTreeSet<StateId> = groups
        .into_iter()
        .flat_map(|g| g.states.iter().flatten().copied())
        .collect();
    set.into_iter().collect()
}

/// Mean next-token entropy (nats) of the current policy over `states`.
pub fn policy_entropy(policy: &PolicyTable, states: &[StateId]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let total: f64 = states
        .iter()
        .map(|s| entropy(&policy.log_probs(Snapshot::Current, *s)))
        .sum();
    Ok(total / states.len() as f64)
}

/// Mean `KL(pi || pi_ref)` of the current policy over `states`.
pub fn mean_reference_kl(policy: &PolicyTable, states: &[StateId]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let total: f64 = states
        .iter()
        .map(|s| {
            kl_divergence(
                &policy.log_probs(Snapshot::Current, *s),
                &policy.log_probs(Snapshot::Reference, *s),
            )
        })
        .sum();
    Ok(total / states.len() as f64)
}
