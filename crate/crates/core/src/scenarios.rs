//! Reward-stream transforms for the two stress scenarios: noisy verifiable
//! rewards and coarse-grained (group-uniform) rewards.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Random additive noise on a fraction of the rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Probability that a given response is perturbed.
    pub fraction: f64,
    pub magnitude: f64,
    pub clamp_low: f64,
    pub clamp_high: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            fraction: 0.4,
            magnitude: 0.3,
            clamp_low: 0.0,
            clamp_high: 1.0,
        }
    }
}

impl NoiseSpec {
    pub fn new(fraction: f64, magnitude: f64) -> Result<Self> {
        let spec = Self {
            fraction,
            magnitude,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude > 0.0) || !self.magnitude.is_finite() {
            return Err(Error::InvalidNoise(self.magnitude));
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::config(
                "noise_fraction",
                format!("must lie in [0, 1], got {}", self.fraction),
            ));
        }
        if !(self.clamp_low <= self.clamp_high) {
            return Err(Error::config("clamp_range", "low bound exceeds high bound"));
        }
        Ok(())
    }

    /// Shifts one reward by `±magnitude` and clamps the result.
    pub fn perturb(&self, reward: f64, positive: bool) -> f64 {
        let shifted = if positive {
            reward + self.magnitude
        } else {
            reward - self.magnitude
        };
        shifted.clamp(self.clamp_low, self.clamp_high)
    }
}

/// Outcome of noise injection for one response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub selected: bool,
    pub value: f64,
}

/// Independently selects each reward with probability `spec.fraction` and
/// shifts the selected ones up or down by `spec.magnitude` with equal odds.
///
/// Exactly two draws are consumed per reward whether or not it is selected,
/// so the stream position depends only on the number of rewards.
pub fn inject_noise_detailed<R: Rng + ?Sized>(
    rewards: &[f64],
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<Vec<Perturbation>> {
    spec.validate()?;
    Ok(rewards
        .iter()
        .map(|&r| {
            let selected = rng.gen::<f64>() < spec.fraction;
            let positive = rng.gen::<bool>();
            Perturbation {
                selected,
                value: if selected { spec.perturb(r, positive) } else { r },
            }
        })
        .collect())
}

pub fn inject_noise<R: Rng + ?Sized>(
    rewards: &[f64],
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    inject_noise_detailed(rewards, spec, rng).map(|v| v.into_iter().map(|p| p.value).collect())
}

/// Access to per-response answer correctness.
pub trait AnswerFlags {
    fn answer_flags(&self) -> Vec<bool>;
}

impl AnswerFlags for Vec<bool> {
    fn answer_flags(&self) -> Vec<bool> {
        self.clone()
    }
}

impl AnswerFlags for [bool] {
    fn answer_flags(&self) -> Vec<bool> {
        self.to_vec()
    }
}

/// All-correct or all-incorrect.
pub fn is_uniform(flags: &[bool]) -> bool {
    flags.windows(2).all(|w| w[0] == w[1])
}

/// Keeps only the groups whose answers are uniformly correct or uniformly
/// incorrect.
pub fn coarse_filter<I, G>(groups: I) -> impl Iterator<Item = G>
where
    I: IntoIterator<Item = G>,
    G: AnswerFlags,
{
    groups
        .into_iter()
        .filter(|g| is_uniform(&g.answer_flags()))
}
