//! First-order tabular autoregressive policy.
//!
//! One row of `vocab` logits per conditioning state `(prompt, position,
//! previous token)`. Position 0 uses a dedicated start slot in place of a
//! previous token. Three copies are kept: the trainable logits, the frozen
//! reference taken at construction, and the old-policy snapshot used for
//! sampling and importance ratios.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Index of a conditioning state (a logit row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Snapshot {
    Current,
    Old,
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    vocab: usize,
    max_len: usize,
    num_prompts: usize,
    logits: Vec<f64>,
    old: Vec<f64>,
    reference: Vec<f64>,
}

impl PolicyTable {
    /// Uniform policy (all logits zero).
    pub fn uniform(vocab: usize, max_len: usize, num_prompts: usize) -> Result<Self> {
        if vocab < 2 {
            return Err(Error::config("vocab_size", "must be at least 2"));
        }
        if max_len < 1 {
            return Err(Error::config("max_len", "must be at least 1"));
        }
        if num_prompts < 1 {
            return Err(Error::config("num_prompts", "must be at least 1"));
        }
        let size = num_prompts * max_len * (vocab + 1) * vocab;
        Ok(Self {
            vocab,
            max_len,
            num_prompts,
            logits: vec![0.0; size],
            old: vec![0.0; size],
            reference: vec![0.0; size],
        })
    }

    /// Logits drawn i.i.d. from `N(0, scale^2)`; the draw becomes the
    /// reference and the old snapshot.
    pub fn random<R: Rng + ?Sized>(
        vocab: usize,
        max_len: usize,
        num_prompts: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut table = Self::uniform(vocab, max_len, num_prompts)?;
        if scale > 0.0 {
            let normal = Normal::new(0.0, scale)
                .map_err(|e| Error::config("init_scale", e.to_string()))?;
            for l in table.logits.iter_mut() {
                *l = normal.sample(rng);
            }
        }
        table.reference = table.logits.clone();
        table.old = table.logits.clone();
        Ok(table)
    }

    /// Replaces the trainable logits and resets both frozen copies to them.
    pub fn from_logits(
        vocab: usize,
        max_len: usize,
        num_prompts: usize,
        logits: Vec<f64>,
    ) -> Result<Self> {
        let mut table = Self::uniform(vocab, max_len, num_prompts)?;
        if logits.len() != table.logits.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} logits, got {}",
                table.logits.len(),
                logits.len()
            )));
        }
        table.reference = logits.clone();
        table.old = logits.clone();
        table.logits = logits;
        Ok(table)
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }
    pub fn max_len(&self) -> usize {
        self.max_len
    }
    pub fn num_prompts(&self) -> usize {
        self.num_prompts
    }
    pub fn num_states(&self) -> usize {
        self.logits.len() / self.vocab
    }

    pub fn state(&self, prompt: usize, position: usize, previous: Option<u32>) -> StateId {
        debug_assert!(prompt < self.num_prompts && position < self.max_len);
        let prev_slot = match previous {
            None => self.vocab,
            Some(t) => t as usize,
        };
        StateId((prompt * self.max_len + position) * (self.vocab + 1) + prev_slot)
    }

    fn table(&self, which: Snapshot) -> &[f64] {
        match which {
            Snapshot::Current => &self.logits,
            Snapshot::Old => &self.old,
            Snapshot::Reference => &self.reference,
        }
    }

    pub fn row(&self, which: Snapshot, state: StateId) -> &[f64] {
        let start = state.0 * self.vocab;
        &self.table(which)[start..start + self.vocab]
    }

    pub fn log_probs(&self, which: Snapshot, state: StateId) -> Vec<f64> {
        log_softmax(self.row(which, state))
    }

    pub fn probs(&self, which: Snapshot, state: StateId) -> Vec<f64> {
        self.log_probs(which, state).into_iter().map(f64::exp).collect()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    /// Copies the current logits into the old-policy snapshot.
    pub fn snapshot_old(&mut self) {
        self.old.copy_from_slice(&self.logits);
    }

    /// Gradient ascent step `logits += step_size * gradient`.
    pub fn ascend(&mut self, gradient: &[f64], step_size: f64) -> Result<()> {
        if gradient.len() != self.logits.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient has {} entries, policy has {}",
                gradient.len(),
                self.logits.len()
            )));
        }
        for (l, g) in self.logits.iter_mut().zip(gradient) {
            *l += step_size * g;
        }
        Ok(())
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Shannon entropy in nats of the distribution given by `log_probs`.
pub fn entropy(log_probs: &[f64]) -> f64 {
    -log_probs
        .iter()
        .map(|lp| if *lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() * lp })
        .sum::<f64>()
}

/// `KL(p || q)` for two log-probability vectors over the same support.
pub fn kl_divergence(p_log: &[f64], q_log: &[f64]) -> f64 {
    p_log
        .iter()
        .zip(q_log)
        .map(|(p, q)| p.exp() * (p - q))
        .sum::<f64>()
        .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_distributions() {
        let logits = vec![0.3, -1.0, 2.0, 0.0, 5.0, -4.0, 1.0, 1.0];
        let p: f64 = log_softmax(&logits).iter().map(|l| l.exp()).sum();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn states_are_distinct() {
        let t = PolicyTable::uniform(4, 3, 2).unwrap();
        let mut seen = std::collections::HashSet::new();
        for p in 0..2 {
            for pos in 0..3 {
                for prev in [None, Some(0), Some(1), Some(2), Some(3)] {
                    let s = t.state(p, pos, prev);
                    assert!(s.0 < t.num_states());
                    assert!(seen.insert(s));
                }
            }
        }
        assert_eq!(seen.len(), t.num_states());
    }

    #[test]
    fn snapshots() {
        let mut t = PolicyTable::uniform(3, 2, 1).unwrap();
        let g = vec![1.0; t.logits().len()];
        t.ascend(&g, 0.5).unwrap();
        let s = t.state(0, 0, None);
        assert_eq!(t.row(Snapshot::Current, s), &[0.5, 0.5, 0.5]);
        assert_eq!(t.row(Snapshot::Old, s), &[0.0, 0.0, 0.0]);
        t.snapshot_old();
        assert_eq!(t.row(Snapshot::Old, s), &[0.5, 0.5, 0.5]);
        assert_eq!(t.row(Snapshot::Reference, s), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn entropy_and_kl_basics() {
        assert!((entropy(&log_softmax(&[0.0; 4])) - 4f64.ln()).abs() < 1e-12);
        assert!(entropy(&log_softmax(&[0.0, 200.0, 0.0])) < 1e-12);
        let p = log_softmax(&[1.0, 0.0]);
        assert_eq!(kl_divergence(&p, &p), 0.0);
        assert!(kl_divergence(&p, &log_softmax(&[0.0, 1.0])) > 0.0);
    }
}
