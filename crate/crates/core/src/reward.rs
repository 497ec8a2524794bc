//! Verifiable rewards, their fusion with clipped preference scores, and the
//! bonus-weight schedule.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ANSWER_WEIGHT: f64 = 0.9;
pub const FORMAT_WEIGHT: f64 = 0.1;
pub const DEFAULT_TAU: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifiableReward {
    pub answer: f64,
    pub format: f64,
    pub value: f64,
}

/// Composite rule-based reward: `0.9 * answer + 0.1 * format`.
pub fn verifiable_reward(answer_correct: bool, format_ok: bool) -> VerifiableReward {
    let answer = if answer_correct { 1.0 } else { 0.0 };
    let format = if format_ok { 1.0 } else { 0.0 };
    VerifiableReward {
        answer,
        format,
        value: ANSWER_WEIGHT * answer + FORMAT_WEIGHT * format,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusedReward {
    pub verifiable: f64,
    /// `min(S_p, |r_verif| / tau)`, before weighting.
    pub bonus: f64,
    pub value: f64,
    pub omega: f64,
    pub tau: f64,
}

/// `r_final = r_verif + omega * min(score, |r_verif| / tau)`.
///
/// The clip bounds the injected bonus by the response's own verifiable
/// reward, so a response with zero reward never gains anything.
pub fn fuse(verifiable: f64, score: f64, omega: f64, tau: f64) -> Result<FusedReward> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidTau(tau));
    }
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(Error::InvalidOmega(omega));
    }
    let bonus = score.min(verifiable.abs() / tau);
    Ok(FusedReward {
        verifiable,
        bonus,
        value: verifiable + omega * bonus,
        omega,
        tau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    NoDecay,
    LinearDecay,
    WarmupRetention,
    WarmupDecay,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 4] = [
        ScheduleKind::NoDecay,
        ScheduleKind::LinearDecay,
        ScheduleKind::WarmupRetention,
        ScheduleKind::WarmupDecay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::NoDecay => "no_decay",
            ScheduleKind::LinearDecay => "linear_decay",
            ScheduleKind::WarmupRetention => "warmup_retention",
            ScheduleKind::WarmupDecay => "warmup_decay",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidSchedule(format!("unknown schedule kind `{s}`")))
    }
}

/// Bonus weight `omega(t)` over a run of `total_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    kind: ScheduleKind,
    peak: f64,
    floor: f64,
    end: f64,
    warmup_fraction: f64,
    total_steps: usize,
}

impl ScheduleSpec {
    pub fn new(
        kind: ScheduleKind,
        peak: f64,
        floor: f64,
        end: f64,
        warmup_fraction: f64,
        total_steps: usize,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        if !peak.is_finite() || peak < 0.0 {
            return bad(format!("peak must be non-negative, got {peak}"));
        }
        if !floor.is_finite() || floor < 0.0 || floor > peak {
            return bad(format!("floor must lie in [0, peak], got {floor}"));
        }
        if !end.is_finite() || end < 0.0 || end > peak {
            return bad(format!("end must lie in [0, peak], got {end}"));
        }
        if !(warmup_fraction > 0.0 && warmup_fraction < 1.0) {
            return bad(format!(
                "warmup fraction must lie in (0, 1), got {warmup_fraction}"
            ));
        }
        if total_steps == 0 {
            return bad("total steps must be positive".into());
        }
        Ok(Self {
            kind,
            peak,
            floor,
            end,
            warmup_fraction,
            total_steps,
        })
    }

    /// Schedule with the default shape parameters (peak 1.0, floor 0.0,
    /// end 0.1, warmup over the first 40% of steps).
    pub fn with_defaults(kind: ScheduleKind, total_steps: usize) -> Result<Self> {
        Self::new(kind, 1.0, 0.0, 0.1, 0.4, total_steps)
    }

    /// Constant weight; `ScheduleSpec::constant(0.0, T)` disables the bonus.
    pub fn constant(omega: f64, total_steps: usize) -> Result<Self> {
        Self::new(ScheduleKind::NoDecay, omega, 0.0, 0.0, 0.5, total_steps)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }
    pub fn peak(&self) -> f64 {
        self.peak
    }
    pub fn floor(&self) -> f64 {
        self.floor
    }
    pub fn end(&self) -> f64 {
        self.end
    }
    pub fn warmup_fraction(&self) -> f64 {
        self.warmup_fraction
    }
    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Warmup length, at least one step.
    pub fn warmup_steps(&self) -> usize {
        ((self.warmup_fraction * self.total_steps as f64).round() as usize)
            .clamp(1, self.total_steps)
    }

    pub fn omega_at(&self, step: usize) -> Result<f64> {
        let total = self.total_steps;
        if step > total {
            return Err(Error::InvalidStep { step, total });
        }
        let warmup = self.warmup_steps();
        let omega = match self.kind {
            ScheduleKind::NoDecay => self.peak,
            ScheduleKind::LinearDecay => linear(self.peak, self.end, step, 0, total),
            ScheduleKind::WarmupRetention => {
                if step < warmup {
                    self.inverse_cosine(step, warmup)
                } else {
                    self.peak
                }
            }
            ScheduleKind::WarmupDecay => {
                if step < warmup {
                    self.inverse_cosine(step, warmup)
                } else {
                    linear(self.peak, self.end, step, warmup, total)
                }
            }
        };
        Ok(omega)
    }

    fn inverse_cosine(&self, step: usize, warmup: usize) -> f64 {
        let phase = FRAC_PI_2 * step as f64 / warmup as f64;
        self.floor + (self.peak - self.floor) * (1.0 - phase.cos())
    }
}

/// Linear interpolation from `from` at `start` to `to` at `stop`, exact at
/// both endpoints.
fn linear(from: f64, to: f64, step: usize, start: usize, stop: usize) -> f64 {
    if step <= start || stop <= start {
        return from;
    }
    if step >= stop {
        return to;
    }
    let frac = (step - start) as f64 / (stop - start) as f64;
    from + (to - from) * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn composite_reward_values() {
        assert_eq!(verifiable_reward(false, true).value, 0.1);
        assert_eq!(verifiable_reward(true, true).value, 1.0);
        assert_eq!(verifiable_reward(true, false).value, 0.9);
        assert_eq!(verifiable_reward(false, false).value, 0.0);
    }

    #[test]
    fn worked_fusion_values() {
        let clipped = fuse(0.1, 0.5852, 1.0, 2.0).unwrap();
        assert!((clipped.value - 0.15).abs() < 1e-12);
        let open = fuse(1.0, 0.4372, 1.0, 2.0).unwrap();
        assert!((open.value - 1.4372).abs() < 1e-12);
        assert_eq!(fuse(0.37, 0.9, 0.0, 2.0).unwrap().value, 0.37);
    }

    #[test]
    fn fusion_rejects_bad_parameters() {
        assert_eq!(fuse(0.1, 0.1, 1.0, 0.0), Err(Error::InvalidTau(0.0)));
        assert_eq!(fuse(0.1, 0.1, -0.5, 2.0), Err(Error::InvalidOmega(-0.5)));
    }

    #[test]
    fn warmup_decay_endpoints_and_midpoint() {
        let s = ScheduleSpec::with_defaults(ScheduleKind::WarmupDecay, 500).unwrap();
        let tw = s.warmup_steps();
        assert_eq!(tw, 200);
        assert_eq!(s.omega_at(0).unwrap(), 0.0);
        assert_eq!(s.omega_at(tw).unwrap(), 1.0);
        assert_eq!(s.omega_at(500).unwrap(), 0.1);
        // linear oracle: halfway between 1.0 and 0.1
        let mid = s.omega_at((tw + 500) / 2).unwrap();
        assert!((mid - 0.55).abs() < 1e-12);
        assert!(matches!(
            s.omega_at(501),
            Err(Error::InvalidStep { step: 501, total: 500 })
        ));
    }

    #[test]
    fn other_kinds() {
        let nd = ScheduleSpec::with_defaults(ScheduleKind::NoDecay, 10).unwrap();
        assert!((0..=10).all(|t| nd.omega_at(t).unwrap() == 1.0));
        let ld = ScheduleSpec::with_defaults(ScheduleKind::LinearDecay, 10).unwrap();
        assert_eq!(ld.omega_at(0).unwrap(), 1.0);
        assert_eq!(ld.omega_at(10).unwrap(), 0.1);
        let wr = ScheduleSpec::with_defaults(ScheduleKind::WarmupRetention, 10).unwrap();
        assert_eq!(wr.omega_at(0).unwrap(), 0.0);
        assert_eq!(wr.omega_at(4).unwrap(), 1.0);
        assert_eq!(wr.omega_at(10).unwrap(), 1.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(ScheduleSpec::new(ScheduleKind::WarmupDecay, 1.0, 0.0, 0.1, 1.0, 10).is_err());
        assert!(ScheduleSpec::new(ScheduleKind::WarmupDecay, 1.0, 2.0, 0.1, 0.4, 10).is_err());
        assert!(ScheduleSpec::new(ScheduleKind::WarmupDecay, 1.0, 0.0, 0.1, 0.4, 0).is_err());
        assert_eq!(
            "warmup_decay".parse::<ScheduleKind>().unwrap(),
            ScheduleKind::WarmupDecay
        );
        assert!("cosine".parse::<ScheduleKind>().is_err());
        // one-step runs still warm up over a single step
        let s = ScheduleSpec::with_defaults(ScheduleKind::WarmupDecay, 1).unwrap();
        assert_eq!(s.warmup_steps(), 1);
        assert_eq!(s.omega_at(1).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn clip_dominance_and_monotonicity(
            r in -1.0f64..1.5,
            s in 0.0f64..3.0,
            ds in 0.0f64..1.0,
            omega in 0.0f64..2.0,
            tau in 0.1f64..5.0,
        ) {
            let f = fuse(r, s, omega, tau).unwrap();
            let cap = omega * r.abs() / tau;
            prop_assert!(f.value - r <= cap + 1e-12);
            if s >= r.abs() / tau {
                prop_assert!((f.value - r - cap).abs() <= 1e-12);
            }
            prop_assert!(fuse(r, s + ds, omega, tau).unwrap().value >= f.value);
            prop_assert!(fuse(r, s, omega + ds, tau).unwrap().value >= f.value);
            prop_assert!(fuse(r, s, omega, tau * 0.5).unwrap().value >= f.value);
        }

        #[test]
        fn schedules_stay_in_range(
            kind in prop::sample::select(ScheduleKind::ALL.to_vec()),
            peak in 0.1f64..3.0,
            floor_frac in 0.0f64..1.0,
            end_frac in 0.0f64..1.0,
            warmup in 0.05f64..0.95,
            total in 1usize..400,
        ) {
            let s = ScheduleSpec::new(kind, peak, floor_frac * peak, end_frac * peak, warmup, total).unwrap();
            let lo = s.floor().min(s.end());
            for t in 0..=total {
                let w = s.omega_at(t).unwrap();
                prop_assert!(w >= lo - 1e-12 && w <= peak + 1e-12, "{kind} t={t} w={w}");
            }
        }
    }
}
