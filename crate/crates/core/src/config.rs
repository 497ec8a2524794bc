//! Run configuration: a flat `key = value` text format with `#` comments.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{ScheduleKind, ScheduleSpec};
use crate::scenarios::NoiseSpec;
use crate::trainer::task::{Difficulty, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Grpo,
    Icpo,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Grpo => "grpo",
            Algorithm::Icpo => "icpo",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grpo" => Ok(Algorithm::Grpo),
            "icpo" => Ok(Algorithm::Icpo),
            other => Err(Error::config("algorithm", format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    None,
    Coarse,
    Noisy,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::None => "none",
            Scenario::Coarse => "coarse",
            Scenario::Noisy => "noisy",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scenario::None),
            "coarse" => Ok(Scenario::Coarse),
            "noisy" => Ok(Scenario::Noisy),
            other => Err(Error::config("scenario", format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub task: TaskKind,
    pub scenario: Scenario,
    pub group_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub task_seed: u64,
    pub delta: f64,
    pub tau: f64,
    pub schedule: ScheduleKind,
    pub omega_peak: f64,
    pub omega_floor: f64,
    pub omega_end: f64,
    pub warmup_fraction: f64,
    pub clip_eps: f64,
    pub kl_coef: f64,
    pub learning_rate: f64,
    pub temperature: f64,
    pub vocab_size: usize,
    pub max_len: usize,
    pub num_prompts: usize,
    /// Prompts sampled per step; 0 means every prompt.
    pub prompts_per_step: usize,
    pub mini_batches: usize,
    pub inner_passes: usize,
    pub init_scale: f64,
    pub paths_per_prompt: usize,
    pub max_path_len: usize,
    pub noise_fraction: f64,
    pub noise_magnitude: f64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Icpo,
            task: TaskKind::MultiPath,
            scenario: Scenario::None,
            group_size: 5,
            steps: 200,
            seed: 0,
            task_seed: 0,
            delta: 0.4,
            tau: 2.0,
            schedule: ScheduleKind::WarmupDecay,
            omega_peak: 1.0,
            omega_floor: 0.0,
            omega_end: 0.1,
            warmup_fraction: 0.4,
            clip_eps: 0.2,
            kl_coef: 0.001,
            learning_rate: 0.05,
            temperature: 1.0,
            vocab_size: 8,
            max_len: 6,
            num_prompts: 32,
            prompts_per_step: 0,
            mini_batches: 4,
            inner_passes: 1,
            init_scale: 0.5,
            paths_per_prompt: 3,
            max_path_len: 2,
            noise_fraction: 0.4,
            noise_magnitude: 0.3,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn keyed<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { message, .. } => Error::config(key, message),
        other => Error::config(key, other.to_string()),
    })
}

impl RunConfig {
    /// Parses `key = value` lines over the defaults. Unknown or repeated
    /// keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, "given more than once"));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "task" => self.task = value.parse()?,
            "scenario" => self.scenario = value.parse()?,
            "group_size" => self.group_size = parse_num(key, value)?,
            "steps" => self.steps = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "task_seed" => self.task_seed = parse_num(key, value)?,
            "delta" => self.delta = parse_num(key, value)?,
            "tau" => self.tau = parse_num(key, value)?,
            "schedule" => self.schedule = keyed(key, value.parse())?,
            "omega_peak" => self.omega_peak = parse_num(key, value)?,
            "omega_floor" => self.omega_floor = parse_num(key, value)?,
            "omega_end" => self.omega_end = parse_num(key, value)?,
            "warmup_fraction" => self.warmup_fraction = parse_num(key, value)?,
            "clip_eps" => self.clip_eps = parse_num(key, value)?,
            "kl_coef" => self.kl_coef = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "temperature" => self.temperature = parse_num(key, value)?,
            "vocab_size" => self.vocab_size = parse_num(key, value)?,
            "max_len" => self.max_len = parse_num(key, value)?,
            "num_prompts" => self.num_prompts = parse_num(key, value)?,
            "prompts_per_step" => self.prompts_per_step = parse_num(key, value)?,
            "mini_batches" => self.mini_batches = parse_num(key, value)?,
            "inner_passes" => self.inner_passes = parse_num(key, value)?,
            "init_scale" => self.init_scale = parse_num(key, value)?,
            "paths_per_prompt" => self.paths_per_prompt = parse_num(key, value)?,
            "max_path_len" => self.max_path_len = parse_num(key, value)?,
            "noise_fraction" => self.noise_fraction = parse_num(key, value)?,
            "noise_magnitude" => self.noise_magnitude = parse_num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, msg: &str| Err(Error::config(key, msg));
        if self.group_size < 1 {
            return fail("group_size", "must be at least 1");
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return fail("delta", "must be positive");
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return fail("tau", "must be positive");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return fail("clip_eps", "must lie in (0, 1)");
        }
        if !(self.kl_coef >= 0.0) || !self.kl_coef.is_finite() {
            return fail("kl_coef", "must be non-negative");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return fail("learning_rate", "must be positive");
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return fail("temperature", "must be positive");
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return fail("init_scale", "must be non-negative");
        }
        if self.mini_batches < 1 {
            return fail("mini_batches", "must be at least 1");
        }
        if self.inner_passes < 1 {
            return fail("inner_passes", "must be at least 1");
        }
        if self.prompts_per_step > self.num_prompts {
            return fail("prompts_per_step", "cannot exceed num_prompts");
        }
        keyed("schedule", self.schedule_spec().map(|_| ()))?;
        keyed("noise_magnitude", self.noise_spec().map(|_| ()))?;
        keyed(
            "task",
            crate::trainer::task::TaskSpec::build(
                self.task,
                self.vocab_size,
                self.max_len,
                self.num_prompts,
                self.difficulty(),
                self.task_seed,
            )
            .map(|_| ()),
        )?;
        Ok(())
    }

    /// Schedule over the run; a zero-step run gets a one-step horizon.
    pub fn schedule_spec(&self) -> Result<ScheduleSpec> {
        ScheduleSpec::new(
            self.schedule,
            self.omega_peak,
            self.omega_floor,
            self.omega_end,
            self.warmup_fraction,
            self.steps.max(1),
        )
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.noise_fraction, self.noise_magnitude)
    }

    pub fn difficulty(&self) -> Difficulty {
        Difficulty {
            paths_per_prompt: self.paths_per_prompt,
            max_path_len: self.max_path_len,
        }
    }

    pub fn prompts_each_step(&self) -> usize {
        if self.prompts_per_step == 0 {
            self.num_prompts
        } else {
            self.prompts_per_step
        }
    }

    /// Every key with its effective value, in a form [`RunConfig::parse`]
    /// reads back to an identical config.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("algorithm", self.algorithm.as_str().into());
        put("task", self.task.as_str().into());
        put("scenario", self.scenario.as_str().into());
        put("group_size", self.group_size.to_string());
        put("steps", self.steps.to_string());
        put("seed", self.seed.to_string());
        put("task_seed", self.task_seed.to_string());
        put("delta", self.delta.to_string());
        put("tau", self.tau.to_string());
        put("schedule", self.schedule.as_str().into());
        put("omega_peak", self.omega_peak.to_string());
        put("omega_floor", self.omega_floor.to_string());
        put("omega_end", self.omega_end.to_string());
        put("warmup_fraction", self.warmup_fraction.to_string());
        put("clip_eps", self.clip_eps.to_string());
        put("kl_coef", self.kl_coef.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("temperature", self.temperature.to_string());
        put("vocab_size", self.vocab_size.to_string());
        put("max_len", self.max_len.to_string());
        put("num_prompts", self.num_prompts.to_string());
        put("prompts_per_step", self.prompts_per_step.to_string());
        put("mini_batches", self.mini_batches.to_string());
        put("inner_passes", self.inner_passes.to_string());
        put("init_scale", self.init_scale.to_string());
        put("paths_per_prompt", self.paths_per_prompt.to_string());
        put("max_path_len", self.max_path_len.to_string());
        put("noise_fraction", self.noise_fraction.to_string());
        put("noise_magnitude", self.noise_magnitude.to_string());
        put("output_dir", self.output_dir.display().to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::parse(&cfg.resolved()).unwrap(), cfg);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let cfg = RunConfig::parse(
            "# a comment\nalgorithm = grpo\n\nscenario = noisy # trailing\nsteps=10\nschedule = linear_decay\n",
        )
        .unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Grpo);
        assert_eq!(cfg.scenario, Scenario::Noisy);
        assert_eq!(cfg.steps, 10);
        assert_eq!(cfg.schedule, ScheduleKind::LinearDecay);
    }

    #[test]
    fn errors_name_the_key() {
        let key_of = |text: &str| match RunConfig::parse(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(key_of("bogus = 1"), "bogus");
        assert_eq!(key_of("steps = many"), "steps");
        assert_eq!(key_of("tau = -1"), "tau");
        assert_eq!(key_of("algorithm = ppo"), "algorithm");
        assert_eq!(key_of("schedule = cosine"), "schedule");
        assert_eq!(key_of("noise_magnitude = 0"), "noise_magnitude");
        assert_eq!(key_of("steps = 1\nsteps = 2"), "steps");
        assert_eq!(key_of("just text"), "line 1");
    }
}
