//! Persistence and command entry points: metrics CSV, rollout JSONL, the
//! worked-example replay, and line-delimited group scoring.

pub mod metrics_csv;
pub mod replay;
pub mod score;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::config::RunConfig;
use crate::error::Error as CoreError;
use crate::trainer::{train_observed, RunMetrics};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
}

impl HarnessError {
    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Runs a training job and writes `metrics.csv`, `config.resolved` and,
/// when requested, `rollouts.jsonl` into `config.output_dir`.
pub fn run_training(config: &RunConfig, log_rollouts: bool) -> Result<RunMetrics> {
    config.validate()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;

    let resolved = dir.join("config.resolved");
    fs::write(&resolved, config.resolved()).map_err(|e| HarnessError::io(&resolved, e))?;

    let mut rollout_writer = if log_rollouts {
        let path = dir.join("rollouts.jsonl");
        let file = fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        Some((path, BufWriter::new(file)))
    } else {
        None
    };
    let mut write_error = None;
    let metrics = train_observed(config, |trace| {
        if let Some((path, w)) = rollout_writer.as_mut() {
            if write_error.is_none() {
                let line = serde_json::to_string(trace).expect("traces serialize");
                if let Err(e) = writeln!(w, "{line}") {
                    write_error = Some(HarnessError::io(&*path, e));
                }
            }
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    if let Some((path, mut w)) = rollout_writer {
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
    }

    let csv_path = dir.join("metrics.csv");
    fs::write(&csv_path, metrics_csv::render(&metrics)).map_err(|e| HarnessError::io(&csv_path, e))?;
    Ok(metrics)
}
