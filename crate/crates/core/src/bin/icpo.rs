use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use icpo::harness::{self, replay, score, HarnessError};
use icpo::{IcpoParams, NoiseSpec, RunConfig};

#[derive(Parser)]
#[command(name = "icpo", version, about = "Confidence-driven preference advantages and a GRPO/ICPO simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay the reference worked groups and compare every value.
    ReplayAppendix,
    /// Score line-delimited groups.
    Score {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0.4)]
        delta: f64,
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
    },
    /// Inject reward noise into a score-format file.
    Perturb {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0.4)]
        fraction: f64,
        #[arg(long, default_value_t = 0.3)]
        magnitude: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train from a `key = value` config file.
    Train {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        log_rollouts: bool,
    },
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, HarnessError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| HarnessError::Io { path: p.display().to_string(), source: e })?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_input(path: &PathBuf) -> Result<BufReader<File>, HarnessError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| HarnessError::Io { path: path.display().to_string(), source: e })
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn failed(err: HarnessError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(EXIT_VALIDATION)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match cli.command {
        Command::ReplayAppendix => match replay::replay_appendix() {
            Ok(report) => {
                print!("{}", report.render());
                if report.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_VALIDATION)
                }
            }
            Err(e) => failed(e.into()),
        },
        Command::Score { input, output, delta, tau, omega } => {
            if !(delta > 0.0) {
                return usage(format!("--delta must be positive, got {delta}"));
            }
            if !(tau > 0.0) {
                return usage(format!("--tau must be positive, got {tau}"));
            }
            if !(omega >= 0.0) {
                return usage(format!("--omega must be non-negative, got {omega}"));
            }
            let run = || -> Result<usize, HarnessError> {
                let mut out = open_output(&output)?;
                let n = score::score_stream(open_input(&input)?, &mut out, IcpoParams { omega, tau, delta })?;
                out.flush().map_err(|e| HarnessError::Io { path: "<output>".into(), source: e })?;
                Ok(n)
            };
            match run() {
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => failed(e),
            }
        }
        Command::Perturb { input, output, fraction, magnitude, seed } => {
            let spec = match NoiseSpec::new(fraction, magnitude) {
                Ok(s) => s,
                Err(e) => return usage(e),
            };
            let run = || -> Result<usize, HarnessError> {
                let mut out = open_output(&output)?;
                let n = score::perturb_stream(open_input(&input)?, &mut out, &spec, seed)?;
                out.flush().map_err(|e| HarnessError::Io { path: "<output>".into(), source: e })?;
                Ok(n)
            };
            match run() {
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => failed(e),
            }
        }
        Command::Train { config, out, log_rollouts } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return failed(HarnessError::Io { path: config.display().to_string(), source: e }),
            };
            let mut cfg = match RunConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => return failed(e.into()),
            };
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            match harness::run_training(&cfg, log_rollouts) {
                Ok(m) => {
                    eprintln!("wrote {} steps to {}", m.rows.len(), cfg.output_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => failed(e),
            }
        }
    }
}
