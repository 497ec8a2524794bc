//! C ABI over the `icpo` scoring pipeline, omega schedules and the tabular
//! simulator.
//!
//! Every function returns an [`IcpoStatus`]; results are written through out
//! pointers supplied by the caller. On failure a description is kept per
//! thread and can be read with [`icpo_last_error`]. Panics never cross the
//! boundary. Schedules and finished runs are opaque handles released with
//! their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use icpo::trainer::{train, StepMetrics};
use icpo::{Error, Group, IcpoParams, RunConfig, ScheduleKind, ScheduleSpec, SeqScore};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcpoStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Numeric input rejected by the library (shape, range, non-finite).
    InvalidArgument = 2,
    /// Run configuration text could not be parsed or validated.
    InvalidConfig = 3,
    /// Index past the end of a run's metrics.
    OutOfRange = 4,
    /// Internal panic caught at the boundary.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcpoScheduleKind {
    NoDecay = 0,
    LinearDecay = 1,
    WarmupRetention = 2,
    WarmupDecay = 3,
}

impl From<IcpoScheduleKind> for ScheduleKind {
    fn from(k: IcpoScheduleKind) -> Self {
        match k {
            IcpoScheduleKind::NoDecay => ScheduleKind::NoDecay,
            IcpoScheduleKind::LinearDecay => ScheduleKind::LinearDecay,
            IcpoScheduleKind::WarmupRetention => ScheduleKind::WarmupRetention,
            IcpoScheduleKind::WarmupDecay => ScheduleKind::WarmupDecay,
        }
    }
}

/// One row of a run's per-step metrics.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IcpoMetricsRow {
    pub step: u64,
    pub omega: f64,
    pub mean_reward: f64,
    pub accuracy: f64,
    pub entropy: f64,
    pub kl: f64,
    pub mean_abs_advantage: f64,
}

impl From<&StepMetrics> for IcpoMetricsRow {
    fn from(m: &StepMetrics) -> Self {
        IcpoMetricsRow {
            step: m.step as u64,
            omega: m.omega,
            mean_reward: m.mean_reward,
            accuracy: m.accuracy,
            entropy: m.entropy,
            kl: m.kl,
            mean_abs_advantage: m.mean_abs_advantage,
        }
    }
}

/// Opaque omega schedule.
pub struct IcpoSchedule {
    spec: ScheduleSpec,
}

/// Opaque finished training run.
pub struct IcpoRun {
    rows: Vec<IcpoMetricsRow>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: IcpoStatus, msg: impl Into<String>) -> IcpoStatus {
    set_error(msg.into());
    status
}

fn from_core(err: Error) -> IcpoStatus {
    let status = match err {
        Error::Config { .. } => IcpoStatus::InvalidConfig,
        _ => IcpoStatus::InvalidArgument,
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> IcpoStatus) -> IcpoStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(IcpoStatus::Internal, "internal panic"),
    }
}

/// Borrow `len` doubles; a null pointer is accepted only for `len == 0`.
unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], IcpoStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(IcpoStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], IcpoStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(IcpoStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! core {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_core(e),
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(IcpoStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

fn seq_scores(means: &[f64]) -> Result<Vec<SeqScore>, Error> {
    means
        .iter()
        .enumerate()
        .map(|(i, &m)| SeqScore::from_mean(i + 1, m))
        .collect()
}

/// Static description of a status code. Never null.
#[no_mangle]
pub extern "C" fn icpo_status_message(status: IcpoStatus) -> *const c_char {
    let s: &'static CStr = match status {
        IcpoStatus::Ok => c"ok",
        IcpoStatus::NullPointer => c"null pointer argument",
        IcpoStatus::InvalidArgument => c"invalid argument",
        IcpoStatus::InvalidConfig => c"invalid configuration",
        IcpoStatus::OutOfRange => c"index out of range",
        IcpoStatus::Internal => c"internal error",
    };
    s.as_ptr()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn icpo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Mean per-token log-probability of one response.
///
/// # Safety
/// `logprobs` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icpo_mean_logprob(logprobs: *const f64, len: usize, out: *mut f64) -> IcpoStatus {
    guard(|| {
        non_null!(out);
        let lp = tri!(slice(logprobs, len, "logprobs"));
        let s = core!(icpo::seqprob::mean_of_logprobs(1, lp));
        *out = s.mean_logprob;
        IcpoStatus::Ok
    })
}

/// Preference scores for a group given each response's mean log-probability.
/// Scores are written in input order.
///
/// # Safety
/// `mean_logprobs` must point to `n` readable doubles and `out_scores` to `n`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn icpo_preference_scores(
    mean_logprobs: *const f64,
    n: usize,
    delta: f64,
    out_scores: *mut f64,
) -> IcpoStatus {
    guard(|| {
        let means = tri!(slice(mean_logprobs, n, "mean_logprobs"));
        let out = tri!(slice_mut(out_scores, n, "out_scores"));
        let scores = core!(seq_scores(means));
        let ranking = core!(icpo::rank_by_confidence(&scores));
        let prefs = core!(icpo::preference_scores(&ranking, &scores, delta));
        for (o, p) in out.iter_mut().zip(&prefs) {
            *o = p.score;
        }
        IcpoStatus::Ok
    })
}

/// Clipped fusion of a verifiable reward with a preference score.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icpo_fuse(reward: f64, score: f64, omega: f64, tau: f64, out: *mut f64) -> IcpoStatus {
    guard(|| {
        non_null!(out);
        *out = core!(icpo::fuse(reward, score, omega, tau)).value;
        IcpoStatus::Ok
    })
}

/// Group-normalized advantages of `n` rewards.
///
/// # Safety
/// `rewards` must point to `n` readable doubles and `out` to `n` writable ones.
#[no_mangle]
pub unsafe extern "C" fn icpo_normalize(rewards: *const f64, n: usize, out: *mut f64) -> IcpoStatus {
    guard(|| {
        let r = tri!(slice(rewards, n, "rewards"));
        let o = tri!(slice_mut(out, n, "out"));
        let adv = core!(icpo::normalize(r));
        o.copy_from_slice(&adv.values);
        IcpoStatus::Ok
    })
}

/// GRPO and ICPO advantages of one group. `out_grpo` may be null.
///
/// # Safety
/// Input arrays must hold `n` readable doubles; non-null outputs must hold
/// `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn icpo_group_advantages(
    mean_logprobs: *const f64,
    rewards: *const f64,
    n: usize,
    omega: f64,
    tau: f64,
    delta: f64,
    out_grpo: *mut f64,
    out_icpo: *mut f64,
) -> IcpoStatus {
    guard(|| {
        let means = tri!(slice(mean_logprobs, n, "mean_logprobs"));
        let r = tri!(slice(rewards, n, "rewards"));
        let icpo_out = tri!(slice_mut(out_icpo, n, "out_icpo"));
        let group = core!(seq_scores(means).and_then(|s| Group::new(s, r.to_vec())));
        let icpo = core!(icpo::icpo_advantages(&group, IcpoParams { omega, tau, delta }));
        if !out_grpo.is_null() {
            let grpo = core!(icpo::grpo_advantages(&group));
            std::slice::from_raw_parts_mut(out_grpo, n).copy_from_slice(&grpo.values);
        }
        icpo_out.copy_from_slice(&icpo.values);
        IcpoStatus::Ok
    })
}

/// Build an omega schedule over `total_steps` steps.
///
/// # Safety
/// `out` must be writable; on success it receives a handle owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn icpo_schedule_new(
    kind: IcpoScheduleKind,
    peak: f64,
    floor: f64,
    end: f64,
    warmup_fraction: f64,
    total_steps: u64,
    out: *mut *mut IcpoSchedule,
) -> IcpoStatus {
    guard(|| {
        non_null!(out);
        *out = ptr::null_mut();
        let spec = core!(ScheduleSpec::new(
            kind.into(),
            peak,
            floor,
            end,
            warmup_fraction,
            total_steps as usize
        ));
        *out = Box::into_raw(Box::new(IcpoSchedule { spec }));
        IcpoStatus::Ok
    })
}

/// Omega at `step` (0 through total_steps inclusive).
///
/// # Safety
/// `schedule` must come from [`icpo_schedule_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icpo_schedule_omega(schedule: *const IcpoSchedule, step: u64, out: *mut f64) -> IcpoStatus {
    guard(|| {
        non_null!(schedule, out);
        *out = core!((*schedule).spec.omega_at(step as usize));
        IcpoStatus::Ok
    })
}

/// # Safety
/// `schedule` must be null or come from [`icpo_schedule_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn icpo_schedule_free(schedule: *mut IcpoSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Train from `key = value` configuration text and keep the metrics.
/// Nothing is written to disk.
///
/// # Safety
/// `config_text` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icpo_run_from_config(config_text: *const c_char, out: *mut *mut IcpoRun) -> IcpoStatus {
    guard(|| {
        non_null!(config_text, out);
        *out = ptr::null_mut();
        let text = match CStr::from_ptr(config_text).to_str() {
            Ok(t) => t,
            Err(e) => return fail(IcpoStatus::InvalidConfig, format!("config is not UTF-8: {e}")),
        };
        let config = core!(RunConfig::parse(text));
        let metrics = core!(train(&config));
        let rows = metrics.rows.iter().map(IcpoMetricsRow::from).collect();
        *out = Box::into_raw(Box::new(IcpoRun { rows }));
        IcpoStatus::Ok
    })
}

/// Number of metric rows (one per training step). Zero for a null handle.
///
/// # Safety
/// `run` must be null or come from [`icpo_run_from_config`].
#[no_mangle]
pub unsafe extern "C" fn icpo_run_len(run: *const IcpoRun) -> usize {
    if run.is_null() {
        0
    } else {
        let rows = &(*run).rows;
        rows.len()
    }
}

/// # Safety
/// `run` must come from [`icpo_run_from_config`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icpo_run_row(run: *const IcpoRun, index: usize, out: *mut IcpoMetricsRow) -> IcpoStatus {
    guard(|| {
        non_null!(run, out);
        let rows = &(*run).rows;
        match rows.get(index) {
            Some(r) => {
                *out = *r;
                IcpoStatus::Ok
            }
            None => fail(
                IcpoStatus::OutOfRange,
                format!("row {index} of {}", rows.len()),
            ),
        }
    })
}

/// # Safety
/// `run` must be null or come from [`icpo_run_from_config`], freed once.
#[no_mangle]
pub unsafe extern "C" fn icpo_run_free(run: *mut IcpoRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
