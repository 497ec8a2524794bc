#ifndef ICPO_H
#define ICPO_H

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every exported function.
 */
typedef enum IcpoStatus {
  ICPO_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  ICPO_STATUS_NULL_POINTER = 1,
  /*
   Numeric input rejected by the library (shape, range, non-finite).
   */
  ICPO_STATUS_INVALID_ARGUMENT = 2,
  /*
   Run configuration text could not be parsed or validated.
   */
  ICPO_STATUS_INVALID_CONFIG = 3,
  /*
   Index past the end of a run's metrics.
   */
  ICPO_STATUS_OUT_OF_RANGE = 4,
  /*
   Internal panic caught at the boundary.
   */
  ICPO_STATUS_INTERNAL = 5,
} IcpoStatus;

typedef enum IcpoScheduleKind {
  ICPO_SCHEDULE_KIND_NO_DECAY = 0,
  ICPO_SCHEDULE_KIND_LINEAR_DECAY = 1,
  ICPO_SCHEDULE_KIND_WARMUP_RETENTION = 2,
  ICPO_SCHEDULE_KIND_WARMUP_DECAY = 3,
} IcpoScheduleKind;

/*
 Opaque finished training run.
 */
typedef struct IcpoRun IcpoRun;

/*
 Opaque omega schedule.
 */
typedef struct IcpoSchedule IcpoSchedule;

/*
 One row of a run's per-step metrics.
 */
typedef struct IcpoMetricsRow {
  uint64_t step;
  double omega;
  double mean_reward;
  double accuracy;
  double entropy;
  double kl;
  double mean_abs_advantage;
} IcpoMetricsRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Static description of a status code. Never null.
 */
const char *icpo_status_message(enum IcpoStatus status);

/*
 Message of the last failed call on this thread, or null. Valid until the
 next call into this library from the same thread.
 */
const char *icpo_last_error(void);

/*
 Mean per-token log-probability of one response.

 # Safety
 `logprobs` must point to `len` readable doubles; `out` must be writable.
 */
enum IcpoStatus icpo_mean_logprob(const double *logprobs, uintptr_t len, double *out);

/*
 Preference scores for a group given each response's mean log-probability.
 Scores are written in input order.

 # Safety
 `mean_logprobs` must point to `n` readable doubles and `out_scores` to `n`
 writable doubles.
 */
enum IcpoStatus icpo_preference_scores(const double *mean_logprobs,
                                       uintptr_t n,
                                       double delta,
                                       double *out_scores);

/*
 Clipped fusion of a verifiable reward with a preference score.

 # Safety
 `out` must be writable.
 */
enum IcpoStatus icpo_fuse(double reward, double score, double omega, double tau, double *out);

/*
 Group-normalized advantages of `n` rewards.

 # Safety
 `rewards` must point to `n` readable doubles and `out` to `n` writable ones.
 */
enum IcpoStatus icpo_normalize(const double *rewards, uintptr_t n, double *out);

/*
 GRPO and ICPO advantages of one group. `out_grpo` may be null.

 # Safety
 Input arrays must hold `n` readable doubles; non-null outputs must hold
 `n` writable doubles.
 */
enum IcpoStatus icpo_group_advantages(const double *mean_logprobs,
                                      const double *rewards,
                                      uintptr_t n,
                                      double omega,
                                      double tau,
                                      double delta,
                                      double *out_grpo,
                                      double *out_icpo);

/*
 Build an omega schedule over `total_steps` steps.

 # Safety
 `out` must be writable; on success it receives a handle owned by the caller.
 */
enum IcpoStatus icpo_schedule_new(enum IcpoScheduleKind kind,
                                  double peak,
                                  double floor,
                                  double end,
                                  double warmup_fraction,
                                  uint64_t total_steps,
                                  struct IcpoSchedule **out);

/*
 Omega at `step` (0 through total_steps inclusive).

 # Safety
 `schedule` must come from [`icpo_schedule_new`]; `out` must be writable.
 */
enum IcpoStatus icpo_schedule_omega(const struct IcpoSchedule *schedule,
                                    uint64_t step,
                                    double *out);

/*
 # Safety
 `schedule` must be null or come from [`icpo_schedule_new`], freed once.
 */
void icpo_schedule_free(struct IcpoSchedule *schedule);

/*
 Train from `key = value` configuration text and keep the metrics.
 Nothing is written to disk.

 # Safety
 `config_text` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
enum IcpoStatus icpo_run_from_config(const char *config_text, struct IcpoRun **out);

/*
 Number of metric rows (one per training step). Zero for a null handle.

 # Safety
 `run` must be null or come from [`icpo_run_from_config`].
 */
uintptr_t icpo_run_len(const struct IcpoRun *run);

/*
 # Safety
 `run` must come from [`icpo_run_from_config`]; `out` must be writable.
 */
enum IcpoStatus icpo_run_row(const struct IcpoRun *run,
                             uintptr_t index,
                             struct IcpoMetricsRow *out);

/*
 # Safety
 `run` must be null or come from [`icpo_run_from_config`], freed once.
 */
void icpo_run_free(struct IcpoRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICPO_H */
