/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef BELLSTAT_H
#define BELLSTAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BsStatus {
  BS_STATUS_OK = 0,
  BS_STATUS_NULL_POINTER = 1,
  BS_STATUS_VALIDATION = 2,
  BS_STATUS_INFEASIBLE = 3,
  BS_STATUS_IO = 4,
  BS_STATUS_PANIC = 5,
} BsStatus;

typedef enum BsMode {
  BS_MODE_COMMUNICATION_FRACTION = 0,
  BS_MODE_EXCESS_PREDICTABILITY = 1,
  BS_MODE_BEYOND_HALF = 2,
} BsMode;

typedef enum BsAdversaryKind {
  BS_ADVERSARY_KIND_DETERMINISTIC_LHV = 0,
  BS_ADVERSARY_KIND_MEMORY_LHV = 1,
  BS_ADVERSARY_KIND_COMM_PURE = 2,
  BS_ADVERSARY_KIND_COMM_PRBOX = 3,
  BS_ADVERSARY_KIND_PREDICTABILITY_SKEW = 4,
} BsAdversaryKind;

typedef enum BsIncrementKind {
  BS_INCREMENT_KIND_PLAIN_J = 0,
  BS_INCREMENT_KIND_SHIFTED_K = 1,
  BS_INCREMENT_KIND_ADAPTED_JEPS = 2,
} BsIncrementKind;

/**
 * Opaque single-pass analyzer.
 */
typedef struct BsAnalyzer BsAnalyzer;

/**
 * Opaque quantum photon-pair model.
 */
typedef struct BsQuantumModel BsQuantumModel;

/**
 * Opaque trial generator.
 */
typedef struct BsSimulator BsSimulator;

typedef struct BsQuantumParams {
  double r;
  double alpha1;
  double alpha2;
  double beta1;
  double beta2;
  double eta_a;
  double eta_b;
  double visibility;
  double p_dark;
} BsQuantumParams;

/**
 * Probabilities of the four outcome pairs for one setting combination.
 */
typedef struct BsCellProbs {
  double pp;
  double pz;
  double zp;
  double zz;
} BsCellProbs;

/**
 * Conditional probabilities indexed `[a - 1][b - 1]`.
 */
typedef struct BsCondProbs {
  struct BsCellProbs cells[2][2];
} BsCondProbs;

typedef struct BsSettingsProfile {
  double kappa_a;
  double kappa_b;
  double eps_a;
  double eps_b;
  enum BsMode mode;
  double qf;
} BsSettingsProfile;

typedef struct BsAdversaryParams {
  enum BsAdversaryKind kind;
  /**
   * Deterministic strategy (0..=15), or the base strategy of the
   * communication and skew adversaries.
   */
  uint8_t strategy;
  /**
   * Communicated trials: 0 independent per trial, 1 a leading block.
   */
  bool leading_block;
  /**
   * Target excursion of the memory adversary, in units of sqrt(N).
   */
  double target_c;
} BsAdversaryParams;

typedef struct BsTrial {
  uint64_t index;
  uint8_t a;
  uint8_t b;
  uint8_t alice;
  uint8_t bob;
} BsTrial;

typedef struct BsSummary {
  uint64_t n;
  uint64_t m;
  uint64_t m_last;
  double z;
  double r;
  uint64_t s;
  double c;
  double p_value;
  double f;
} BsSummary;

typedef struct BsRuntimePlan {
  double t_plain;
  double t_doob;
  double c_adjusted;
} BsRuntimePlan;

typedef struct BsSpacetimeConfig {
  double d;
  double n;
  double tau_g;
  double tau_m;
  double tau_s;
  double tau_d;
  double c0;
} BsSpacetimeConfig;

typedef struct BsGeometry {
  double tau1;
  double tau2;
  /**
   * `tau1 - tauS`.
   */
  double margin_generation;
  /**
   * `tau2 - (tauS + tauD)`.
   */
  double margin_deployment;
  bool feasible;
} BsGeometry;

typedef struct BsOptimization {
  double best_j;
  double r_star;
  double angles_star[4];
  uint64_t evaluations;
  bool converged;
} BsOptimization;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the length needed including the NUL, or 0
 * when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t bs_last_error(char *buf, size_t len);

/**
 * # Safety
 * `params` must be valid; `out` receives a handle to free with
 * [`bs_quantum_model_free`].
 */
enum BsStatus bs_quantum_model_new(const struct BsQuantumParams *params,
                                   struct BsQuantumModel **out);

/**
 * # Safety
 * `model` must come from [`bs_quantum_model_new`] and not be used again.
 */
void bs_quantum_model_free(struct BsQuantumModel *model);

/**
 * Outcome probabilities of the model for settings `a`, `b`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum BsStatus bs_quantum_trial_probs(const struct BsQuantumModel *model,
                                     uint8_t a,
                                     uint8_t b,
                                     struct BsCellProbs *out);

/**
 * CH-E value of the model.
 *
 * # Safety
 * Pointers must be valid.
 */
enum BsStatus bs_quantum_che_j(const struct BsQuantumModel *model, double *out);

/**
 * CH-E value of arbitrary conditional probabilities.
 *
 * # Safety
 * Pointers must be valid.
 */
enum BsStatus bs_che_j(const struct BsCondProbs *probs, double *out);

/**
 * Generator of `n_trials` trials of the quantum model.
 *
 * # Safety
 * Pointers must be valid; free the result with [`bs_simulator_free`].
 */
enum BsStatus bs_simulator_new_quantum(const struct BsQuantumModel *model,
                                       const struct BsSettingsProfile *profile,
                                       uint64_t n_trials,
                                       uint64_t seed,
                                       uint64_t stream,
                                       struct BsSimulator **out);

/**
 * Generator of `n_trials` trials of a local-realist adversary.
 *
 * # Safety
 * Pointers must be valid; free the result with [`bs_simulator_free`].
 */
enum BsStatus bs_simulator_new_adversary(const struct BsAdversaryParams *params,
                                         const struct BsSettingsProfile *profile,
                                         uint64_t n_trials,
                                         uint64_t seed,
                                         uint64_t stream,
                                         struct BsSimulator **out);

/**
 * Writes up to `capacity` further trials into `buf`; `written` receives the
 * count, which is 0 once the generator is exhausted.
 *
 * # Safety
 * `buf` must hold `capacity` trials; other pointers must be valid.
 */
enum BsStatus bs_simulator_next(struct BsSimulator *sim,
                                struct BsTrial *buf,
                                size_t capacity,
                                size_t *written);

/**
 * # Safety
 * `sim` must come from a `bs_simulator_new_*` function and not be used again.
 */
void bs_simulator_free(struct BsSimulator *sim);

/**
 * Analyzer for increments of `kind` built from `profile`. With
 * `use_default_streak` the streak is `floor(1/shift)`, otherwise `streak`.
 *
 * # Safety
 * Pointers must be valid; free the result with [`bs_analyzer_free`].
 */
enum BsStatus bs_analyzer_new(enum BsIncrementKind kind,
                              const struct BsSettingsProfile *profile,
                              double guard,
                              uint64_t streak,
                              bool use_default_streak,
                              struct BsAnalyzer **out);

/**
 * Feeds `n` trials in order.
 *
 * # Safety
 * `trials` must point to `n` trials; `analyzer` must be valid.
 */
enum BsStatus bs_analyzer_push(struct BsAnalyzer *analyzer, const struct BsTrial *trials, size_t n);

/**
 * Summary of the trials pushed so far. The analyzer stays usable.
 *
 * # Safety
 * Pointers must be valid.
 */
enum BsStatus bs_analyzer_summary(const struct BsAnalyzer *analyzer, struct BsSummary *out);

/**
 * # Safety
 * `analyzer` must come from [`bs_analyzer_new`] and not be used again.
 */
void bs_analyzer_free(struct BsAnalyzer *analyzer);

/**
 * Hoeffding bound `exp(-2 c^2 / r^2)` with `c = z / sqrt(length)`.
 *
 * # Safety
 * `out` must be valid.
 */
enum BsStatus bs_hoeffding_pvalue(double z, uint64_t length, double range, double *out);

/**
 * Run-time estimate; fails with `Infeasible` when `j <= eps_ab`.
 *
 * # Safety
 * `out` must be valid.
 */
enum BsStatus bs_plan_runtime(double rate,
                              double j,
                              double eps_ab,
                              double c,
                              double f,
                              uint64_t streak,
                              double range,
                              struct BsRuntimePlan *out);

/**
 * Timing budgets and feasibility of a symmetric arrangement.
 *
 * # Safety
 * Pointers must be valid.
 */
enum BsStatus bs_spacetime_check(const struct BsSpacetimeConfig *config, struct BsGeometry *out);

/**
 * Maximum CH-E value at efficiency `eta`. A negative `fixed_r` lets the
 * state vary.
 *
 * # Safety
 * `out` must be valid.
 */
enum BsStatus bs_optimize_j(double eta,
                            double fixed_r,
                            double visibility,
                            double p_dark,
                            struct BsOptimization *out);

/**
 * Detection-efficiency threshold by bisection to width `tol`. A negative
 * `fixed_r` lets the state vary.
 *
 * # Safety
 * `out` must be valid.
 */
enum BsStatus bs_critical_efficiency(double fixed_r,
                                     double visibility,
                                     double p_dark,
                                     double tol,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELLSTAT_H */
