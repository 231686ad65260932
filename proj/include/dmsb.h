/* dmsb.h - C API of the DMSB auction simulator.
 *
 * The library simulates computing/communication resource auctions between
 * one UAV and several ground base stations serving vehicle-twin tasks. It
 * exposes the modified second-bid (MSB) auction rules, the auction MDP
 * environment, and the experiment harness (training the diffusion pricing
 * policy, evaluating mechanisms, parameter sweeps, chart rendering and
 * mechanism property checks).
 *
 * Conventions:
 *   - Every function returns a dmsb_status; DMSB_OK means success.
 *   - On failure, dmsb_last_error() returns a thread-local message.
 *   - Objects are opaque handles created/destroyed by the library.
 *   - Bid arrays order providers as [UAV, BS 1, ..., BS N].
 */

#ifndef DMSB_H
#define DMSB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dmsb_status {
  DMSB_OK = 0,
  DMSB_ERR_NULL_POINTER = 1,
  DMSB_ERR_INVALID_ARGUMENT = 2,
  DMSB_ERR_DOMAIN = 3,
  DMSB_ERR_RUNTIME = 4,
  DMSB_ERR_UNKNOWN = 5
} dmsb_status;

const char* dmsb_status_name(dmsb_status status);

/* Thread-local message describing the most recent failure in this thread. */
const char* dmsb_last_error(void);

const char* dmsb_version(void);

/* ---- stateless auction rules ---- */

typedef struct dmsb_outcome {
  int32_t winner;  /* 0 = UAV, 1..N = ground BS */
  double payment;  /* what the winner pays; losers pay nothing */
} dmsb_outcome;

/* Modified second-bid auction: bids[0] is the UAV's contracted payment.
 * A BS wins only if its bid strictly exceeds rho times the best competing
 * bid; otherwise the UAV wins at its contracted payment. rho must be >= 1. */
dmsb_status dmsb_msb_auction(const double* bids, int32_t n_bids, double rho,
                             dmsb_outcome* out);

/* Second-price auction over all providers; ties go to the lowest id. */
dmsb_status dmsb_spa_auction(const double* bids, int32_t n_bids, dmsb_outcome* out);

/* Critical payment psi = rho * max(other_bids). */
dmsb_status dmsb_critical_payment(const double* other_bids, int32_t n, double rho,
                                  double* out_psi);

/* Grid-search maximizer of the UAV's expected contracted-payment profit
 * over paired (vmax, v0) samples. Ties break toward the smallest grid
 * value. out_index may be NULL. */
dmsb_status dmsb_contracted_bid(const double* vmax_samples, const double* v0_samples,
                                int32_t n_samples, const double* grid, int32_t n_grid,
                                double* out_bid, int32_t* out_index);

/* Per-round scaling rule max(1, top bid / second bid). */
dmsb_status dmsb_myopic_rho(const double* bids, int32_t n_bids, double* out_rho);

/* rho = 10^(action / action_count), the action-to-price mapping. */
dmsb_status dmsb_action_to_rho(int32_t action, int32_t action_count, double* out_rho);

/* ---- experiment specification ---- */

typedef struct dmsb_experiment dmsb_experiment;

/* A specification with built-in defaults (documented in configs/default.cfg). */
dmsb_status dmsb_experiment_create(dmsb_experiment** out);

/* Loads a key = value spec file. */
dmsb_status dmsb_experiment_load(const char* path, dmsb_experiment** out);

void dmsb_experiment_destroy(dmsb_experiment* experiment);

/* Overrides one key, using the same names as the spec file
 * (e.g. "seed", "trainer.steps", "experiment.mechanisms"). */
dmsb_status dmsb_experiment_set(dmsb_experiment* experiment, const char* key,
                                const char* value);

/* Trains the spec's learnable agents for every repetition; writes per-step
 * training CSVs, policy checkpoints and convergence.csv into out_dir.
 * out_path (optional) receives the convergence CSV path. */
dmsb_status dmsb_experiment_train(dmsb_experiment* experiment, char* out_path,
                                  size_t out_path_len);

/* Evaluates every mechanism and agent with frozen policies; writes
 * evaluation.csv. Requires the checkpoints produced by train. */
dmsb_status dmsb_experiment_evaluate(dmsb_experiment* experiment, char* out_path,
                                     size_t out_path_len);

/* Runs the spec's sweep; writes sweep_<variable>.csv. */
dmsb_status dmsb_experiment_sweep(dmsb_experiment* experiment, char* out_path,
                                  size_t out_path_len);

/* ---- auction environment ---- */

typedef struct dmsb_env dmsb_env;

/* Environment over the experiment's scenario (NULL: default scenario). */
dmsb_status dmsb_env_create(const dmsb_experiment* experiment_or_null, uint64_t seed,
                            dmsb_env** out);
void dmsb_env_destroy(dmsb_env* env);

int32_t dmsb_env_state_dim(const dmsb_env* env);
int32_t dmsb_env_action_count(const dmsb_env* env);

/* Copies the current raw state encoding into state[0..dim). */
dmsb_status dmsb_env_observe(const dmsb_env* env, double* state, int32_t len);

typedef struct dmsb_step_result {
  double reward;
  double rho;
  int32_t winner;
  double payment;
  double winner_latency_s;
} dmsb_step_result;

dmsb_status dmsb_env_step(dmsb_env* env, int32_t action, dmsb_step_result* out);
dmsb_status dmsb_env_reset(dmsb_env* env, uint64_t seed);

/* ---- charts and property checks ---- */

/* Line chart from a results CSV; series may be NULL for a single series,
 * title may be NULL. */
dmsb_status dmsb_chart_render(const char* csv_path, const char* out_svg_path,
                              const char* x_column, const char* y_column,
                              const char* series_column, const char* title);

typedef struct dmsb_property_report {
  int64_t markets;
  int64_t truthfulness_violations;
  int64_t homogeneity_trials;
  int64_t homogeneity_violations;
  int64_t feasibility_checks;
  int64_t feasibility_violations;
} dmsb_property_report;

/* Randomized mechanism-property suite: truthfulness counterexample search,
 * degree-one homogeneity of the critical payment, winner scale invariance
 * and outcome feasibility. */
dmsb_status dmsb_property_check(uint64_t seed, int32_t markets, int32_t deviations_per_bidder,
                                int32_t homogeneity_trials, dmsb_property_report* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DMSB_H */
