#include "dmsb.h"

#include <cstring>
#include <exception>
#include <stdexcept>
#include <string>

#include "dmsb/auction.hpp"
#include "dmsb/chart.hpp"
#include "dmsb/environment.hpp"
#include "dmsb/experiment.hpp"

namespace {

thread_local std::string g_last_error;

dmsb_status fail(dmsb_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `fn`, translating the library's exception idiom into status codes.
template <typename Fn>
dmsb_status guarded(Fn&& fn) {
  try {
    fn();
    return DMSB_OK;
  } catch (const std::domain_error& e) {
    return fail(DMSB_ERR_DOMAIN, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(DMSB_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(DMSB_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(DMSB_ERR_UNKNOWN, "unknown error");
  }
}

dmsb_status require_ptr(const void* p, const char* what) {
  if (p == nullptr) return fail(DMSB_ERR_NULL_POINTER, std::string(what) + " is null");
  return DMSB_OK;
}

dmsb::auction::BidVector make_bids(const double* bids, int32_t n_bids) {
  if (n_bids < 2) throw std::domain_error("need the UAV bid and at least one BS bid");
  dmsb::auction::BidVector out;
  out.uav_bid = bids[0];
  out.bs_bids.assign(bids + 1, bids + n_bids);
  return out;
}

void copy_path(const std::string& path, char* out_path, size_t out_path_len) {
  if (out_path == nullptr || out_path_len == 0) return;
  const size_t n = std::min(path.size(), out_path_len - 1);
  std::memcpy(out_path, path.data(), n);
  out_path[n] = '\0';
}

}  // namespace

struct dmsb_experiment {
  dmsb::exp::ExperimentSpec spec;
};

struct dmsb_env {
  dmsb::env::AuctionEnv env;
};

extern "C" {

const char* dmsb_status_name(dmsb_status status) {
  switch (status) {
    case DMSB_OK: return "ok";
    case DMSB_ERR_NULL_POINTER: return "null pointer";
    case DMSB_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DMSB_ERR_DOMAIN: return "domain error";
    case DMSB_ERR_RUNTIME: return "runtime error";
    case DMSB_ERR_UNKNOWN: return "unknown error";
  }
  return "bad status code";
}

const char* dmsb_last_error(void) { return g_last_error.c_str(); }

const char* dmsb_version(void) { return "0.1.0"; }

dmsb_status dmsb_msb_auction(const double* bids, int32_t n_bids, double rho,
                             dmsb_outcome* out) {
  if (const auto s = require_ptr(bids, "bids"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(out, "out"); s != DMSB_OK) return s;
  return guarded([&] {
    const auto outcome = dmsb::auction::msb_run(make_bids(bids, n_bids), rho);
    out->winner = outcome.winner;
    out->payment = outcome.payments[static_cast<std::size_t>(outcome.winner)];
  });
}

dmsb_status dmsb_spa_auction(const double* bids, int32_t n_bids, dmsb_outcome* out) {
  if (const auto s = require_ptr(bids, "bids"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(out, "out"); s != DMSB_OK) return s;
  return guarded([&] {
    const auto outcome = dmsb::auction::spa(make_bids(bids, n_bids));
    out->winner = outcome.winner;
    out->payment = outcome.payments[static_cast<std::size_t>(outcome.winner)];
  });
}

dmsb_status dmsb_critical_payment(const double* other_bids, int32_t n, double rho,
                                  double* out_psi) {
  if (const auto s = require_ptr(other_bids, "other_bids"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(out_psi, "out_psi"); s != DMSB_OK) return s;
  return guarded([&] {
    *out_psi = dmsb::auction::critical_payment(
        {other_bids, static_cast<std::size_t>(n > 0 ? n : 0)}, rho);
  });
}

dmsb_status dmsb_contracted_bid(const double* vmax_samples, const double* v0_samples,
                                int32_t n_samples, const double* grid, int32_t n_grid,
                                double* out_bid, int32_t* out_index) {
  if (const auto s = require_ptr(vmax_samples, "vmax_samples"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(v0_samples, "v0_samples"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(grid, "grid"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(out_bid, "out_bid"); s != DMSB_OK) return s;
  return guarded([&] {
    const auto result = dmsb::auction::uav_contracted_bid(
        {vmax_samples, static_cast<std::size_t>(n_samples > 0 ? n_samples : 0)},
        {v0_samples, static_cast<std::size_t>(n_samples > 0 ? n_samples : 0)},
        {grid, static_cast<std::size_t>(n_grid > 0 ? n_grid : 0)});
    *out_bid = result.bid;
    if (out_index != nullptr) *out_index = static_cast<int32_t>(result.grid_index);
  });
}

dmsb_status dmsb_myopic_rho(const double* bids, int32_t n_bids, double* out_rho) {
  if (const auto s = require_ptr(bids, "bids"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(out_rho, "out_rho"); s != DMSB_OK) return s;
  return guarded([&] { *out_rho = dmsb::auction::myopic_rho(make_bids(bids, n_bids)); });
}

dmsb_status dmsb_action_to_rho(int32_t action, int32_t action_count, double* out_rho) {
  if (const auto s = require_ptr(out_rho, "out_rho"); s != DMSB_OK) return s;
  return guarded([&] { *out_rho = dmsb::env::action_to_rho(action, action_count); });
}

dmsb_status dmsb_experiment_create(dmsb_experiment** out) {
  if (const auto s = require_ptr(out, "out"); s != DMSB_OK) return s;
  return guarded([&] { *out = new dmsb_experiment{}; });
}

dmsb_status dmsb_experiment_load(const char* path, dmsb_experiment** out) {
  if (const auto s = require_ptr(path, "path"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(out, "out"); s != DMSB_OK) return s;
  return guarded([&] {
    *out = new dmsb_experiment{dmsb::exp::ExperimentSpec::load(path)};
  });
}

void dmsb_experiment_destroy(dmsb_experiment* experiment) { delete experiment; }

dmsb_status dmsb_experiment_set(dmsb_experiment* experiment, const char* key,
                                const char* value) {
  if (const auto s = require_ptr(experiment, "experiment"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(key, "key"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(value, "value"); s != DMSB_OK) return s;
  return guarded([&] { experiment->spec.apply(key, value); });
}

dmsb_status dmsb_experiment_train(dmsb_experiment* experiment, char* out_path,
                                  size_t out_path_len) {
  if (const auto s = require_ptr(experiment, "experiment"); s != DMSB_OK) return s;
  return guarded([&] {
    copy_path(dmsb::exp::run_train(experiment->spec), out_path, out_path_len);
  });
}

dmsb_status dmsb_experiment_evaluate(dmsb_experiment* experiment, char* out_path,
                                     size_t out_path_len) {
  if (const auto s = require_ptr(experiment, "experiment"); s != DMSB_OK) return s;
  return guarded([&] {
    copy_path(dmsb::exp::run_evaluate(experiment->spec), out_path, out_path_len);
  });
}

dmsb_status dmsb_experiment_sweep(dmsb_experiment* experiment, char* out_path,
                                  size_t out_path_len) {
  if (const auto s = require_ptr(experiment, "experiment"); s != DMSB_OK) return s;
  return guarded([&] {
    copy_path(dmsb::exp::run_sweep(experiment->spec), out_path, out_path_len);
  });
}

dmsb_status dmsb_env_create(const dmsb_experiment* experiment_or_null, uint64_t seed,
                            dmsb_env** out) {
  if (const auto s = require_ptr(out, "out"); s != DMSB_OK) return s;
  return guarded([&] {
    const dmsb::env::ScenarioConfig scenario =
        experiment_or_null != nullptr ? experiment_or_null->spec.scenario
                                      : dmsb::env::ScenarioConfig{};
    *out = new dmsb_env{dmsb::env::AuctionEnv(scenario, seed)};
  });
}

void dmsb_env_destroy(dmsb_env* env) { delete env; }

int32_t dmsb_env_state_dim(const dmsb_env* env) {
  return env == nullptr ? -1 : env->env.state_dimension();
}

int32_t dmsb_env_action_count(const dmsb_env* env) {
  return env == nullptr ? -1 : env->env.action_count();
}

dmsb_status dmsb_env_observe(const dmsb_env* env, double* state, int32_t len) {
  if (const auto s = require_ptr(env, "env"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(state, "state"); s != DMSB_OK) return s;
  return guarded([&] {
    const Eigen::VectorXd encoded = dmsb::env::encode_state(env->env.state());
    if (len < encoded.size()) throw std::invalid_argument("state buffer too small");
    for (Eigen::Index i = 0; i < encoded.size(); ++i) state[i] = encoded[i];
  });
}

dmsb_status dmsb_env_step(dmsb_env* env, int32_t action, dmsb_step_result* out) {
  if (const auto s = require_ptr(env, "env"); s != DMSB_OK) return s;
  return guarded([&] {
    const dmsb::env::StepInfo info = env->env.step(action);
    if (out != nullptr) {
      out->reward = info.reward;
      out->rho = info.rho;
      out->winner = info.winner;
      out->payment = info.payment;
      out->winner_latency_s = info.winner_latency_s;
    }
  });
}

dmsb_status dmsb_env_reset(dmsb_env* env, uint64_t seed) {
  if (const auto s = require_ptr(env, "env"); s != DMSB_OK) return s;
  return guarded([&] { env->env.reset(seed); });
}

dmsb_status dmsb_chart_render(const char* csv_path, const char* out_svg_path,
                              const char* x_column, const char* y_column,
                              const char* series_column, const char* title) {
  if (const auto s = require_ptr(csv_path, "csv_path"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(out_svg_path, "out_svg_path"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(x_column, "x_column"); s != DMSB_OK) return s;
  if (const auto s = require_ptr(y_column, "y_column"); s != DMSB_OK) return s;
  return guarded([&] {
    dmsb::chart::ChartSpec spec;
    spec.x_column = x_column;
    spec.y_column = y_column;
    spec.series_column = series_column != nullptr ? series_column : "";
    spec.title = title != nullptr ? title : "";
    dmsb::chart::render_line_chart(csv_path, spec, out_svg_path);
  });
}

dmsb_status dmsb_property_check(uint64_t seed, int32_t markets, int32_t deviations_per_bidder,
                                int32_t homogeneity_trials, dmsb_property_report* out) {
  if (const auto s = require_ptr(out, "out"); s != DMSB_OK) return s;
  return guarded([&] {
    const dmsb::exp::PropertyReport report = dmsb::exp::run_property_check(
        seed, markets, deviations_per_bidder, homogeneity_trials);
    out->markets = report.markets;
    out->truthfulness_violations = report.truthfulness_violations;
    out->homogeneity_trials = report.homogeneity_trials;
    out->homogeneity_violations = report.homogeneity_violations;
    out->feasibility_checks = report.feasibility_checks;
    out->feasibility_violations = report.feasibility_violations;
  });
}

}  // extern "C"
