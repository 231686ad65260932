#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <utility>
#include <vector>

#include "dmsb/auction.hpp"
#include "dmsb/market_model.hpp"
#include "dmsb/rng.hpp"

namespace dmsb::env {

/// Market generator parameters. Task sizes are configured in megabytes
/// (1 MB = 8e6 bits) and bandwidths in Hz; compute efficiencies are drawn
/// in abstract units of `compute_unit_hz` cycles per second.
///
/// Per auction round the generator draws bandwidths, compute efficiencies,
/// transmit powers and the task; channel gains and per-provider accuracy
/// centres are drawn once per episode. Accuracy realizations come from a
/// Beta distribution centred on the provider's accuracy mean, clamped away
/// from 1 where the matching value would diverge.
struct ScenarioConfig {
  int num_bs = 5;  // ground base stations; one UAV is always present
  double task_size_min_mb = 20.0;
  double task_size_max_mb = 40.0;
  double bandwidth_min_hz = 20e6;
  double bandwidth_max_hz = 60e6;
  double compute_units_min = 0.1;
  double compute_units_max = 2.0;
  double compute_unit_hz = 1e9;
  double gpu_cycles_per_bit = 0.5;
  double power_min = 1.0;
  double power_max = 10.0;
  double noise_power = 1.0;
  double gain_min = 0.5;
  double gain_max = 1.0;
  double accuracy_mean_min = 0.5;
  double accuracy_mean_max = 0.9;
  double accuracy_concentration = 50.0;
  double accuracy_floor = 0.05;
  double accuracy_ceiling = 0.99;
  long long pixel_count = 1000000;
  double omega1 = 1.0;
  double omega2 = 1.0;
  double beta = 2.0;
  int history_window = 10;
  double zeta = 1.0;
  int action_count = 20;
  int max_providers = 10;  // provider slots in the fixed-size state encoding
  int contracted_grid_points = 1000;

  int provider_count() const { return num_bs + 1; }
  void validate() const;
};

/// Fixed-dimension MDP observation: per-provider market features padded to
/// `max_providers` slots, the padded bid vector, and a validity mask.
struct MarketState {
  Eigen::VectorXd features;  // 6 per slot (B_u, B_d, f_g, f_c, mean latency, mean accuracy) + task size
  Eigen::VectorXd bids;      // one per slot
  Eigen::VectorXd mask;      // 1 for live providers, 0 for padding
};

inline constexpr int kFeaturesPerProvider = 6;

int state_dim(int max_providers);

/// Flat encoding of a state: features, bids, mask concatenated. The
/// round-trip through decode_state is exact.
Eigen::VectorXd encode_state(const MarketState& state);
MarketState decode_state(const Eigen::VectorXd& encoded, int max_providers);

/// Welford running mean/variance used to whiten encoded states before they
/// reach a network. Freezing stops adaptation (for evaluation).
class RunningNorm {
 public:
  RunningNorm() = default;
  explicit RunningNorm(int dim);

  int dim() const { return static_cast<int>(mean_.size()); }
  long long count() const { return count_; }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  void observe(const Eigen::VectorXd& x);
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& x) const;  // per column

  void save(std::ostream& out) const;
  static RunningNorm load(std::istream& in);

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
  long long count_ = 0;
  bool frozen_ = false;
};

/// Action index to price scaling factor: rho = 10^(a / |A|), covering
/// [1, 10) monotonically.
double action_to_rho(int action, int action_count);

/// Shared convention for per-episode environment seeds, so different agents
/// trained under the same base seed face identical market streams.
std::uint64_t episode_seed(std::uint64_t base_seed, long long episode);

/// Everything generated for one auction round.
struct Round {
  std::vector<market::ResourceProvider> providers;  // [0] is the UAV
  market::VtTask task;
  std::vector<double> latencies;   // per provider, seconds
  std::vector<double> accuracies;  // per provider
  std::vector<double> valuations;  // per provider
  auction::BidVector bids;
};

struct StepInfo {
  double reward = 0.0;  // zeta-weighted realized surplus of the round
  double rho = 1.0;
  int winner = 0;
  double payment = 0.0;
  double uav_surplus = 0.0;
  double bs_surplus = 0.0;
  double winner_latency_s = 0.0;
};

/// The auction MDP. Each step runs the modified second-bid auction with the
/// rho selected by the action, collects the realized surplus as reward,
/// pushes the round's metrics into the provider histories and generates the
/// next round. Instances are single-threaded; run one per worker.
class AuctionEnv {
 public:
  AuctionEnv(const ScenarioConfig& config, std::uint64_t seed);

  void reset(std::uint64_t seed);
  StepInfo step(int action);

  const ScenarioConfig& config() const { return cfg_; }
  const MarketState& state() const { return state_; }
  const Round& round() const { return round_; }
  int action_count() const { return cfg_.action_count; }
  int state_dimension() const { return state_dim(cfg_.max_providers); }

 private:
  void draw_episode_constants();
  void bootstrap();
  void advance_round();
  market::ResourceProvider draw_provider(int id);
  void rebuild_state();

  ScenarioConfig cfg_;
  Rng rng_{0};
  std::vector<double> gains_;             // per provider, fixed within an episode
  std::vector<double> accuracy_means_;    // per provider, fixed within an episode
  std::vector<std::deque<double>> latency_hist_;
  std::vector<std::deque<double>> accuracy_hist_;
  std::deque<std::pair<double, double>> contract_hist_;  // (v0, vmax) pairs
  Round round_;
  MarketState state_;
};

}  // namespace dmsb::env
