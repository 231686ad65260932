#include "dmsb/environment.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace dmsb::env {

namespace {

constexpr double kBitsPerMb = 8e6;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

double window_mean(const std::deque<double>& window) {
  double s = 0.0;
  for (const double v : window) s += v;
  return s / static_cast<double>(window.size());
}

void push_window(std::deque<double>& window, double value, int capacity) {
  window.push_back(value);
  while (static_cast<int>(window.size()) > capacity) window.pop_front();
}

}  // namespace

void ScenarioConfig::validate() const {
  require(num_bs >= 1, "at least one ground BS is required");
  require(max_providers >= provider_count(), "max_providers below the provider count");
  require(task_size_min_mb > 0 && task_size_min_mb <= task_size_max_mb, "bad task size range");
  require(bandwidth_min_hz > 0 && bandwidth_min_hz <= bandwidth_max_hz, "bad bandwidth range");
  require(compute_units_min > 0 && compute_units_min <= compute_units_max,
          "bad compute unit range");
  require(compute_unit_hz > 0, "compute unit scale must be positive");
  require(gpu_cycles_per_bit > 0, "gpu cycles per bit must be positive");
  require(power_min > 0 && power_min <= power_max, "bad power range");
  require(noise_power > 0, "noise power must be positive");
  require(gain_min >= 0 && gain_min <= gain_max, "bad channel gain range");
  require(accuracy_mean_min > 0 && accuracy_mean_min <= accuracy_mean_max &&
              accuracy_mean_max < 1,
          "accuracy mean range must lie in (0,1)");
  require(accuracy_concentration > 0, "accuracy concentration must be positive");
  require(accuracy_floor > 0 && accuracy_floor <= accuracy_ceiling && accuracy_ceiling < 1,
          "accuracy clamp must lie in (0,1)");
  require(pixel_count >= 1, "pixel count must be at least 1");
  require(omega1 > 0 && omega2 > 0 && beta > 0, "valuation factors must be positive");
  require(history_window >= 1, "history window must be at least 1");
  require(zeta > 0, "zeta must be positive");
  require(action_count >= 2, "action space needs at least two actions");
  require(contracted_grid_points >= 2, "contracted-bid grid needs at least two points");
}

int state_dim(int max_providers) {
  return kFeaturesPerProvider * max_providers + 1 + 2 * max_providers;
}

Eigen::VectorXd encode_state(const MarketState& state) {
  Eigen::VectorXd out(state.features.size() + state.bids.size() + state.mask.size());
  out << state.features, state.bids, state.mask;
  return out;
}

MarketState decode_state(const Eigen::VectorXd& encoded, int max_providers) {
  if (encoded.size() != state_dim(max_providers)) {
    throw std::domain_error("encoded state has the wrong dimension");
  }
  MarketState state;
  const int nf = kFeaturesPerProvider * max_providers + 1;
  state.features = encoded.head(nf);
  state.bids = encoded.segment(nf, max_providers);
  state.mask = encoded.tail(max_providers);
  return state;
}

RunningNorm::RunningNorm(int dim)
    : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {
  if (dim < 1) throw std::invalid_argument("normalizer dimension must be positive");
}

void RunningNorm::observe(const Eigen::VectorXd& x) {
  if (frozen_) return;
  if (x.size() != mean_.size()) throw std::invalid_argument("normalizer dimension mismatch");
  ++count_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta.cwiseProduct(x - mean_);
}

Eigen::VectorXd RunningNorm::normalize(const Eigen::VectorXd& x) const {
  if (x.size() != mean_.size()) throw std::invalid_argument("normalizer dimension mismatch");
  if (count_ < 2) return x - mean_;
  const Eigen::VectorXd sd =
      (m2_ / static_cast<double>(count_ - 1)).cwiseMax(1e-12).cwiseSqrt();
  return (x - mean_).cwiseQuotient(sd);
}

Eigen::MatrixXd RunningNorm::normalize(const Eigen::MatrixXd& x) const {
  if (x.rows() != mean_.size()) throw std::invalid_argument("normalizer dimension mismatch");
  if (count_ < 2) return x.colwise() - mean_;
  const Eigen::VectorXd inv_sd =
      (m2_ / static_cast<double>(count_ - 1)).cwiseMax(1e-12).cwiseSqrt().cwiseInverse();
  return (x.colwise() - mean_).array().colwise() * inv_sd.array();
}

void RunningNorm::save(std::ostream& out) const {
  const std::uint64_t dim = static_cast<std::uint64_t>(mean_.size());
  const std::uint64_t count = static_cast<std::uint64_t>(count_);
  const std::uint8_t frozen = frozen_ ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(&frozen), sizeof frozen);
  out.write(reinterpret_cast<const char*>(mean_.data()),
            static_cast<std::streamsize>(sizeof(double) * mean_.size()));
  out.write(reinterpret_cast<const char*>(m2_.data()),
            static_cast<std::streamsize>(sizeof(double) * m2_.size()));
  if (!out) throw std::runtime_error("failed to write normalizer");
}

RunningNorm RunningNorm::load(std::istream& in) {
  std::uint64_t dim = 0;
  std::uint64_t count = 0;
  std::uint8_t frozen = 0;
  in.read(reinterpret_cast<char*>(&dim), sizeof dim);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  in.read(reinterpret_cast<char*>(&frozen), sizeof frozen);
  if (!in || dim == 0 || dim > 1'000'000) throw std::runtime_error("corrupt normalizer block");
  RunningNorm norm(static_cast<int>(dim));
  norm.count_ = static_cast<long long>(count);
  norm.frozen_ = frozen != 0;
  in.read(reinterpret_cast<char*>(norm.mean_.data()),
          static_cast<std::streamsize>(sizeof(double) * norm.mean_.size()));
  in.read(reinterpret_cast<char*>(norm.m2_.data()),
          static_cast<std::streamsize>(sizeof(double) * norm.m2_.size()));
  if (!in) throw std::runtime_error("corrupt normalizer block");
  return norm;
}

double action_to_rho(int action, int action_count) {
  if (action_count < 1) throw std::domain_error("action count must be positive");
  if (action < 0 || action >= action_count) throw std::domain_error("action index out of range");
  return std::pow(10.0, static_cast<double>(action) / static_cast<double>(action_count));
}

std::uint64_t episode_seed(std::uint64_t base_seed, long long episode) {
  return Rng::splitmix64(base_seed +
                         0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(episode) + 1));
}

AuctionEnv::AuctionEnv(const ScenarioConfig& config, std::uint64_t seed) : cfg_(config) {
  cfg_.validate();
  reset(seed);
}

void AuctionEnv::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  latency_hist_.assign(static_cast<std::size_t>(cfg_.provider_count()), {});
  accuracy_hist_.assign(static_cast<std::size_t>(cfg_.provider_count()), {});
  contract_hist_.clear();
  draw_episode_constants();
  bootstrap();
  advance_round();
}

void AuctionEnv::draw_episode_constants() {
  gains_.resize(static_cast<std::size_t>(cfg_.provider_count()));
  accuracy_means_.resize(static_cast<std::size_t>(cfg_.provider_count()));
  for (int i = 0; i < cfg_.provider_count(); ++i) {
    gains_[static_cast<std::size_t>(i)] = rng_.uniform(cfg_.gain_min, cfg_.gain_max);
    accuracy_means_[static_cast<std::size_t>(i)] =
        rng_.uniform(cfg_.accuracy_mean_min, cfg_.accuracy_mean_max);
  }
}

market::ResourceProvider AuctionEnv::draw_provider(int id) {
  market::ResourceProvider p;
  p.id = id;
  p.uplink_bandwidth_hz = rng_.uniform(cfg_.bandwidth_min_hz, cfg_.bandwidth_max_hz);
  p.downlink_bandwidth_hz = rng_.uniform(cfg_.bandwidth_min_hz, cfg_.bandwidth_max_hz);
  p.gpu_efficiency =
      rng_.uniform(cfg_.compute_units_min, cfg_.compute_units_max) * cfg_.compute_unit_hz;
  p.cpu_efficiency =
      rng_.uniform(cfg_.compute_units_min, cfg_.compute_units_max) * cfg_.compute_unit_hz;
  p.tx_power = rng_.uniform(cfg_.power_min, cfg_.power_max);
  p.noise_power = cfg_.noise_power;
  p.accuracy_mean = accuracy_means_[static_cast<std::size_t>(id)];
  return p;
}

void AuctionEnv::bootstrap() {
  // One bootstrap round seeds the metric histories so that every later
  // round has non-empty windows and a contracted-bid sample.
  advance_round();
}

void AuctionEnv::advance_round() {
  const int n = cfg_.provider_count();
  Round round;
  round.providers.reserve(static_cast<std::size_t>(n));

  const double size_mb = rng_.uniform(cfg_.task_size_min_mb, cfg_.task_size_max_mb);
  round.task.input_size_bits = size_mb * kBitsPerMb;
  round.task.output_size_bits = round.task.input_size_bits;  // generated result matches the input size
  round.task.pixel_count = cfg_.pixel_count;
  round.task.user_tx_power = rng_.uniform(cfg_.power_min, cfg_.power_max);
  round.task.user_noise = cfg_.noise_power;
  for (int i = 0; i < n; ++i) {
    round.task.channel_gain[i] = gains_[static_cast<std::size_t>(i)];
  }

  const market::ValuationParams params{cfg_.omega1, cfg_.omega2, cfg_.beta, cfg_.history_window};
  round.latencies.resize(static_cast<std::size_t>(n));
  round.accuracies.resize(static_cast<std::size_t>(n));
  round.valuations.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    round.providers.push_back(draw_provider(i));
    const auto latency =
        market::total_latency(round.task, round.providers.back(), cfg_.gpu_cycles_per_bit);
    if (!latency.has_value()) {
      throw std::runtime_error("unbounded latency generated for provider " + std::to_string(i));
    }
    const double mu = round.providers.back().accuracy_mean;
    const double alpha = mu * cfg_.accuracy_concentration;
    const double beta_param = (1.0 - mu) * cfg_.accuracy_concentration;
    const double acc = std::clamp(beta_sample(rng_, alpha, beta_param), cfg_.accuracy_floor,
                                  cfg_.accuracy_ceiling);

    round.latencies[static_cast<std::size_t>(i)] = *latency;
    round.accuracies[static_cast<std::size_t>(i)] = acc;
    push_window(latency_hist_[static_cast<std::size_t>(i)], *latency, cfg_.history_window);
    push_window(accuracy_hist_[static_cast<std::size_t>(i)], acc, cfg_.history_window);

    const std::vector<double> lat_window(latency_hist_[static_cast<std::size_t>(i)].begin(),
                                         latency_hist_[static_cast<std::size_t>(i)].end());
    const std::vector<double> acc_window(accuracy_hist_[static_cast<std::size_t>(i)].begin(),
                                         accuracy_hist_[static_cast<std::size_t>(i)].end());
    round.valuations[static_cast<std::size_t>(i)] = market::valuation(
        market::common_value(lat_window, params), market::matching_value(acc_window, params));
  }

  // Performance bidders bid their valuations; the UAV commits to the
  // contracted payment maximizing expected profit over strictly past
  // rounds. In the bootstrap round there is no history yet and the round is
  // never auctioned, so the contracted bid is left at zero.
  round.bids.bs_bids.assign(round.valuations.begin() + 1, round.valuations.end());
  if (!contract_hist_.empty()) {
    std::vector<double> v0_hist;
    std::vector<double> vmax_hist;
    v0_hist.reserve(contract_hist_.size());
    vmax_hist.reserve(contract_hist_.size());
    for (const auto& [v0, vmax] : contract_hist_) {
      v0_hist.push_back(v0);
      vmax_hist.push_back(vmax);
    }
    const auto grid =
        auction::make_bid_grid(vmax_hist, static_cast<std::size_t>(cfg_.contracted_grid_points));
    round.bids.uav_bid = auction::uav_contracted_bid(vmax_hist, v0_hist, grid).bid;
  }

  const double vmax_now =
      *std::max_element(round.valuations.begin() + 1, round.valuations.end());
  contract_hist_.emplace_back(round.valuations[0], vmax_now);
  while (static_cast<int>(contract_hist_.size()) > cfg_.history_window) {
    contract_hist_.pop_front();
  }

  round_ = std::move(round);
  rebuild_state();
}

void AuctionEnv::rebuild_state() {
  const int slots = cfg_.max_providers;
  MarketState s;
  s.features = Eigen::VectorXd::Zero(kFeaturesPerProvider * slots + 1);
  s.bids = Eigen::VectorXd::Zero(slots);
  s.mask = Eigen::VectorXd::Zero(slots);
  for (int i = 0; i < cfg_.provider_count(); ++i) {
    const auto& p = round_.providers[static_cast<std::size_t>(i)];
    const int base = kFeaturesPerProvider * i;
    s.features[base + 0] = p.uplink_bandwidth_hz;
    s.features[base + 1] = p.downlink_bandwidth_hz;
    s.features[base + 2] = p.gpu_efficiency;
    s.features[base + 3] = p.cpu_efficiency;
    s.features[base + 4] = window_mean(latency_hist_[static_cast<std::size_t>(i)]);
    s.features[base + 5] = window_mean(accuracy_hist_[static_cast<std::size_t>(i)]);
    s.bids[i] = round_.bids.bid_of(i);
    s.mask[i] = 1.0;
  }
  s.features[kFeaturesPerProvider * slots] = round_.task.input_size_bits;
  state_ = std::move(s);
}

StepInfo AuctionEnv::step(int action) {
  const double rho = action_to_rho(action, cfg_.action_count);
  auction::AuctionOutcome outcome = auction::msb_run(round_.bids, rho);
  auction::realize_surplus(outcome, round_.valuations);

  StepInfo info;
  info.rho = rho;
  info.winner = outcome.winner;
  info.payment = outcome.payments[static_cast<std::size_t>(outcome.winner)];
  info.uav_surplus = outcome.uav_surplus;
  info.bs_surplus = outcome.bs_surplus;
  info.winner_latency_s = round_.latencies[static_cast<std::size_t>(outcome.winner)];
  info.reward = auction::surplus(outcome, round_.valuations, {cfg_.zeta});

  advance_round();
  return info;
}

}  // namespace dmsb::env
