#include "dmsb/market_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dmsb::market {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::domain_error(what);
}

double gain_for(const VtTask& task, int provider_id) {
  const auto it = task.channel_gain.find(provider_id);
  require(it != task.channel_gain.end(),
          "no channel gain for provider " + std::to_string(provider_id));
  require(it->second >= 0.0, "negative channel gain");
  return it->second;
}

double shannon_rate(double bandwidth_hz, double snr) {
  require(bandwidth_hz > 0.0, "bandwidth must be positive");
  require(snr >= 0.0, "negative SNR");
  return bandwidth_hz * std::log2(1.0 + snr);
}

}  // namespace

void ResourceProvider::validate() const {
  require(id >= 0, "provider id must be non-negative");
  require(uplink_bandwidth_hz > 0.0, "uplink bandwidth must be positive");
  require(downlink_bandwidth_hz > 0.0, "downlink bandwidth must be positive");
  require(gpu_efficiency > 0.0, "gpu efficiency must be positive");
  require(cpu_efficiency > 0.0, "cpu efficiency must be positive");
  require(tx_power > 0.0, "tx power must be positive");
  require(noise_power > 0.0, "noise power must be positive");
  require(accuracy_mean > 0.0 && accuracy_mean < 1.0, "accuracy mean must lie in (0,1)");
}

void VtTask::validate() const {
  require(input_size_bits > 0.0, "task input size must be positive");
  require(output_size_bits > 0.0, "task output size must be positive");
  require(pixel_count >= 1, "pixel count must be at least 1");
  require(user_tx_power > 0.0, "user tx power must be positive");
  require(user_noise > 0.0, "user noise must be positive");
}

void ValuationParams::validate() const {
  require(omega1 > 0.0, "omega1 must be positive");
  require(omega2 > 0.0, "omega2 must be positive");
  require(beta > 0.0, "beta must be positive");
  require(history_window >= 1, "history window must be at least 1");
}

double uplink_rate(const VtTask& task, const ResourceProvider& provider) {
  require(task.user_tx_power >= 0.0, "negative user tx power");
  require(provider.noise_power > 0.0, "noise power must be positive");
  const double snr = gain_for(task, provider.id) * task.user_tx_power / provider.noise_power;
  return shannon_rate(provider.uplink_bandwidth_hz, snr);
}

double downlink_rate(const VtTask& task, const ResourceProvider& provider) {
  require(provider.tx_power >= 0.0, "negative provider tx power");
  require(task.user_noise > 0.0, "user noise must be positive");
  const double snr = gain_for(task, provider.id) * provider.tx_power / task.user_noise;
  return shannon_rate(provider.downlink_bandwidth_hz, snr);
}

std::optional<double> total_latency(const VtTask& task, const ResourceProvider& provider,
                                    double gpu_cycles_per_bit) {
  require(task.input_size_bits >= 0.0, "negative input size");
  require(task.output_size_bits >= 0.0, "negative output size");
  require(gpu_cycles_per_bit > 0.0, "gpu cycles per bit must be positive");
  require(provider.gpu_efficiency > 0.0, "gpu efficiency must be positive");
  require(provider.cpu_efficiency > 0.0, "cpu efficiency must be positive");

  const double up = uplink_rate(task, provider);
  const double down = downlink_rate(task, provider);
  if (up <= 0.0 || down <= 0.0) return std::nullopt;  // unreachable link, unbounded latency

  const double t_up = task.input_size_bits / up;
  const double t_proc = task.input_size_bits * gpu_cycles_per_bit / provider.gpu_efficiency +
                        task.input_size_bits / provider.cpu_efficiency;
  const double t_down = task.output_size_bits / down;
  return t_up + t_proc + t_down;
}

long long pixel_match_count(const PixelSets& p) {
  require(p.ground_truth.size() == p.processed.size(), "pixel sequences differ in length");
  long long count = 0;
  for (std::size_t i = 0; i < p.ground_truth.size(); ++i) {
    if (p.ground_truth[i] == p.processed[i]) ++count;
  }
  return count;
}

double task_accuracy(const PixelSets& p) {
  require(!p.ground_truth.empty(), "accuracy undefined for zero pixels");
  return static_cast<double>(pixel_match_count(p)) / static_cast<double>(p.ground_truth.size());
}

double common_value(std::span<const double> latency_history, const ValuationParams& params) {
  params.validate();
  require(!latency_history.empty(), "empty latency history");
  double sum = 0.0;
  for (const double t : latency_history) {
    require(t > 0.0, "latency history entries must be positive");
    sum += params.omega1 / t;
  }
  return sum / static_cast<double>(latency_history.size());
}

double matching_value(std::span<const double> accuracy_history, const ValuationParams& params) {
  params.validate();
  require(!accuracy_history.empty(), "empty accuracy history");
  double sum = 0.0;
  for (const double r : accuracy_history) {
    require(r >= 0.0 && r < 1.0, "accuracy history entries must lie in [0,1)");
    sum += params.omega2 / std::pow(1.0 - r, params.beta);
  }
  return sum / static_cast<double>(accuracy_history.size());
}

double valuation(double common, double matching) {
  require(common > 0.0, "common value must be positive");
  require(matching > 0.0, "matching value must be positive");
  return common * matching;
}

}  // namespace dmsb::market
