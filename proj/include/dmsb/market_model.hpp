#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace dmsb::market {

/// A bidder offering compute and communication resources.
///
/// Provider 0 is the aerial relay (UAV); ids 1..N are ground base stations.
/// Bandwidths are in Hz, compute efficiencies in cycles per second, powers
/// and noise in linear power units.
struct ResourceProvider {
  int id = 0;
  double uplink_bandwidth_hz = 0.0;
  double downlink_bandwidth_hz = 0.0;
  double gpu_efficiency = 0.0;
  double cpu_efficiency = 0.0;
  double tx_power = 0.0;
  double noise_power = 0.0;
  double accuracy_mean = 0.5;  // centre of the sampled per-task accuracy, in (0,1)

  void validate() const;
};

/// One vehicle-twin task request. Input and generated output sizes are in
/// bits; `channel_gain` maps provider id to the (dimensionless) channel power
/// gain between the requesting vehicle and that provider.
struct VtTask {
  double input_size_bits = 0.0;
  double output_size_bits = 0.0;
  long long pixel_count = 1;
  double user_tx_power = 0.0;
  double user_noise = 0.0;
  std::map<int, double> channel_gain;

  void validate() const;
};

/// Ground-truth and processed pixel label sequences of equal length.
struct PixelSets {
  std::vector<int> ground_truth;
  std::vector<int> processed;
};

struct ValuationParams {
  double omega1 = 1.0;     // latency value factor
  double omega2 = 1.0;     // accuracy value factor
  double beta = 2.0;       // accuracy sensitivity exponent
  int history_window = 10; // expectation window, in auction rounds

  void validate() const;
};

/// Shannon-capacity uplink rate in bits/s: B_u * log2(1 + g*p_u / noise).
/// A zero SNR term is a degenerate but representable input and yields 0.
double uplink_rate(const VtTask& task, const ResourceProvider& provider);

/// Downlink mirror of uplink_rate, using the provider's transmit power and
/// the user-side noise floor.
double downlink_rate(const VtTask& task, const ResourceProvider& provider);

/// Three-stage task latency in seconds: upload + processing + download.
/// Processing consumes `gpu_cycles_per_bit` GPU cycles plus one CPU cycle
/// per input bit. Returns nullopt when either link rate is zero, i.e. the
/// task can never complete; the unbounded case is never encoded as a float.
std::optional<double> total_latency(const VtTask& task, const ResourceProvider& provider,
                                    double gpu_cycles_per_bit);

/// Number of positions where the processed pixels match the ground truth.
long long pixel_match_count(const PixelSets& p);

/// Fraction of matching pixels, in [0, 1].
double task_accuracy(const PixelSets& p);

/// Latency-derived value component: mean over the history of omega1 / T.
double common_value(std::span<const double> latency_history, const ValuationParams& params);

/// Accuracy-derived value component: mean over the history of
/// omega2 / (1 - R)^beta. Diverges as R -> 1, so R = 1 is rejected.
double matching_value(std::span<const double> accuracy_history, const ValuationParams& params);

/// Provider valuation, the product of the two independent components.
double valuation(double common, double matching);

}  // namespace dmsb::market
