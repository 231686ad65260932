#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dmsb/auction.hpp"
#include "dmsb/baselines.hpp"
#include "dmsb/environment.hpp"
#include "dmsb/kvconfig.hpp"
#include "dmsb/training.hpp"

namespace dmsb::exp {

enum class Mechanism { kDmsb, kSpa, kMyopicMsb, kOptimalMsb };
enum class AgentKind { kDiffusion, kPpo, kGreedy, kRandom };
enum class SweepVariable { kNone, kBandwidth, kVtSize, kNumBs };

std::string to_string(Mechanism m);
std::string to_string(AgentKind a);
std::string to_string(SweepVariable v);
Mechanism parse_mechanism(const std::string& s);
AgentKind parse_agent(const std::string& s);
SweepVariable parse_sweep(const std::string& s);

/// A batch experiment description: the market scenario, the trainer, which
/// mechanisms and rho-selecting agents to compare, and an optional sweep.
/// Loadable from a key = value file; any key can also be overridden
/// programmatically through apply().
struct ExperimentSpec {
  std::string name = "default";
  std::string out_dir = "results";
  std::uint64_t seed = 1;
  int repetitions = 5;
  env::ScenarioConfig scenario;
  rl::TrainerConfig trainer;
  rl::PpoConfig ppo;
  std::vector<Mechanism> mechanisms = {Mechanism::kDmsb, Mechanism::kSpa, Mechanism::kMyopicMsb,
                                       Mechanism::kOptimalMsb};
  std::vector<AgentKind> agents = {AgentKind::kDiffusion, AgentKind::kPpo, AgentKind::kGreedy,
                                   AgentKind::kRandom};
  SweepVariable sweep = SweepVariable::kNone;
  std::vector<double> sweep_grid;
  long long requested_steps = 0;  // when set, overrides trainer.episodes
  int eval_rounds = 1000;
  int smoothing_window = 1000;
  int log_every = 100;

  static ExperimentSpec load(const std::string& path);
  static ExperimentSpec from_config(const kv::Config& config);
  void apply(const std::string& key, const std::string& value);
  void validate() const;

  /// Trainer configuration for repetition `rep`, with the step override and
  /// per-repetition seed resolved.
  rl::TrainerConfig trainer_for_rep(int rep) const;
  std::uint64_t rep_seed(int rep) const { return seed + static_cast<std::uint64_t>(rep); }

  std::string policy_path(int rep) const;
  std::string ppo_path(int rep) const;
};

/// One aggregated evaluation result. The two surplus parts sum to the mean
/// total surplus.
struct ResultRow {
  std::string experiment;
  double sweep_value = 0.0;
  std::string series;
  std::uint64_t seed = 0;
  double mean_total_surplus = 0.0;
  double uav_surplus = 0.0;
  double bs_surplus = 0.0;
  double mean_total_latency_s = 0.0;
  long long steps = 0;
};

/// Writes rows under a versioned header line. Identical rows give
/// byte-identical files.
void write_results_csv(const std::string& path, const std::string& experiment,
                       const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::string& path);

/// Collapses the sweep variable onto a single value of the scenario.
env::ScenarioConfig apply_sweep(const env::ScenarioConfig& base, SweepVariable variable,
                                double value);

/// Evaluates an rho-selecting agent inside the modified second-bid auction
/// for `rounds` rounds. The environment stream is `env_seed`, the agent's
/// own randomness `agent_seed`, so different agents can share identical
/// market rounds.
ResultRow evaluate_msb_agent(const std::string& experiment, const std::string& series,
                             rl::Agent& agent, const env::ScenarioConfig& scenario,
                             std::uint64_t env_seed, std::uint64_t agent_seed, int rounds,
                             double sweep_value, std::uint64_t seed_label);

/// Evaluates a non-learning auction mechanism (SPA, myopic or optimal MSB)
/// on the same market stream.
ResultRow evaluate_mechanism(const std::string& experiment, Mechanism mechanism,
                             const env::ScenarioConfig& scenario, std::uint64_t env_seed,
                             int rounds, double sweep_value, std::uint64_t seed_label);

/// Trains the learnable agents of the spec for every repetition, writing
/// per-step training CSVs, policy checkpoints and a combined smoothed
/// convergence CSV (one row per agent, seed and logged step). Non-learning
/// agents are rolled out for the same number of steps so the convergence
/// chart covers them too. Returns the convergence CSV path.
std::string run_train(const ExperimentSpec& spec);

/// Evaluates every mechanism and agent of the spec on frozen policies,
/// writing evaluation.csv. Requires checkpoints from run_train.
std::string run_evaluate(const ExperimentSpec& spec);

/// Runs the spec's sweep over its grid, evaluating every mechanism and
/// agent at each point with frozen policies. Returns the CSV path.
std::string run_sweep(const ExperimentSpec& spec);

/// A market drawn through the scenario generator, for mechanism property
/// probes: valuations come from the valuation model and the UAV bid from
/// the contracted-payment rule.
auction::MarketInstance random_market(Rng& rng, int num_bs);

struct PropertyReport {
  long long markets = 0;
  long long truthfulness_violations = 0;
  long long homogeneity_trials = 0;
  long long homogeneity_violations = 0;
  long long feasibility_checks = 0;
  long long feasibility_violations = 0;

  bool passed() const {
    return truthfulness_violations == 0 && homogeneity_violations == 0 &&
           feasibility_violations == 0;
  }
};

/// Randomized mechanism-property suite: truthfulness counterexample search
/// over generated markets, degree-one homogeneity of the critical payment,
/// scale invariance of the winner, and outcome feasibility.
PropertyReport run_property_check(std::uint64_t seed, int markets, int deviations_per_bidder,
                                  int homogeneity_trials);

}  // namespace dmsb::exp
