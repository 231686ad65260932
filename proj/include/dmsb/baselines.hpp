#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dmsb/diffusion.hpp"
#include "dmsb/environment.hpp"
#include "dmsb/neural.hpp"
#include "dmsb/training.hpp"

namespace dmsb::rl {

/// A price-scaling-factor policy over the auction MDP.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual int act(const env::MarketState& state, Rng& rng) = 0;
  virtual std::string name() const = 0;
};

/// Uniform over the action space.
std::unique_ptr<Agent> make_random_agent(int action_count);

/// One-step lookahead using the observed bids: picks the action whose rho
/// maximizes the round's bid-measured surplus (zeta * b0 when the UAV would
/// win, the winning BS's bid otherwise). The UAV's true valuation is not
/// observable from bids, which is exactly the informational gap a learned
/// policy can exploit.
std::unique_ptr<Agent> make_greedy_agent(int action_count, double zeta);

/// A frozen diffusion policy with the whitening statistics it was trained
/// under.
class DiffusionPolicyAgent : public Agent {
 public:
  DiffusionPolicyAgent(diffusion::DiffusionActor actor, env::RunningNorm normalizer,
                       diffusion::SampleMode mode);

  int act(const env::MarketState& state, Rng& rng) override;
  std::string name() const override { return "diffusion"; }

 private:
  diffusion::DiffusionActor actor_;
  env::RunningNorm normalizer_;
  diffusion::SampleMode mode_;
};

struct PpoConfig {
  int rollout_length = 256;
  int epochs = 4;
  int minibatch = 64;
  double clip = 0.2;
  double discount = 0.95;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  double entropy_coef = 0.0;
  std::vector<int> hidden = {64, 64};
  std::uint64_t seed = 1;

  void validate() const;
};

/// One collected on-policy rollout, already whitened.
struct PpoRollout {
  Eigen::MatrixXd states;        // d x T
  std::vector<int> actions;      // T
  Eigen::VectorXd log_probs;     // T, under the collecting policy
  Eigen::VectorXd advantages;    // T
  Eigen::VectorXd returns;       // T, value targets
};

/// Standard clipped-surrogate policy gradient over the same MDP, as a
/// learning baseline.
class PpoAgent : public Agent {
 public:
  PpoAgent(int state_dim, int action_count, const PpoConfig& config);

  int act(const env::MarketState& state, Rng& rng) override;
  std::string name() const override { return "ppo"; }

  /// Runs `steps` environment rounds, updating every rollout_length steps.
  void train(env::AuctionEnv& environment, long long steps, int rounds_per_episode,
             const StepCallback& on_step = {});

  /// One PPO update from an externally built rollout. Advantages are used
  /// as given (no re-normalization), so an all-zero advantage vector leaves
  /// the policy parameters unchanged.
  void update(const PpoRollout& rollout);

  void save(const std::string& path) const;
  static PpoAgent load(const std::string& path, const PpoConfig& config);

  const nn::Mlp& policy_net() const { return policy_; }
  const nn::Mlp& value_net() const { return value_; }
  env::RunningNorm& normalizer() { return norm_; }

 private:
  PpoAgent(int state_dim, int action_count, const PpoConfig& config, Rng init_rng);
  Eigen::VectorXd policy_distribution(const Eigen::VectorXd& whitened_state) const;

  PpoConfig cfg_;
  int action_count_;
  nn::Mlp policy_;
  nn::Mlp value_;
  nn::AdamOptimizer policy_opt_;
  nn::AdamOptimizer value_opt_;
  env::RunningNorm norm_;
  Rng update_rng_;
  double last_policy_loss_ = 0.0;
  double last_value_loss_ = 0.0;
};

}  // namespace dmsb::rl
