#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dmsb/diffusion.hpp"
#include "dmsb/environment.hpp"
#include "dmsb/neural.hpp"
#include "dmsb/rng.hpp"

namespace dmsb::rl {

/// One stored interaction. States are kept raw (un-normalized) so that the
/// evolving normalizer can whiten them at sampling time.
struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd next_state;
  int action = 0;
  double reward = 0.0;
};

/// Fixed-capacity ring buffer; once full, each insertion overwrites the
/// oldest transition.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return cap_; }
  std::size_t size() const { return storage_.size(); }
  void push(Transition t);

  /// Transition inserted `age` steps ago (0 = newest).
  const Transition& nth_newest(std::size_t age) const;

  /// Uniform sample with replacement.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;
  std::size_t cap_ = 0;
};

struct TrainerConfig {
  int episodes = 500;             // E
  int rounds_per_episode = 100;   // kappa
  int diffusion_steps = 5;        // K
  double eta_min = 1e-4;          // linear noise-variance schedule ends
  double eta_max = 2e-2;
  double soft_update_rate = 0.005;  // varpi
  double discount = 0.95;           // gamma
  int batch_size = 128;             // varrho
  double temperature = 0.05;        // entropy weight beta-bar
  double learning_rate = 1e-4;      // eta-hat, shared by actor and critics
  std::size_t buffer_capacity = 100000;
  int warmup_transitions = 1000;  // updates start once the buffer holds this many
  std::vector<int> hidden = {64, 64};        // actor (denoiser) hidden layers
  std::vector<int> critic_hidden = {128};    // critics: one wide layer keeps the
                                             // per-step all-action sweep cheap
  int step_embed_dim = 8;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // steps between checkpoint callbacks; 0 = final only

  long long total_steps() const {
    return static_cast<long long>(episodes) * rounds_per_episode;
  }
  void validate() const;
};

/// Two independent value estimators over (state, action one-hot); their
/// elementwise minimum curbs overestimation.
struct TwinCritics {
  nn::Mlp q1;
  nn::Mlp q2;

  TwinCritics() = default;
  TwinCritics(int state_dim, int action_count, const std::vector<int>& hidden, Rng& rng);
};

/// Q values of one critic for every action: returns an |A| x B matrix for
/// a d x B batch of states. Exploits the one-hot input structure so the
/// batch over actions collapses into a single pass.
Eigen::MatrixXd q_all_actions(const nn::Mlp& critic, const Eigen::MatrixXd& states,
                              int action_count);

/// A training mini-batch with whitened states and scaled rewards.
struct Batch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd next_states;
  std::vector<int> actions;
  Eigen::VectorXd rewards;
};

/// Bellman target y = r + gamma * E_{a ~ target policy}[min_i Q'_i(s', a)],
/// with the expectation taken over the target actor's action distribution.
Eigen::VectorXd bellman_target(const Batch& batch, const TwinCritics& target_critics,
                               const diffusion::DiffusionActor& target_actor, double gamma,
                               Rng& rng);

/// One squared-error gradient step for a single critic at the taken
/// actions. Returns the pre-step loss.
double critic_update(nn::Mlp& critic, nn::AdamOptimizer& opt, const Batch& batch,
                     const Eigen::VectorXd& targets);

/// Updates both critics independently; returns their pre-step losses.
std::pair<double, double> critic_update(TwinCritics& critics, nn::AdamOptimizer& opt1,
                                        nn::AdamOptimizer& opt2, const Batch& batch,
                                        const Eigen::VectorXd& targets);

/// One gradient step on the entropy-regularized actor objective
///   E_s[ sum_a pi(a|s) * (-min_i Q_i(s,a)) - temperature * H(pi(.|s)) ],
/// back-propagated through every denoising step. Returns the pre-step
/// objective value.
double actor_update(diffusion::DiffusionActor& actor, nn::AdamOptimizer& opt,
                    const TwinCritics& critics, const Eigen::MatrixXd& states,
                    double temperature, Rng& rng);

struct StepLog {
  long long step = 0;
  double reward = 0.0;
  double actor_objective = 0.0;
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double entropy = 0.0;
  double rho = 1.0;
  bool updated = false;
};

struct TrainResult {
  diffusion::DiffusionActor actor;
  env::RunningNorm normalizer;
  std::vector<StepLog> log;
  double reward_scale = 1.0;
};

using StepCallback = std::function<void(const StepLog&)>;
using CheckpointCallback = std::function<void(const diffusion::DiffusionActor&,
                                              const env::RunningNorm&, long long step)>;

/// The full training loop: per episode the environment restarts, and per
/// round the agent denoises an action-logit vector, projects it to an
/// action distribution, acts, stores the transition and (once the warmup
/// buffer is filled) updates the actor, both critics and their targets.
class Trainer {
 public:
  Trainer(const env::ScenarioConfig& scenario, const TrainerConfig& config);

  TrainResult run(const StepCallback& on_step = {}, const CheckpointCallback& on_checkpoint = {});

 private:
  env::ScenarioConfig scenario_;
  TrainerConfig cfg_;
};

/// Actor plus the state whitening statistics it was trained with.
struct PolicyCheckpoint {
  diffusion::DiffusionActor actor;
  env::RunningNorm normalizer;
};

void save_policy(const std::string& path, const diffusion::DiffusionActor& actor,
                 const env::RunningNorm& normalizer);
PolicyCheckpoint load_policy(const std::string& path);

}  // namespace dmsb::rl
