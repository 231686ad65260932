#include "dmsb/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dmsb::rl {

namespace {

constexpr char kPolicyMagic[8] = {'D', 'M', 'S', 'B', 'P', 'O', 'L', '1'};

Eigen::MatrixXd apply_activation(const nn::Mlp& net, Eigen::MatrixXd z) {
  if (net.activation() == nn::Activation::kRelu) return z.cwiseMax(0.0);
  return z.array().tanh().matrix();
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : cap_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  storage_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (storage_.size() < cap_) {
    storage_.push_back(std::move(t));
  } else {
    storage_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % cap_;
}

const Transition& ReplayBuffer::nth_newest(std::size_t age) const {
  if (age >= storage_.size()) throw std::out_of_range("replay buffer age out of range");
  const std::size_t newest = (cursor_ + cap_ - 1) % cap_;
  if (storage_.size() < cap_) {
    return storage_[storage_.size() - 1 - age];
  }
  return storage_[(newest + cap_ - age) % cap_];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (storage_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
  std::vector<const Transition*> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = &storage_[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(storage_.size()) - 1))];
  }
  return out;
}

void TrainerConfig::validate() const {
  if (episodes < 1 || rounds_per_episode < 1) throw std::invalid_argument("bad episode counts");
  if (diffusion_steps < 1) throw std::invalid_argument("bad diffusion step count");
  if (!(soft_update_rate > 0.0 && soft_update_rate <= 1.0)) {
    throw std::invalid_argument("soft-update rate must lie in (0,1]");
  }
  if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("discount out of [0,1)");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be non-negative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (buffer_capacity == 0) throw std::invalid_argument("buffer capacity must be positive");
  if (warmup_transitions < 1) throw std::invalid_argument("warmup must be positive");
  if (step_embed_dim < 2 || step_embed_dim % 2 != 0) {
    throw std::invalid_argument("step embedding dimension must be even and at least 2");
  }
  if (hidden.empty() || critic_hidden.empty()) {
    throw std::invalid_argument("need at least one hidden layer");
  }
}

TwinCritics::TwinCritics(int state_dim, int action_count, const std::vector<int>& hidden,
                         Rng& rng) {
  std::vector<int> sizes;
  sizes.push_back(state_dim + action_count);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  q1 = nn::Mlp(sizes, nn::Activation::kRelu, rng);
  q2 = nn::Mlp(sizes, nn::Activation::kRelu, rng);
}

Eigen::MatrixXd q_all_actions(const nn::Mlp& critic, const Eigen::MatrixXd& states,
                              int action_count) {
  const Eigen::Index d = states.rows();
  const Eigen::Index batch = states.cols();
  if (critic.input_size() != d + action_count) {
    throw std::invalid_argument("critic input does not match state/action dims");
  }

  // First layer split: the one-hot action input contributes one weight
  // column per action, so the state part is shared across all actions.
  // Actions are processed blockwise to keep the working set cache-sized;
  // the per-layer workspaces are reused across the blocks.
  const Eigen::MatrixXd& w1 = critic.weights(0);
  const Eigen::MatrixXd state_part =
      (w1.leftCols(d) * states).colwise() + critic.biases(0);

  const bool relu = critic.activation() == nn::Activation::kRelu;
  Eigen::MatrixXd q(action_count, batch);
  std::vector<Eigen::MatrixXd> work(static_cast<std::size_t>(critic.layer_count()));
  for (int a = 0; a < action_count; ++a) {
    Eigen::MatrixXd& h0 = work[0];
    if (relu) {
      h0 = (state_part.colwise() + w1.col(d + a)).cwiseMax(0.0);
    } else {
      h0 = apply_activation(critic, state_part.colwise() + w1.col(d + a));
    }
    for (int l = 1; l < critic.layer_count(); ++l) {
      Eigen::MatrixXd& below = work[static_cast<std::size_t>(l - 1)];
      Eigen::MatrixXd& here = work[static_cast<std::size_t>(l)];
      here.resize(critic.weights(l).rows(), batch);
      here.noalias() = critic.weights(l) * below;
      here.colwise() += critic.biases(l);
      if (l + 1 < critic.layer_count()) {
        if (relu) {
          here = here.cwiseMax(0.0);
        } else {
          here = apply_activation(critic, std::move(here));
        }
      }
    }
    q.row(a) = work.back().row(0);
  }
  return q;
}

Eigen::VectorXd bellman_target(const Batch& batch, const TwinCritics& target_critics,
                               const diffusion::DiffusionActor& target_actor, double gamma,
                               Rng& rng) {
  if (batch.rewards.size() == 0) throw std::invalid_argument("empty batch");
  const int action_count = target_actor.action_count();
  const Eigen::MatrixXd x0 = target_actor.denoise(batch.next_states, rng);
  const Eigen::MatrixXd pi = diffusion::action_distribution(x0);
  const Eigen::MatrixXd qmin =
      q_all_actions(target_critics.q1, batch.next_states, action_count)
          .cwiseMin(q_all_actions(target_critics.q2, batch.next_states, action_count));
  const Eigen::VectorXd expected_value = (pi.cwiseProduct(qmin)).colwise().sum();
  return batch.rewards + gamma * expected_value;
}

double critic_update(nn::Mlp& critic, nn::AdamOptimizer& opt, const Batch& batch,
                     const Eigen::VectorXd& targets) {
  const Eigen::Index b = batch.states.cols();
  if (targets.size() != b) throw std::invalid_argument("target count mismatch");
  const int action_count = critic.input_size() - static_cast<int>(batch.states.rows());

  Eigen::MatrixXd input = Eigen::MatrixXd::Zero(critic.input_size(), b);
  input.topRows(batch.states.rows()) = batch.states;
  for (Eigen::Index j = 0; j < b; ++j) {
    const int a = batch.actions[static_cast<std::size_t>(j)];
    if (a < 0 || a >= action_count) throw std::invalid_argument("action index out of range");
    input(batch.states.rows() + a, j) = 1.0;
  }

  nn::Tape tape;
  const Eigen::MatrixXd q = critic.forward(input, tape);
  const Eigen::MatrixXd err = q - targets.transpose();
  const double loss = err.squaredNorm() / static_cast<double>(b);
  const Eigen::MatrixXd grad = 2.0 * err / static_cast<double>(b);
  nn::Gradients grads = critic.backward(tape, grad);
  opt.step(critic, grads);
  return loss;
}

std::pair<double, double> critic_update(TwinCritics& critics, nn::AdamOptimizer& opt1,
                                        nn::AdamOptimizer& opt2, const Batch& batch,
                                        const Eigen::VectorXd& targets) {
  const double l1 = critic_update(critics.q1, opt1, batch, targets);
  const double l2 = critic_update(critics.q2, opt2, batch, targets);
  return {l1, l2};
}

double actor_update(diffusion::DiffusionActor& actor, nn::AdamOptimizer& opt,
                    const TwinCritics& critics, const Eigen::MatrixXd& states,
                    double temperature, Rng& rng) {
  const Eigen::Index b = states.cols();
  if (b == 0) throw std::invalid_argument("empty batch");
  const int action_count = actor.action_count();

  diffusion::DenoiseTrace trace;
  const Eigen::MatrixXd x0 = actor.denoise(states, rng, &trace);
  const Eigen::MatrixXd pi = diffusion::action_distribution(x0);
  const Eigen::MatrixXd qmin = q_all_actions(critics.q1, states, action_count)
                                   .cwiseMin(q_all_actions(critics.q2, states, action_count));

  // Objective per sample: sum_a pi_a * (-qmin_a) - temperature * H(pi).
  // Gradient w.r.t. the logits x0, using the softmax Jacobian:
  //   d(sum pi*c)/dx_i = pi_i (c_i - sum pi*c)
  //   dH/dx_i          = -pi_i (log pi_i + H)
  const double inv_b = 1.0 / static_cast<double>(b);
  const Eigen::ArrayXXd p = pi.array();
  const Eigen::ArrayXXd cost = -qmin.array();
  const Eigen::ArrayXXd log_p = p.max(1e-300).log();
  const Eigen::Array<double, 1, Eigen::Dynamic> expected_cost = (p * cost).colwise().sum();
  const Eigen::Array<double, 1, Eigen::Dynamic> neg_entropy = (p * log_p).colwise().sum();
  const double objective =
      inv_b * (expected_cost.sum() + temperature * neg_entropy.sum());
  if (!std::isfinite(objective)) throw std::runtime_error("actor objective diverged");

  const Eigen::MatrixXd x0_grad =
      (inv_b * (p * ((cost.rowwise() - expected_cost) +
                     temperature * (log_p.rowwise() - neg_entropy))))
          .matrix();

  nn::Gradients grads = actor.backprop(trace, x0_grad);
  opt.step(actor.net(), grads);
  return objective;
}

Trainer::Trainer(const env::ScenarioConfig& scenario, const TrainerConfig& config)
    : scenario_(scenario), cfg_(config) {
  scenario_.validate();
  cfg_.validate();
}

TrainResult Trainer::run(const StepCallback& on_step, const CheckpointCallback& on_checkpoint) {
  Rng init_rng = Rng::derive(cfg_.seed, 0);
  Rng loop_rng = Rng::derive(cfg_.seed, 1);

  env::AuctionEnv environment(scenario_, env::episode_seed(cfg_.seed, 0));
  const int sdim = environment.state_dimension();
  const int actions = environment.action_count();

  const auto schedule =
      diffusion::NoiseSchedule::linear(cfg_.diffusion_steps, cfg_.eta_min, cfg_.eta_max);
  diffusion::DiffusionActor actor(actions, sdim, cfg_.hidden, cfg_.step_embed_dim, schedule,
                                  init_rng);
  diffusion::DiffusionActor target_actor = actor;
  TwinCritics critics(sdim, actions, cfg_.critic_hidden, init_rng);
  TwinCritics target_critics = critics;

  nn::AdamOptimizer actor_opt(actor.net(), cfg_.learning_rate);
  nn::AdamOptimizer critic1_opt(critics.q1, cfg_.learning_rate);
  nn::AdamOptimizer critic2_opt(critics.q2, cfg_.learning_rate);

  ReplayBuffer buffer(cfg_.buffer_capacity);
  env::RunningNorm norm(sdim);

  TrainResult result{actor, norm, {}, 1.0};
  result.log.reserve(static_cast<std::size_t>(cfg_.total_steps()));

  double reward_scale = 0.0;  // fixed from buffer statistics once updates begin
  long long step_counter = 0;

  for (int episode = 0; episode < cfg_.episodes; ++episode) {
    environment.reset(env::episode_seed(cfg_.seed, episode));
    for (int round = 0; round < cfg_.rounds_per_episode; ++round) {
      ++step_counter;
      const Eigen::VectorXd raw_state = env::encode_state(environment.state());
      norm.observe(raw_state);

      const Eigen::VectorXd x0 = actor.denoise(norm.normalize(raw_state), loop_rng);
      const Eigen::VectorXd dist = diffusion::action_distribution(x0);
      const int action =
          diffusion::sample_action(dist, loop_rng, diffusion::SampleMode::kStochastic);

      const env::StepInfo info = environment.step(action);
      const Eigen::VectorXd raw_next = env::encode_state(environment.state());
      buffer.push({raw_state, raw_next, action, info.reward});

      StepLog log;
      log.step = step_counter;
      log.reward = info.reward;
      log.entropy = diffusion::entropy(dist);
      log.rho = info.rho;

      const bool ready = buffer.size() >= static_cast<std::size_t>(cfg_.warmup_transitions) &&
                         buffer.size() >= static_cast<std::size_t>(cfg_.batch_size);
      if (ready) {
        if (reward_scale == 0.0) {
          // Pin the reward scale once, from warmup statistics, so network
          // targets are O(1) regardless of the market's surplus magnitude.
          double mean = 0.0;
          double sq = 0.0;
          const auto count = buffer.size();
          for (std::size_t i = 0; i < count; ++i) {
            const double r = buffer.nth_newest(i).reward;
            mean += r;
            sq += r * r;
          }
          mean /= static_cast<double>(count);
          const double var = sq / static_cast<double>(count) - mean * mean;
          reward_scale = 1.0 / std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
          result.reward_scale = reward_scale;
        }

        const auto sampled = buffer.sample(static_cast<std::size_t>(cfg_.batch_size), loop_rng);
        Batch batch;
        batch.states.resize(sdim, cfg_.batch_size);
        batch.next_states.resize(sdim, cfg_.batch_size);
        batch.actions.resize(static_cast<std::size_t>(cfg_.batch_size));
        batch.rewards.resize(cfg_.batch_size);
        for (int j = 0; j < cfg_.batch_size; ++j) {
          batch.states.col(j) = sampled[static_cast<std::size_t>(j)]->state;
          batch.next_states.col(j) = sampled[static_cast<std::size_t>(j)]->next_state;
          batch.actions[static_cast<std::size_t>(j)] = sampled[static_cast<std::size_t>(j)]->action;
          batch.rewards[j] = sampled[static_cast<std::size_t>(j)]->reward * reward_scale;
        }
        batch.states = norm.normalize(batch.states);
        batch.next_states = norm.normalize(batch.next_states);

        const Eigen::VectorXd targets =
            bellman_target(batch, target_critics, target_actor, cfg_.discount, loop_rng);
        log.actor_objective =
            actor_update(actor, actor_opt, critics, batch.states, cfg_.temperature, loop_rng);
        const auto losses = critic_update(critics, critic1_opt, critic2_opt, batch, targets);
        log.critic1_loss = losses.first;
        log.critic2_loss = losses.second;
        log.updated = true;
        if (!std::isfinite(losses.first) || !std::isfinite(losses.second)) {
          throw std::runtime_error("critic loss diverged at step " + std::to_string(step_counter));
        }

        nn::soft_update(target_actor.net(), actor.net(), cfg_.soft_update_rate);
        nn::soft_update(target_critics.q1, critics.q1, cfg_.soft_update_rate);
        nn::soft_update(target_critics.q2, critics.q2, cfg_.soft_update_rate);
      }

      result.log.push_back(log);
      if (on_step) on_step(log);
      if (on_checkpoint && cfg_.checkpoint_every > 0 &&
          step_counter % cfg_.checkpoint_every == 0) {
        on_checkpoint(actor, norm, step_counter);
      }
    }
  }

  result.actor = actor;
  result.normalizer = norm;
  if (on_checkpoint) on_checkpoint(actor, norm, step_counter);
  return result;
}

void save_policy(const std::string& path, const diffusion::DiffusionActor& actor,
                 const env::RunningNorm& normalizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kPolicyMagic, sizeof kPolicyMagic);
  actor.save(out);
  normalizer.save(out);
  if (!out) throw std::runtime_error("failed to write policy checkpoint " + path);
}

PolicyCheckpoint load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open policy checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kPolicyMagic, sizeof kPolicyMagic) != 0) {
    throw std::runtime_error("not a policy checkpoint: " + path);
  }
  PolicyCheckpoint ckpt;
  ckpt.actor = diffusion::DiffusionActor::load(in);
  ckpt.normalizer = env::RunningNorm::load(in);
  return ckpt;
}

}  // namespace dmsb::rl
