#include "dmsb/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "dmsb/auction.hpp"

namespace dmsb::rl {

namespace {

class RandomAgent : public Agent {
 public:
  explicit RandomAgent(int action_count) : action_count_(action_count) {
    if (action_count < 1) throw std::invalid_argument("need at least one action");
  }

  int act(const env::MarketState&, Rng& rng) override {
    return rng.uniform_int(0, action_count_ - 1);
  }

  std::string name() const override { return "random"; }

 private:
  int action_count_;
};

class GreedyAgent : public Agent {
 public:
  GreedyAgent(int action_count, double zeta) : action_count_(action_count), zeta_(zeta) {
    if (action_count < 1) throw std::invalid_argument("need at least one action");
    if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be positive");
  }

  int act(const env::MarketState& state, Rng&) override {
    auction::BidVector bids;
    bids.uav_bid = state.bids[0];
    for (Eigen::Index i = 1; i < state.mask.size(); ++i) {
      if (state.mask[i] > 0.5) bids.bs_bids.push_back(state.bids[i]);
    }
    int best_action = 0;
    double best_value = -1.0;
    for (int a = 0; a < action_count_; ++a) {
      const double rho = env::action_to_rho(a, action_count_);
      const auction::AuctionOutcome outcome = auction::msb_allocate(bids, rho);
      const double value = outcome.winner == auction::kUavId
                               ? zeta_ * bids.uav_bid
                               : bids.bid_of(outcome.winner);
      if (value > best_value) {
        best_value = value;
        best_action = a;
      }
    }
    return best_action;
  }

  std::string name() const override { return "greedy"; }

 private:
  int action_count_;
  double zeta_;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

nn::Mlp make_net(int in, const std::vector<int>& hidden, int out, Rng& rng) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return nn::Mlp(sizes, nn::Activation::kRelu, rng);
}

}  // namespace

std::unique_ptr<Agent> make_random_agent(int action_count) {
  return std::make_unique<RandomAgent>(action_count);
}

std::unique_ptr<Agent> make_greedy_agent(int action_count, double zeta) {
  return std::make_unique<GreedyAgent>(action_count, zeta);
}

DiffusionPolicyAgent::DiffusionPolicyAgent(diffusion::DiffusionActor actor,
                                           env::RunningNorm normalizer,
                                           diffusion::SampleMode mode)
    : actor_(std::move(actor)), normalizer_(std::move(normalizer)), mode_(mode) {
  normalizer_.freeze();
}

int DiffusionPolicyAgent::act(const env::MarketState& state, Rng& rng) {
  const Eigen::VectorXd raw = env::encode_state(state);
  const Eigen::VectorXd x0 = actor_.denoise(normalizer_.normalize(raw), rng);
  return diffusion::sample_action(diffusion::action_distribution(x0), rng, mode_);
}

void PpoConfig::validate() const {
  if (rollout_length < 2) throw std::invalid_argument("rollout too short");
  if (epochs < 1) throw std::invalid_argument("need at least one epoch");
  if (minibatch < 1 || minibatch > rollout_length) throw std::invalid_argument("bad minibatch");
  if (!(clip > 0.0)) throw std::invalid_argument("clip must be positive");
  if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("bad discount");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("bad gae lambda");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("bad learning rate");
  if (hidden.empty()) throw std::invalid_argument("need at least one hidden layer");
}

PpoAgent::PpoAgent(int state_dim, int action_count, const PpoConfig& config)
    : PpoAgent(state_dim, action_count, config, Rng::derive(config.seed, 10)) {}

PpoAgent::PpoAgent(int state_dim, int action_count, const PpoConfig& config, Rng init_rng)
    : cfg_(config),
      action_count_(action_count),
      policy_(make_net(state_dim, config.hidden, action_count, init_rng)),
      value_(make_net(state_dim, config.hidden, 1, init_rng)),
      policy_opt_(policy_, config.learning_rate),
      value_opt_(value_, config.learning_rate),
      norm_(state_dim),
      update_rng_(Rng::derive(config.seed, 11)) {
  cfg_.validate();
}

Eigen::VectorXd PpoAgent::policy_distribution(const Eigen::VectorXd& whitened_state) const {
  return softmax(policy_.forward(whitened_state));
}

int PpoAgent::act(const env::MarketState& state, Rng& rng) {
  const Eigen::VectorXd dist = policy_distribution(norm_.normalize(env::encode_state(state)));
  return diffusion::sample_action(dist, rng, diffusion::SampleMode::kGreedy);
}

void PpoAgent::train(env::AuctionEnv& environment, long long steps, int rounds_per_episode,
                     const StepCallback& on_step) {
  if (rounds_per_episode < 1) throw std::invalid_argument("bad episode length");
  Rng rollout_rng = Rng::derive(cfg_.seed, 12);

  const int d = environment.state_dimension();
  std::vector<Eigen::VectorXd> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> log_probs;
  Eigen::VectorXd last_next_whitened;

  long long step_counter = 0;
  long long episode = 0;
  double last_policy_loss = 0.0;
  double last_value_loss = 0.0;
  while (step_counter < steps) {
    environment.reset(env::episode_seed(cfg_.seed, episode));
    ++episode;
    for (int round = 0; round < rounds_per_episode && step_counter < steps; ++round) {
      ++step_counter;
      const Eigen::VectorXd raw = env::encode_state(environment.state());
      norm_.observe(raw);
      const Eigen::VectorXd w = norm_.normalize(raw);
      const Eigen::VectorXd dist = policy_distribution(w);
      const int action =
          diffusion::sample_action(dist, rollout_rng, diffusion::SampleMode::kStochastic);

      const env::StepInfo info = environment.step(action);
      states.push_back(w);
      actions.push_back(action);
      rewards.push_back(info.reward);
      values.push_back(value_.forward(w)[0]);
      log_probs.push_back(std::log(std::max(dist[action], 1e-300)));
      last_next_whitened = norm_.normalize(env::encode_state(environment.state()));

      StepLog log;
      log.step = step_counter;
      log.reward = info.reward;
      log.entropy = diffusion::entropy(dist);
      log.rho = info.rho;
      log.actor_objective = last_policy_loss;
      log.critic1_loss = last_value_loss;

      if (static_cast<int>(states.size()) >= cfg_.rollout_length) {
        PpoRollout rollout;
        const int t = static_cast<int>(states.size());
        rollout.states.resize(d, t);
        for (int i = 0; i < t; ++i) rollout.states.col(i) = states[static_cast<std::size_t>(i)];
        rollout.actions = actions;
        rollout.log_probs = Eigen::Map<const Eigen::VectorXd>(log_probs.data(), t);

        // GAE over the collected slice; the task is continuing, so every
        // step bootstraps from the learned value of its successor.
        rollout.advantages.resize(t);
        rollout.returns.resize(t);
        const double next_value = value_.forward(last_next_whitened)[0];
        double gae = 0.0;
        for (int i = t - 1; i >= 0; --i) {
          const double v_next = i == t - 1 ? next_value : values[static_cast<std::size_t>(i + 1)];
          const double delta = rewards[static_cast<std::size_t>(i)] + cfg_.discount * v_next -
                               values[static_cast<std::size_t>(i)];
          gae = delta + cfg_.discount * cfg_.gae_lambda * gae;
          rollout.advantages[i] = gae;
          rollout.returns[i] = gae + values[static_cast<std::size_t>(i)];
        }
        const double adv_mean = rollout.advantages.mean();
        const double adv_sd = std::sqrt(
            (rollout.advantages.array() - adv_mean).square().sum() / static_cast<double>(t));
        if (adv_sd > 1e-8) {
          rollout.advantages = (rollout.advantages.array() - adv_mean) / adv_sd;
        }

        update(rollout);
        last_policy_loss = last_policy_loss_;
        last_value_loss = last_value_loss_;
        log.actor_objective = last_policy_loss;
        log.critic1_loss = last_value_loss;
        log.updated = true;

        states.clear();
        actions.clear();
        rewards.clear();
        values.clear();
        log_probs.clear();
      }

      if (on_step) on_step(log);
    }
  }
}

void PpoAgent::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  static constexpr char kMagic[8] = {'D', 'M', 'S', 'B', 'P', 'P', 'O', '1'};
  out.write(kMagic, sizeof kMagic);
  policy_.save(out);
  value_.save(out);
  norm_.save(out);
  if (!out) throw std::runtime_error("failed to write PPO checkpoint " + path);
}

PpoAgent PpoAgent::load(const std::string& path, const PpoConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open PPO checkpoint " + path);
  static constexpr char kMagic[8] = {'D', 'M', 'S', 'B', 'P', 'P', 'O', '1'};
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a PPO checkpoint: " + path);
  }
  nn::Mlp policy = nn::Mlp::load(in);
  nn::Mlp value = nn::Mlp::load(in);
  env::RunningNorm norm = env::RunningNorm::load(in);
  PpoAgent agent(policy.input_size(), policy.output_size(), config);
  agent.policy_ = std::move(policy);
  agent.value_ = std::move(value);
  agent.norm_ = std::move(norm);
  return agent;
}

void PpoAgent::update(const PpoRollout& rollout) {
  const int t = static_cast<int>(rollout.states.cols());
  if (t < 1) throw std::invalid_argument("empty rollout");

  std::vector<int> order(static_cast<std::size_t>(t));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    // Fisher-Yates shuffle with the deterministic stream.
    for (int i = t - 1; i > 0; --i) {
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(update_rng_.uniform_int(0, i))]);
    }
    for (int start = 0; start < t; start += cfg_.minibatch) {
      const int mb = std::min(cfg_.minibatch, t - start);
      Eigen::MatrixXd s(rollout.states.rows(), mb);
      Eigen::VectorXd adv(mb);
      Eigen::VectorXd old_lp(mb);
      Eigen::VectorXd ret(mb);
      std::vector<int> acts(static_cast<std::size_t>(mb));
      for (int j = 0; j < mb; ++j) {
        const int idx = order[static_cast<std::size_t>(start + j)];
        s.col(j) = rollout.states.col(idx);
        adv[j] = rollout.advantages[idx];
        old_lp[j] = rollout.log_probs[idx];
        ret[j] = rollout.returns[idx];
        acts[static_cast<std::size_t>(j)] = rollout.actions[static_cast<std::size_t>(idx)];
      }

      // Policy: clipped surrogate.
      nn::Tape ptape;
      const Eigen::MatrixXd logits = policy_.forward(s, ptape);
      Eigen::MatrixXd probs = diffusion::action_distribution(logits);
      Eigen::MatrixXd logit_grad = Eigen::MatrixXd::Zero(action_count_, mb);
      double policy_loss = 0.0;
      for (int j = 0; j < mb; ++j) {
        const int a = acts[static_cast<std::size_t>(j)];
        const Eigen::VectorXd p = probs.col(j);
        const double lp = std::log(std::max(p[a], 1e-300));
        const double ratio = std::exp(lp - old_lp[j]);
        const double unclipped = ratio * adv[j];
        const double clipped = std::clamp(ratio, 1.0 - cfg_.clip, 1.0 + cfg_.clip) * adv[j];
        policy_loss -= std::min(unclipped, clipped);

        // Gradient flows only while the min selects a branch whose ratio is
        // not pinned by the clamp.
        const bool unclipped_active = unclipped <= clipped;
        const bool within = ratio >= 1.0 - cfg_.clip && ratio <= 1.0 + cfg_.clip;
        double coef = 0.0;
        if (unclipped_active || within) coef = ratio * adv[j];
        if (coef != 0.0) {
          Eigen::VectorXd dlp = -p;  // d log p_a / d logits = e_a - p
          dlp[a] += 1.0;
          logit_grad.col(j) -= coef * dlp;
        }
        if (cfg_.entropy_coef > 0.0) {
          const double h = diffusion::entropy(p);
          policy_loss -= cfg_.entropy_coef * h;
          logit_grad.col(j) +=
              cfg_.entropy_coef * (p.array() * (p.array().max(1e-300).log() + h)).matrix();
        }
      }
      policy_loss /= static_cast<double>(mb);
      logit_grad /= static_cast<double>(mb);
      nn::Gradients pgrads = policy_.backward(ptape, logit_grad);
      policy_opt_.step(policy_, pgrads);
      last_policy_loss_ = policy_loss;

      // Value: squared error against the empirical returns.
      nn::Tape vtape;
      const Eigen::MatrixXd v = value_.forward(s, vtape);
      const Eigen::MatrixXd verr = v - ret.transpose();
      last_value_loss_ = verr.squaredNorm() / static_cast<double>(mb);
      const Eigen::MatrixXd vgrad = 2.0 * verr / static_cast<double>(mb);
      nn::Gradients vgrads = value_.backward(vtape, vgrad);
      value_opt_.step(value_, vgrads);
    }
  }
}

}  // namespace dmsb::rl
