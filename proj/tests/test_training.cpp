#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dmsb/baselines.hpp"
#include "dmsb/diffusion.hpp"
#include "dmsb/environment.hpp"
#include "dmsb/training.hpp"

using namespace dmsb;
using rl::Batch;
using rl::ReplayBuffer;
using rl::TrainerConfig;
using rl::Transition;
using rl::TwinCritics;

namespace {

// Critic whose output is a constant, independent of state and action.
nn::Mlp constant_critic(int input, double value, Rng& rng) {
  nn::Mlp net({input, 4, 1}, nn::Activation::kTanh, rng);
  for (int l = 0; l < net.layer_count(); ++l) {
    net.weights(l).setZero();
    net.biases(l).setZero();
  }
  net.biases(net.layer_count() - 1).setConstant(value);
  return net;
}

Transition make_transition(int dim, int action, double reward, double fill) {
  Transition t;
  t.state = Eigen::VectorXd::Constant(dim, fill);
  t.next_state = Eigen::VectorXd::Constant(dim, fill + 0.5);
  t.action = action;
  t.reward = reward;
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("replay buffer overwrites FIFO") {
  ReplayBuffer buffer(5);
  CHECK(buffer.capacity() == 5);
  for (int i = 0; i < 8; ++i) {
    buffer.push(make_transition(2, 0, static_cast<double>(i), 0.0));
  }
  CHECK(buffer.size() == 5);
  // Newest first: 7, 6, 5, 4, 3. The oldest three are gone.
  for (int age = 0; age < 5; ++age) {
    CHECK(buffer.nth_newest(static_cast<std::size_t>(age)).reward ==
          doctest::Approx(7.0 - age));
  }
  CHECK_THROWS_AS(buffer.nth_newest(5), std::out_of_range);

  Rng rng(1);
  const auto sample = buffer.sample(64, rng);
  CHECK(sample.size() == 64);
  for (const auto* t : sample) {
    CHECK(t->reward >= 3.0);
    CHECK(t->reward <= 7.0);
  }
}

TEST_CASE("q_all_actions equals explicit one-hot evaluation") {
  Rng rng(2);
  const int dim = 7;
  const int actions = 5;
  nn::Mlp critic({dim + actions, 16, 16, 1}, nn::Activation::kTanh, rng);
  Eigen::MatrixXd states(dim, 3);
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < dim; ++r) states(r, c) = rng.uniform(-2.0, 2.0);
  }
  const Eigen::MatrixXd q = rl::q_all_actions(critic, states, actions);
  REQUIRE(q.rows() == actions);
  REQUIRE(q.cols() == 3);
  for (int a = 0; a < actions; ++a) {
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd input = Eigen::VectorXd::Zero(dim + actions);
      input.head(dim) = states.col(c);
      input[dim + a] = 1.0;
      CHECK(q(a, c) == doctest::Approx(critic.forward(input)[0]).epsilon(1e-12));
    }
  }
}

TEST_CASE("bellman targets") {
  Rng rng(3);
  const int dim = 4;
  const int actions = 3;
  diffusion::DiffusionActor target_actor(actions, dim, {8}, 4,
                                         diffusion::NoiseSchedule::linear(2, 1e-3, 1e-2), rng);

  Batch batch;
  batch.states = Eigen::MatrixXd::Zero(dim, 2);
  batch.next_states = Eigen::MatrixXd::Constant(dim, 2, 0.3);
  batch.actions = {0, 1};
  batch.rewards.resize(2);
  batch.rewards << 1.0, 2.0;

  SUBCASE("gamma 0 reduces to the reward") {
    TwinCritics critics(dim, actions, {8}, rng);
    Rng noise(4);
    const Eigen::VectorXd y = rl::bellman_target(batch, critics, target_actor, 0.0, noise);
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(2.0));
  }

  SUBCASE("constant identical critics: y = r + gamma * Q") {
    TwinCritics critics;
    critics.q1 = constant_critic(dim + actions, 3.0, rng);
    critics.q2 = constant_critic(dim + actions, 3.0, rng);
    Rng noise(5);
    const Eigen::VectorXd y = rl::bellman_target(batch, critics, target_actor, 0.5, noise);
    // The policy expectation of a constant is that constant.
    CHECK(y[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(3.5).epsilon(1e-12));
  }

  SUBCASE("the twin minimum picks the smaller critic") {
    TwinCritics critics;
    critics.q1 = constant_critic(dim + actions, 10.0, rng);
    critics.q2 = constant_critic(dim + actions, 4.0, rng);
    Rng noise(6);
    const Eigen::VectorXd y = rl::bellman_target(batch, critics, target_actor, 1.0 - 1e-9, noise);
    CHECK(y[0] == doctest::Approx(1.0 + 4.0).epsilon(1e-6));
  }
}

TEST_CASE("critic updates") {
  Rng rng(7);
  const int dim = 4;
  const int actions = 3;

  Batch batch;
  batch.states = Eigen::MatrixXd::Constant(dim, 2, 0.2);
  batch.next_states = Eigen::MatrixXd::Zero(dim, 2);
  batch.actions = {1, 2};
  batch.rewards.resize(2);
  batch.rewards << 0.0, 0.0;

  SUBCASE("zero error means zero gradient and unchanged parameters") {
    nn::Mlp critic = constant_critic(dim + actions, 3.0, rng);
    const nn::Mlp before = critic;
    nn::AdamOptimizer opt(critic, 1e-3);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(2, 3.0);
    const double loss = rl::critic_update(critic, opt, batch, y);
    CHECK(loss == doctest::Approx(0.0));
    for (int l = 0; l < critic.layer_count(); ++l) {
      CHECK((critic.weights(l) - before.weights(l)).cwiseAbs().maxCoeff() == 0.0);
      CHECK((critic.biases(l) - before.biases(l)).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("one step on a quadratic shrinks the loss") {
    nn::Mlp critic({dim + actions, 1}, nn::Activation::kTanh, rng);  // linear model
    nn::AdamOptimizer opt(critic, 1e-3);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(2, 1.0);
    const double before = rl::critic_update(critic, opt, batch, y);
    const double after = rl::critic_update(critic, opt, batch, y);
    CHECK(before >= 0.0);
    CHECK(after < before);
  }

  SUBCASE("loss is non-increasing over 100 small steps on a fixed batch") {
    TwinCritics critics(dim, actions, {16, 16}, rng);
    nn::AdamOptimizer opt1(critics.q1, 1e-4);
    nn::AdamOptimizer opt2(critics.q2, 1e-4);
    Eigen::VectorXd y(2);
    y << 0.7, -0.4;
    double prev1 = 1e300;
    double prev2 = 1e300;
    for (int i = 0; i < 100; ++i) {
      const auto [l1, l2] = rl::critic_update(critics, opt1, opt2, batch, y);
      CHECK(l1 >= 0.0);
      CHECK(l2 >= 0.0);
      CHECK(l1 <= prev1 * (1.0 + 1e-9) + 1e-12);
      CHECK(l2 <= prev2 * (1.0 + 1e-9) + 1e-12);
      prev1 = l1;
      prev2 = l2;
    }
  }
}

TEST_CASE("actor updates") {
  Rng rng(8);
  const int dim = 3;

  SUBCASE("constant critics leave only the entropy term, which grows") {
    const int actions = 4;
    diffusion::DiffusionActor actor(actions, dim, {16}, 4,
                                    diffusion::NoiseSchedule::from_eta({1e-3}), rng);
    TwinCritics critics;
    critics.q1 = constant_critic(dim + actions, 2.0, rng);
    critics.q2 = constant_critic(dim + actions, 2.0, rng);
    nn::AdamOptimizer opt(actor.net(), 1e-2);

    Eigen::MatrixXd states = Eigen::MatrixXd::Constant(dim, 4, 0.5);
    const auto measure_entropy = [&] {
      Rng probe(99);
      const Eigen::VectorXd x0 = actor.denoise(Eigen::VectorXd(states.col(0)), probe);
      return diffusion::entropy(diffusion::action_distribution(x0));
    };

    const double before = measure_entropy();
    Rng noise(9);
    for (int i = 0; i < 200; ++i) {
      rl::actor_update(actor, opt, critics, states, 0.5, noise);
    }
    CHECK(measure_entropy() > before);
  }

  SUBCASE("with Q = [1, 0] and no entropy, the better action gains mass") {
    const int actions = 2;
    diffusion::DiffusionActor actor(actions, dim, {16}, 4,
                                    diffusion::NoiseSchedule::from_eta({1e-3}), rng);
    // Linear critics reading the action one-hot directly: Q(s, a0) = 1,
    // Q(s, a1) = 0 for every state.
    TwinCritics critics;
    Rng crng(10);
    critics.q1 = nn::Mlp({dim + actions, 1}, nn::Activation::kTanh, crng);
    critics.q1.weights(0).setZero();
    critics.q1.biases(0).setZero();
    critics.q1.weights(0)(0, dim) = 1.0;
    critics.q2 = critics.q1;

    nn::AdamOptimizer opt(actor.net(), 1e-2);
    Eigen::MatrixXd states = Eigen::MatrixXd::Constant(dim, 4, -0.3);
    const auto mass_on_zero = [&] {
      Rng probe(42);
      const Eigen::VectorXd x0 = actor.denoise(Eigen::VectorXd(states.col(0)), probe);
      return diffusion::action_distribution(x0)[0];
    };

    const double before = mass_on_zero();
    Rng noise(11);
    for (int i = 0; i < 100; ++i) {
      rl::actor_update(actor, opt, critics, states, 0.0, noise);
    }
    CHECK(mass_on_zero() > before);
  }
}

TEST_CASE("training loop gates updates on the warmup buffer") {
  env::ScenarioConfig scenario;
  scenario.num_bs = 3;
  TrainerConfig cfg;
  cfg.episodes = 1;
  cfg.rounds_per_episode = 1;
  cfg.batch_size = 8;
  cfg.warmup_transitions = 100;
  cfg.hidden = {8};
  cfg.seed = 5;

  rl::Trainer trainer(scenario, cfg);
  const rl::TrainResult result = trainer.run();
  REQUIRE(result.log.size() == 1);
  CHECK_FALSE(result.log[0].updated);
  CHECK(result.log[0].critic1_loss == 0.0);
  CHECK(result.reward_scale == 1.0);  // never recalibrated before updates begin
}

TEST_CASE("training is reproducible under a fixed seed") {
  env::ScenarioConfig scenario;
  scenario.num_bs = 3;
  TrainerConfig cfg;
  cfg.episodes = 2;
  cfg.rounds_per_episode = 25;
  cfg.batch_size = 8;
  cfg.warmup_transitions = 10;
  cfg.buffer_capacity = 200;
  cfg.hidden = {8, 8};
  cfg.diffusion_steps = 2;
  cfg.seed = 31;

  const rl::TrainResult a = rl::Trainer(scenario, cfg).run();
  const rl::TrainResult b = rl::Trainer(scenario, cfg).run();
  REQUIRE(a.log.size() == b.log.size());
  bool any_update = false;
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].reward == b.log[i].reward);
    CHECK(a.log[i].actor_objective == b.log[i].actor_objective);
    CHECK(a.log[i].critic1_loss == b.log[i].critic1_loss);
    CHECK(a.log[i].critic2_loss == b.log[i].critic2_loss);
    CHECK(a.log[i].rho == b.log[i].rho);
    any_update = any_update || a.log[i].updated;
  }
  CHECK(any_update);
  // The learned parameters agree bitwise too.
  for (int l = 0; l < a.actor.net().layer_count(); ++l) {
    CHECK((a.actor.net().weights(l) - b.actor.net().weights(l)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("random agent is uniform over the actions") {
  auto agent = rl::make_random_agent(4);
  env::MarketState state;  // the random agent ignores it
  Rng rng(12);
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    ++counts[static_cast<std::size_t>(agent->act(state, rng))];
  }
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (const int c : counts) {
    CHECK(std::abs(c - n * 0.25) <= 3.0 * sigma);
  }
}

TEST_CASE("greedy agent maximizes the bid-measured surplus") {
  const int actions = 20;
  env::MarketState state;
  state.features = Eigen::VectorXd::Zero(6 * 10 + 1);
  state.bids = Eigen::VectorXd::Zero(10);
  state.mask = Eigen::VectorXd::Zero(10);
  state.bids[0] = 2.0;  // UAV contracted payment
  state.bids[1] = 4.0;
  state.bids[2] = 1.0;
  state.mask[0] = state.mask[1] = state.mask[2] = 1.0;

  Rng rng(13);

  SUBCASE("a dominant BS bid pulls rho down") {
    // zeta * b0 = 2 < 4: greedy wants BS 1 to win, which needs rho < 2.
    auto greedy = rl::make_greedy_agent(actions, 1.0);
    const int action = greedy->act(state, rng);
    const double rho = env::action_to_rho(action, actions);
    CHECK(4.0 > rho * 2.0);

    // It should pick exactly the first action among the maximizers.
    int expected = 0;
    double best = -1.0;
    for (int a = 0; a < actions; ++a) {
      const double r = env::action_to_rho(a, actions);
      const double value = 4.0 > r * 2.0 ? 4.0 : 2.0;
      if (value > best) {
        best = value;
        expected = a;
      }
    }
    CHECK(action == expected);
  }

  SUBCASE("a dominant UAV value pushes rho up until the UAV wins") {
    // zeta = 5: the UAV's weighted value 10 beats every BS bid, so greedy
    // picks a rho large enough that no BS clears the threshold.
    auto greedy = rl::make_greedy_agent(actions, 5.0);
    const int action = greedy->act(state, rng);
    const double rho = env::action_to_rho(action, actions);
    CHECK(4.0 <= rho * 2.0);  // BS 1 no longer clears, the UAV wins
  }
}

TEST_CASE("ppo with zero advantages leaves the policy unchanged") {
  rl::PpoConfig cfg;
  cfg.rollout_length = 8;
  cfg.minibatch = 4;
  cfg.seed = 3;
  rl::PpoAgent agent(6, 4, cfg);

  Rng rng(14);
  rl::PpoRollout rollout;
  rollout.states.resize(6, 8);
  for (int c = 0; c < 8; ++c) {
    for (int r = 0; r < 6; ++r) rollout.states(r, c) = rng.uniform(-1.0, 1.0);
  }
  rollout.actions = {0, 1, 2, 3, 0, 1, 2, 3};
  rollout.log_probs = Eigen::VectorXd::Constant(8, std::log(0.25));
  rollout.advantages = Eigen::VectorXd::Zero(8);
  rollout.returns = Eigen::VectorXd::Constant(8, 1.0);

  const nn::Mlp before = agent.policy_net();
  agent.update(rollout);
  for (int l = 0; l < before.layer_count(); ++l) {
    CHECK((agent.policy_net().weights(l) - before.weights(l)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((agent.policy_net().biases(l) - before.biases(l)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("ppo training runs and improves value estimates without diverging") {
  env::ScenarioConfig scenario;
  scenario.num_bs = 3;
  env::AuctionEnv environment(scenario, 1);
  rl::PpoConfig cfg;
  cfg.rollout_length = 64;
  cfg.minibatch = 16;
  cfg.seed = 4;
  rl::PpoAgent agent(environment.state_dimension(), environment.action_count(), cfg);
  long long steps_seen = 0;
  agent.train(environment, 200, 50, [&](const rl::StepLog& log) {
    ++steps_seen;
    CHECK(std::isfinite(log.reward));
  });
  CHECK(steps_seen == 200);
}

TEST_SUITE_END();
