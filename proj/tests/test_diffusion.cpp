#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dmsb/diffusion.hpp"

using namespace dmsb;
using diffusion::DiffusionActor;
using diffusion::NoiseSchedule;

namespace {

// Denoiser that always outputs `c`: zero weights, constant output bias.
DiffusionActor constant_actor(int actions, int state_dim, double c, NoiseSchedule schedule,
                              Rng& rng) {
  DiffusionActor actor(actions, state_dim, {8}, 4, std::move(schedule), rng);
  nn::Mlp& net = actor.net();
  for (int l = 0; l < net.layer_count(); ++l) {
    net.weights(l).setZero();
    net.biases(l).setZero();
  }
  net.biases(net.layer_count() - 1).setConstant(c);
  return actor;
}

}  // namespace

TEST_SUITE_BEGIN("diffusion");

TEST_CASE("schedule construction and closed form") {
  const auto schedule = NoiseSchedule::linear(5, 1e-4, 2e-2);
  CHECK(schedule.steps() == 5);
  double prod = 1.0;
  for (int k = 1; k <= 5; ++k) {
    const double eta = schedule.eta[static_cast<std::size_t>(k - 1)];
    CHECK(eta > 0.0);
    CHECK(eta < 1.0);
    prod *= 1.0 - eta;
    CHECK(schedule.alpha_bar[static_cast<std::size_t>(k - 1)] ==
          doctest::Approx(prod).epsilon(1e-15));
    CHECK(schedule.mean_scale(k) == doctest::Approx(std::sqrt(prod)).epsilon(1e-15));
    CHECK(schedule.variance(k) == doctest::Approx(1.0 - prod).epsilon(1e-15));
  }
  // Posterior choice puts zero variance on the final reverse step.
  CHECK(schedule.sigma[0] == 0.0);
  CHECK(schedule.sigma[1] > 0.0);

  CHECK_THROWS_AS(NoiseSchedule::from_eta({0.5, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule::from_eta({}), std::invalid_argument);
  CHECK_THROWS_AS(schedule.mean_scale(0), std::domain_error);
  CHECK_THROWS_AS(schedule.variance(6), std::domain_error);
}

TEST_CASE("forward noising") {
  Rng rng(11);

  SUBCASE("vanishing noise keeps the input") {
    // eta -> 0 limit: build the schedule struct directly with eta = 1e-300.
    NoiseSchedule s = NoiseSchedule::from_eta({1e-300, 1e-300, 1e-300});
    Eigen::VectorXd x0(3);
    x0 << 1.0, -2.0, 0.5;
    const Eigen::VectorXd xk = diffusion::forward_noise(x0, 3, s, rng);
    CHECK((xk - x0).cwiseAbs().maxCoeff() < 1e-140);
  }

  SUBCASE("step index is range-checked") {
    const auto s = NoiseSchedule::linear(4, 1e-3, 1e-2);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(diffusion::forward_noise(x0, 0, s, rng), std::domain_error);
    CHECK_THROWS_AS(diffusion::forward_noise(x0, 5, s, rng), std::domain_error);
  }

  SUBCASE("zero input: Monte-Carlo variance matches the closed form within 2%") {
    const auto s = NoiseSchedule::linear(5, 1e-2, 0.3);  // visible noise for the MC check
    const int dim = 20;
    const int vectors = 5000;  // 100k scalar samples
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dim);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < vectors; ++i) {
      const Eigen::VectorXd xk = diffusion::forward_noise(x0, 5, s, rng);
      sum += xk.sum();
      sum_sq += xk.squaredNorm();
    }
    const double n = static_cast<double>(vectors * dim);
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == doctest::Approx(s.variance(5)).epsilon(0.02));
  }

  SUBCASE("iterative chain matches the closed-form moments at every step") {
    const auto s = NoiseSchedule::linear(4, 0.05, 0.4);
    Eigen::VectorXd x0(1);
    x0 << 2.0;
    for (int k = 1; k <= 4; ++k) {
      double sum = 0.0;
      double sum_sq = 0.0;
      const int n = 40000;
      for (int i = 0; i < n; ++i) {
        const double x = diffusion::forward_noise(x0, k, s, rng)[0];
        sum += x;
        sum_sq += x * x;
      }
      const double mean = sum / n;
      const double var = sum_sq / n - mean * mean;
      CHECK(mean == doctest::Approx(s.mean_scale(k) * 2.0).epsilon(0.03));
      CHECK(var == doctest::Approx(s.variance(k)).epsilon(0.05));
    }
  }
}

TEST_CASE("reverse denoising") {
  Rng init(12);

  SUBCASE("one deterministic step reproduces the constant mean") {
    // K = 1 has sigma_1 = 0, so x0 is exactly the denoiser output.
    auto actor = constant_actor(3, 2, 1.25, NoiseSchedule::from_eta({0.01}), init);
    Rng rng(13);
    Eigen::VectorXd state = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd x0 = actor.denoise(state, rng);
    CHECK((x0.array() - 1.25).abs().maxCoeff() == 0.0);
  }

  SUBCASE("same seed, same state: identical output") {
    DiffusionActor actor(4, 3, {16, 16}, 4, NoiseSchedule::linear(5, 1e-4, 2e-2), init);
    Eigen::VectorXd state(3);
    state << 0.5, -1.0, 2.0;
    Rng r1(99);
    Rng r2(99);
    CHECK((actor.denoise(state, r1) - actor.denoise(state, r2)).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("untrained actors emit finite, bounded logits") {
    DiffusionActor actor(6, 4, {32, 32}, 8, NoiseSchedule::linear(5, 1e-4, 2e-2), init);
    Rng rng(14);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      Eigen::VectorXd state(4);
      for (int j = 0; j < 4; ++j) state[j] = rng.normal();
      const Eigen::VectorXd x0 = actor.denoise(state, rng);
      REQUIRE(x0.allFinite());
      worst = std::max(worst, x0.cwiseAbs().maxCoeff());
    }
    // tanh hidden layers and Xavier-initialized output keep logits small.
    CHECK(worst < 1e3);
  }

  SUBCASE("batched and single-state denoising share the math") {
    DiffusionActor actor(5, 3, {16}, 4, NoiseSchedule::linear(3, 1e-3, 1e-2), init);
    Eigen::MatrixXd states(3, 4);
    states.setConstant(0.7);
    Rng rng(15);
    const Eigen::MatrixXd batch = actor.denoise(states, rng);
    CHECK(batch.rows() == 5);
    CHECK(batch.cols() == 4);
    CHECK(batch.allFinite());
  }
}

TEST_CASE("softmax projection") {
  SUBCASE("equal logits give the uniform distribution") {
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(8, 3.7);
    const Eigen::VectorXd p = diffusion::action_distribution(x0);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((p.array() - 0.125).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("a dominant logit takes all the mass") {
    Eigen::VectorXd x0(3);
    x0 << 500.0, 1.0, 2.0;
    const Eigen::VectorXd p = diffusion::action_distribution(x0);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[1] >= 0.0);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("two-logit closed form") {
    Eigen::VectorXd x0(2);
    x0 << 1.0, 0.0;
    const Eigen::VectorXd p = diffusion::action_distribution(x0);
    const double e = std::exp(1.0);
    CHECK(p[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
  }
  SUBCASE("overflow-scale logits are handled by max subtraction") {
    Eigen::VectorXd x0(2);
    x0 << 1e4, 9.9e3;
    const Eigen::VectorXd p = diffusion::action_distribution(x0);
    CHECK(p.allFinite());
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("non-finite logits are rejected") {
    Eigen::VectorXd x0(2);
    x0 << std::nan(""), 0.0;
    CHECK_THROWS_AS(diffusion::action_distribution(x0), std::domain_error);
  }
}

TEST_CASE("action sampling") {
  Rng rng(16);

  SUBCASE("a point mass always wins") {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(5);
    p[0] = 1.0;
    for (int i = 0; i < 100; ++i) {
      CHECK(diffusion::sample_action(p, rng, diffusion::SampleMode::kStochastic) == 0);
    }
  }
  SUBCASE("uniform frequencies stay within 3 sigma") {
    Eigen::VectorXd p = Eigen::VectorXd::Constant(4, 0.25);
    const int n = 100000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) {
      ++counts[static_cast<std::size_t>(
          diffusion::sample_action(p, rng, diffusion::SampleMode::kStochastic))];
    }
    const double sigma = std::sqrt(n * 0.25 * 0.75);
    for (const int c : counts) {
      CHECK(std::abs(c - n * 0.25) <= 3.0 * sigma);
    }
  }
  SUBCASE("greedy picks the argmax with lowest-index ties") {
    Eigen::VectorXd p(3);
    p << 0.2, 0.5, 0.3;
    CHECK(diffusion::sample_action(p, rng, diffusion::SampleMode::kGreedy) == 1);
    Eigen::VectorXd tie(4);
    tie << 0.1, 0.4, 0.4, 0.1;
    CHECK(diffusion::sample_action(tie, rng, diffusion::SampleMode::kGreedy) == 1);
  }
}

TEST_CASE("entropy") {
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(6);
  onehot[2] = 1.0;
  CHECK(diffusion::entropy(onehot) == 0.0);

  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(20, 1.0 / 20.0);
  CHECK(diffusion::entropy(uniform) == doctest::Approx(std::log(20.0)).epsilon(1e-12));

  Eigen::VectorXd half(2);
  half << 0.5, 0.5;
  CHECK(diffusion::entropy(half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Bounds hold for arbitrary distributions.
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd x(7);
    for (int j = 0; j < 7; ++j) x[j] = rng.uniform(-5.0, 5.0);
    const Eigen::VectorXd p = diffusion::action_distribution(x);
    const double h = diffusion::entropy(p);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(7.0) + 1e-12);
  }
}

TEST_CASE("zero-noise identity: the reverse pass is a deterministic map") {
  // A denoiser that echoes its x input exactly, with every sigma_k ~ 0,
  // makes x0 a function of (x_K, state) only. With relu hidden units the
  // identity is the split x = relu(x) - relu(-x).
  Rng init(18);
  DiffusionActor actor(3, 2, {8}, 4, NoiseSchedule::from_eta({1e-12, 1e-12, 1e-12}), init);
  nn::Mlp& net = actor.net();
  for (int l = 0; l < net.layer_count(); ++l) {
    net.weights(l).setZero();
    net.biases(l).setZero();
  }
  for (int i = 0; i < 3; ++i) {
    net.weights(0)(i, i) = 1.0;       // relu(x_i)
    net.weights(0)(3 + i, i) = -1.0;  // relu(-x_i)
    net.weights(1)(i, i) = 1.0;
    net.weights(1)(i, 3 + i) = -1.0;
  }

  Eigen::VectorXd state = Eigen::VectorXd::Zero(2);
  Rng r1(21);
  Rng r2(21);
  const Eigen::VectorXd a = actor.denoise(state, r1);
  const Eigen::VectorXd b = actor.denoise(state, r2);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.allFinite());

  // The echo net really is the identity: x0 stays within the tiny residual
  // noise of the x_K draw that the same seed produces.
  Rng r3(21);
  Eigen::VectorXd xk(3);
  for (int i = 0; i < 3; ++i) xk[i] = r3.normal();
  CHECK((a - xk).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("actor checkpoints round-trip") {
  Rng init(19);
  DiffusionActor actor(5, 4, {16, 16}, 8, NoiseSchedule::linear(4, 1e-4, 2e-2), init);
  std::stringstream buf;
  actor.save(buf);
  const DiffusionActor loaded = DiffusionActor::load(buf);
  CHECK(loaded.action_count() == actor.action_count());
  CHECK(loaded.state_dim() == actor.state_dim());
  CHECK(loaded.schedule().eta == actor.schedule().eta);

  Eigen::VectorXd state(4);
  state << 1.0, 2.0, 3.0, 4.0;
  Rng r1(22);
  Rng r2(22);
  Eigen::VectorXd a = actor.denoise(state, r1);
  Eigen::VectorXd b = loaded.denoise(state, r2);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_SUITE_END();
