#include "dmsb/diffusion.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace dmsb::diffusion {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'S', 'B', 'A', 'C', 'T', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated actor checkpoint");
  return v;
}

void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

double read_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated actor checkpoint");
  return v;
}

}  // namespace

double NoiseSchedule::mean_scale(int k) const {
  if (k < 1 || k > steps()) throw std::domain_error("noise step out of range");
  return std::sqrt(alpha_bar[static_cast<std::size_t>(k - 1)]);
}

double NoiseSchedule::variance(int k) const {
  if (k < 1 || k > steps()) throw std::domain_error("noise step out of range");
  return 1.0 - alpha_bar[static_cast<std::size_t>(k - 1)];
}

NoiseSchedule NoiseSchedule::linear(int steps, double eta_min, double eta_max) {
  if (steps < 1) throw std::invalid_argument("schedule needs at least one step");
  std::vector<double> eta(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    eta[static_cast<std::size_t>(k)] =
        steps == 1 ? eta_min
                   : eta_min + (eta_max - eta_min) * static_cast<double>(k) /
                         static_cast<double>(steps - 1);
  }
  return from_eta(std::move(eta));
}

NoiseSchedule NoiseSchedule::from_eta(std::vector<double> eta) {
  NoiseSchedule s;
  s.eta = std::move(eta);
  s.validate();
  s.alpha_bar.resize(s.eta.size());
  s.sigma.resize(s.eta.size());
  double prod = 1.0;
  for (std::size_t k = 0; k < s.eta.size(); ++k) {
    const double prev = prod;  // alpha_bar_{k-1}, with alpha_bar_0 = 1
    prod *= 1.0 - s.eta[k];
    s.alpha_bar[k] = prod;
    // Posterior variance; zero at the first step since alpha_bar_0 = 1.
    s.sigma[k] = std::sqrt((1.0 - prev) / (1.0 - prod) * s.eta[k]);
  }
  return s;
}

void NoiseSchedule::validate() const {
  if (eta.empty()) throw std::invalid_argument("schedule needs at least one step");
  for (const double e : eta) {
    if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("eta values must lie in (0,1)");
  }
}

Eigen::VectorXd forward_noise(const Eigen::VectorXd& x0, int k, const NoiseSchedule& schedule,
                              Rng& rng) {
  if (k < 1 || k > schedule.steps()) throw std::domain_error("noise step out of range");
  Eigen::VectorXd x = x0;
  for (int j = 1; j <= k; ++j) {
    const double eta = schedule.eta[static_cast<std::size_t>(j - 1)];
    const double keep = std::sqrt(1.0 - eta);
    const double add = std::sqrt(eta);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x[i] = keep * x[i] + add * rng.normal();
    }
  }
  return x;
}

DiffusionActor::DiffusionActor(int action_count, int state_dim, const std::vector<int>& hidden,
                               int step_embed_dim, NoiseSchedule schedule, Rng& rng)
    : schedule_(std::move(schedule)),
      action_count_(action_count),
      state_dim_(state_dim),
      step_embed_dim_(step_embed_dim) {
  if (action_count < 2) throw std::invalid_argument("need at least two actions");
  if (state_dim < 1) throw std::invalid_argument("state dimension must be positive");
  if (step_embed_dim < 2 || step_embed_dim % 2 != 0) {
    throw std::invalid_argument("step embedding dimension must be even and at least 2");
  }
  schedule_.validate();
  std::vector<int> sizes;
  sizes.push_back(action_count + step_embed_dim + state_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_count);
  denoiser_ = nn::Mlp(sizes, nn::Activation::kRelu, rng);
}

Eigen::VectorXd DiffusionActor::step_embedding(int k) const {
  Eigen::VectorXd e(step_embed_dim_);
  const int half = step_embed_dim_ / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    e[2 * i] = std::sin(static_cast<double>(k) * freq);
    e[2 * i + 1] = std::cos(static_cast<double>(k) * freq);
  }
  return e;
}

Eigen::VectorXd DiffusionActor::denoise(const Eigen::VectorXd& state, Rng& rng) const {
  return denoise(Eigen::MatrixXd(state), rng).col(0);
}

Eigen::MatrixXd DiffusionActor::denoise(const Eigen::MatrixXd& states, Rng& rng,
                                        DenoiseTrace* trace) const {
  if (states.rows() != state_dim_) throw std::domain_error("state dimension mismatch");
  const Eigen::Index batch = states.cols();
  const int steps = schedule_.steps();
  if (trace != nullptr) {
    trace->tapes.clear();
    trace->tapes.resize(static_cast<std::size_t>(steps));
  }

  Eigen::MatrixXd x(action_count_, batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    for (Eigen::Index r = 0; r < action_count_; ++r) x(r, c) = rng.normal();
  }

  Eigen::MatrixXd input(denoiser_.input_size(), batch);
  input.bottomRows(state_dim_) = states;
  for (int k = steps; k >= 1; --k) {
    input.topRows(action_count_) = x;
    input.middleRows(action_count_, step_embed_dim_).colwise() = step_embedding(k);
    Eigen::MatrixXd mean =
        trace != nullptr
            ? denoiser_.forward(input, trace->tapes[static_cast<std::size_t>(steps - k)])
            : denoiser_.forward(input);
    if (!mean.allFinite()) {
      throw std::runtime_error("non-finite value in reverse diffusion at step " +
                               std::to_string(k));
    }
    const double sigma = schedule_.sigma[static_cast<std::size_t>(k - 1)];
    if (sigma > 0.0) {
      for (Eigen::Index c = 0; c < batch; ++c) {
        for (Eigen::Index r = 0; r < action_count_; ++r) {
          mean(r, c) += sigma * rng.normal();
        }
      }
    }
    x = std::move(mean);
  }
  return x;
}

nn::Gradients DiffusionActor::backprop(DenoiseTrace& trace, const Eigen::MatrixXd& x0_grad) const {
  if (trace.tapes.size() != static_cast<std::size_t>(schedule_.steps())) {
    throw std::invalid_argument("trace does not match the schedule");
  }
  nn::Gradients total = denoiser_.zero_gradients();
  Eigen::MatrixXd g = x0_grad;
  Eigen::MatrixXd input_grad;
  // The trace is ordered k = K..1; the additive noise does not affect the
  // gradient, so each step contributes through its mean network only.
  for (std::size_t i = trace.tapes.size(); i-- > 0;) {
    const bool innermost = i == 0;  // the tape for step k = K, whose input x_K is exogenous
    nn::Gradients step =
        denoiser_.backward(trace.tapes[i], g, innermost ? nullptr : &input_grad);
    total.accumulate(step);
    if (!innermost) g = input_grad.topRows(action_count_);
  }
  return total;
}

void DiffusionActor::save(std::ostream& out) const {
  out.write(kMagic, sizeof kMagic);
  write_u32(out, 1);
  write_u32(out, static_cast<std::uint32_t>(action_count_));
  write_u32(out, static_cast<std::uint32_t>(state_dim_));
  write_u32(out, static_cast<std::uint32_t>(step_embed_dim_));
  write_u32(out, static_cast<std::uint32_t>(schedule_.steps()));
  for (const double e : schedule_.eta) write_f64(out, e);
  denoiser_.save(out);
}

DiffusionActor DiffusionActor::load(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not an actor checkpoint");
  }
  if (read_u32(in) != 1) throw std::runtime_error("unsupported actor checkpoint version");
  DiffusionActor actor;
  actor.action_count_ = static_cast<int>(read_u32(in));
  actor.state_dim_ = static_cast<int>(read_u32(in));
  actor.step_embed_dim_ = static_cast<int>(read_u32(in));
  const int steps = static_cast<int>(read_u32(in));
  if (steps < 1 || steps > 10000) throw std::runtime_error("corrupt actor checkpoint");
  std::vector<double> eta(static_cast<std::size_t>(steps));
  for (auto& e : eta) e = read_f64(in);
  actor.schedule_ = NoiseSchedule::from_eta(std::move(eta));
  actor.denoiser_ = nn::Mlp::load(in);
  return actor;
}

Eigen::VectorXd action_distribution(const Eigen::VectorXd& x0) {
  return action_distribution(Eigen::MatrixXd(x0)).col(0);
}

Eigen::MatrixXd action_distribution(const Eigen::MatrixXd& x0) {
  if (!x0.allFinite()) throw std::domain_error("non-finite action logits");
  Eigen::MatrixXd p = x0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    const double m = p.col(c).maxCoeff();
    p.col(c) = (p.col(c).array() - m).exp();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

int sample_action(const Eigen::VectorXd& distribution, Rng& rng, SampleMode mode) {
  if (distribution.size() == 0) throw std::domain_error("empty distribution");
  if (mode == SampleMode::kGreedy) {
    Eigen::Index best = 0;
    distribution.maxCoeff(&best);
    return static_cast<int>(best);
  }
  const double u = rng.uniform() * distribution.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < distribution.size(); ++i) {
    acc += distribution[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(distribution.size() - 1);
}

double entropy(const Eigen::VectorXd& distribution) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < distribution.size(); ++i) {
    const double p = distribution[i];
    if (p < 0.0) throw std::domain_error("negative probability");
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace dmsb::diffusion
