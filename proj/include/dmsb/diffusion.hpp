#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <vector>

#include "dmsb/neural.hpp"
#include "dmsb/rng.hpp"

namespace dmsb::diffusion {

/// Per-step noise variances eta_k in (0,1) for k = 1..K, with the cumulative
/// products needed for closed-form noising. The reverse-step standard
/// deviation sigma_k follows the posterior-variance choice, which makes the
/// final step (k = 1) deterministic.
struct NoiseSchedule {
  std::vector<double> eta;        // eta[k-1] is the variance added at step k
  std::vector<double> alpha_bar;  // alpha_bar[k-1] = prod_{j<=k} (1 - eta_j)
  std::vector<double> sigma;      // reverse-step stddev per step

  int steps() const { return static_cast<int>(eta.size()); }

  /// Closed form for x_k given x_0: mean scale sqrt(alpha_bar_k), variance
  /// (1 - alpha_bar_k) per component.
  double mean_scale(int k) const;
  double variance(int k) const;

  static NoiseSchedule linear(int steps, double eta_min, double eta_max);
  static NoiseSchedule from_eta(std::vector<double> eta);
  void validate() const;
};

/// Applies Gaussian noising x_j = sqrt(1 - eta_j) x_{j-1} + sqrt(eta_j) eps
/// iteratively up to step k.
Eigen::VectorXd forward_noise(const Eigen::VectorXd& x0, int k, const NoiseSchedule& schedule,
                              Rng& rng);

/// Recorded reverse pass over one batch, for gradient propagation through
/// every denoising step.
struct DenoiseTrace {
  std::vector<nn::Tape> tapes;  // ordered k = K .. 1
};

/// The generative actor: a denoiser network mapping (x_k, step embedding,
/// state) to the next reverse-process mean, iterated from pure noise down
/// to the action logit vector x_0.
class DiffusionActor {
 public:
  DiffusionActor() = default;
  DiffusionActor(int action_count, int state_dim, const std::vector<int>& hidden,
                 int step_embed_dim, NoiseSchedule schedule, Rng& rng);

  int action_count() const { return action_count_; }
  int state_dim() const { return state_dim_; }
  int step_embed_dim() const { return step_embed_dim_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  nn::Mlp& net() { return denoiser_; }
  const nn::Mlp& net() const { return denoiser_; }

  /// Sinusoidal embedding of the denoising step index.
  Eigen::VectorXd step_embedding(int k) const;

  /// Reverse process for one state: draw x_K from a standard normal, then
  /// sample x_{k-1} ~ N(mean(x_k, k, s), sigma_k^2 I) down to x_0.
  Eigen::VectorXd denoise(const Eigen::VectorXd& state, Rng& rng) const;

  /// Batched reverse process; states are matrix columns. When `trace` is
  /// given, every step's forward pass is recorded for backprop.
  Eigen::MatrixXd denoise(const Eigen::MatrixXd& states, Rng& rng,
                          DenoiseTrace* trace = nullptr) const;

  /// Chains `x0_grad` back through all recorded denoising steps and returns
  /// the accumulated denoiser parameter gradients.
  nn::Gradients backprop(DenoiseTrace& trace, const Eigen::MatrixXd& x0_grad) const;

  void save(std::ostream& out) const;
  static DiffusionActor load(std::istream& in);

 private:
  nn::Mlp denoiser_;
  NoiseSchedule schedule_;
  int action_count_ = 0;
  int state_dim_ = 0;
  int step_embed_dim_ = 0;
};

/// Softmax projection of action logits onto the probability simplex.
Eigen::VectorXd action_distribution(const Eigen::VectorXd& x0);
Eigen::MatrixXd action_distribution(const Eigen::MatrixXd& x0);  // per column

enum class SampleMode { kStochastic, kGreedy };

/// Stochastic mode samples proportionally to the distribution; greedy mode
/// returns the argmax with lowest-index tie-break.
int sample_action(const Eigen::VectorXd& distribution, Rng& rng, SampleMode mode);

/// Shannon entropy in nats; 0 for a one-hot, log(n) for uniform.
double entropy(const Eigen::VectorXd& distribution);

}  // namespace dmsb::diffusion
