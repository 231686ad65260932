#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dmsb/rng.hpp"

namespace dmsb::nn {

enum class Activation : std::uint8_t { kRelu = 0, kTanh = 1 };

struct LayerGrad {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

/// Parameter gradients with the same shapes as the network's layers.
struct Gradients {
  std::vector<LayerGrad> layers;

  void set_zero();
  void accumulate(const Gradients& other);
  double squared_norm() const;
};

/// Records one forward pass for use by Mlp::backward. Single-use.
class Tape {
 public:
  bool consumed() const { return consumed_; }

 private:
  friend class Mlp;
  Eigen::MatrixXd input_;
  std::vector<Eigen::MatrixXd> activations_;  // post-activation per hidden layer
  bool consumed_ = false;
};

/// Dense feed-forward network with a linear output layer. Batched calls
/// treat each matrix column as one sample. All math is double precision
/// and deterministic for fixed parameters and inputs.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Activation activation, Rng& rng);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation activation() const { return act_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int layer_count() const { return static_cast<int>(w_.size()); }
  std::size_t parameter_count() const;

  Eigen::MatrixXd& weights(int layer) { return w_[static_cast<std::size_t>(layer)]; }
  const Eigen::MatrixXd& weights(int layer) const { return w_[static_cast<std::size_t>(layer)]; }
  Eigen::VectorXd& biases(int layer) { return b_[static_cast<std::size_t>(layer)]; }
  const Eigen::VectorXd& biases(int layer) const { return b_[static_cast<std::size_t>(layer)]; }

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, Tape& tape) const;
  Eigen::MatrixXd forward(Eigen::MatrixXd&& inputs, Tape& tape) const;  // avoids the input copy

  /// Reverse pass for the recorded forward. `output_grad` holds one column
  /// of upstream gradient per sample; parameter gradients are summed over
  /// the batch. Optionally also yields the gradient w.r.t. the inputs.
  /// A tape can be consumed once; reuse is a usage error.
  Gradients backward(Tape& tape, const Eigen::MatrixXd& output_grad,
                     Eigen::MatrixXd* input_grad = nullptr) const;

  Gradients zero_gradients() const;

  /// Binary checkpoint: magic, format version, activation id, layer-size
  /// table, then row-major weight blocks each followed by the bias block.
  void save(std::ostream& out) const;
  static Mlp load(std::istream& in);

 private:
  Eigen::MatrixXd apply_activation(Eigen::MatrixXd z) const;
  void activate_in_place(Eigen::MatrixXd& z) const;
  Eigen::MatrixXd forward_taped(Tape& tape) const;

  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
  Activation act_ = Activation::kTanh;
};

/// Adam with the standard decay constants (0.9, 0.999, eps 1e-8).
class AdamOptimizer {
 public:
  AdamOptimizer(const Mlp& net, double learning_rate);

  double learning_rate() const { return lr_; }
  void step(Mlp& net, const Gradients& grads);

 private:
  double lr_;
  long long t_ = 0;
  std::vector<LayerGrad> m_;
  std::vector<LayerGrad> v_;
};

/// target <- rate * online + (1 - rate) * target, elementwise.
void soft_update(Mlp& target, const Mlp& online, double rate);

}  // namespace dmsb::nn
