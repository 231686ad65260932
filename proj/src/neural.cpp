#include "dmsb/neural.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dmsb::nn {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'S', 'B', 'N', 'E', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated network checkpoint");
  return v;
}

void write_doubles(std::ostream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::size_t n) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("truncated network checkpoint");
}

}  // namespace

void Gradients::set_zero() {
  for (auto& layer : layers) {
    layer.w.setZero();
    layer.b.setZero();
  }
}

void Gradients::accumulate(const Gradients& other) {
  if (layers.size() != other.layers.size()) {
    throw std::invalid_argument("gradient shape mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].w += other.layers[i].w;
    layers[i].b += other.layers[i].b;
  }
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& layer : layers) {
    s += layer.w.squaredNorm() + layer.b.squaredNorm();
  }
  return s;
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation, Rng& rng)
    : sizes_(std::move(layer_sizes)), act_(activation) {
  if (sizes_.size() < 2) throw std::invalid_argument("network needs at least two layer sizes");
  for (const int s : sizes_) {
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  }
  w_.reserve(sizes_.size() - 1);
  b_.reserve(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int c = 0; c < fan_in; ++c) {
      for (int r = 0; r < fan_out; ++r) {
        w(r, c) = rng.uniform(-limit, limit);
      }
    }
    w_.push_back(std::move(w));
    b_.push_back(Eigen::VectorXd::Zero(fan_out));
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l) {
    n += static_cast<std::size_t>(w_[static_cast<std::size_t>(l)].size()) +
         static_cast<std::size_t>(b_[static_cast<std::size_t>(l)].size());
  }
  return n;
}

Eigen::MatrixXd Mlp::apply_activation(Eigen::MatrixXd z) const {
  activate_in_place(z);
  return z;
}

void Mlp::activate_in_place(Eigen::MatrixXd& z) const {
  if (act_ == Activation::kRelu) {
    z = z.cwiseMax(0.0);
  } else {
    // tanh(x) = 1 - 2 / (exp(2x) + 1); exp vectorizes where std::tanh does not.
    z = (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input)).col(0);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_size()) throw std::domain_error("input dimension mismatch");
  Eigen::MatrixXd a = inputs;
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd z = (w_[static_cast<std::size_t>(l)] * a).colwise() +
                        b_[static_cast<std::size_t>(l)];
    a = l + 1 < layer_count() ? apply_activation(std::move(z)) : std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs, Tape& tape) const {
  tape.input_ = inputs;
  return forward_taped(tape);
}

Eigen::MatrixXd Mlp::forward(Eigen::MatrixXd&& inputs, Tape& tape) const {
  tape.input_ = std::move(inputs);
  return forward_taped(tape);
}

// Runs the layers over tape.input_, writing each hidden activation straight
// into the tape.
Eigen::MatrixXd Mlp::forward_taped(Tape& tape) const {
  if (tape.input_.rows() != input_size()) throw std::domain_error("input dimension mismatch");
  tape.activations_.resize(static_cast<std::size_t>(layer_count()) - 1);
  tape.consumed_ = false;
  const Eigen::MatrixXd* below = &tape.input_;
  for (int l = 0; l + 1 < layer_count(); ++l) {
    Eigen::MatrixXd& act = tape.activations_[static_cast<std::size_t>(l)];
    act.resize(w_[static_cast<std::size_t>(l)].rows(), below->cols());
    act.noalias() = w_[static_cast<std::size_t>(l)] * (*below);
    act.colwise() += b_[static_cast<std::size_t>(l)];
    activate_in_place(act);
    below = &act;
  }
  return (w_.back() * (*below)).colwise() + b_.back();
}

Gradients Mlp::backward(Tape& tape, const Eigen::MatrixXd& output_grad,
                        Eigen::MatrixXd* input_grad) const {
  if (tape.consumed_) throw std::logic_error("tape already consumed");
  if (tape.activations_.size() != static_cast<std::size_t>(layer_count()) - 1 ||
      tape.input_.rows() != input_size()) {
    throw std::invalid_argument("tape does not match this network");
  }
  if (output_grad.rows() != output_size() || output_grad.cols() != tape.input_.cols()) {
    throw std::invalid_argument("output gradient shape mismatch");
  }
  tape.consumed_ = true;

  Gradients grads = zero_gradients();
  Eigen::MatrixXd delta = output_grad;
  for (int l = layer_count() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& below =
        l == 0 ? tape.input_ : tape.activations_[static_cast<std::size_t>(l - 1)];
    grads.layers[static_cast<std::size_t>(l)].w.noalias() = delta * below.transpose();
    grads.layers[static_cast<std::size_t>(l)].b = delta.rowwise().sum();
    if (l == 0) {
      if (input_grad != nullptr) {
        input_grad->noalias() = w_[0].transpose() * delta;
      }
      break;
    }
    Eigen::MatrixXd back = w_[static_cast<std::size_t>(l)].transpose() * delta;
    const Eigen::MatrixXd& act = tape.activations_[static_cast<std::size_t>(l - 1)];
    if (act_ == Activation::kRelu) {
      delta = back.cwiseProduct((act.array() > 0.0).cast<double>().matrix());
    } else {
      delta = back.cwiseProduct((1.0 - act.array().square()).matrix());
    }
  }
  return grads;
}

Gradients Mlp::zero_gradients() const {
  Gradients grads;
  grads.layers.reserve(static_cast<std::size_t>(layer_count()));
  for (int l = 0; l < layer_count(); ++l) {
    grads.layers.push_back(
        {Eigen::MatrixXd::Zero(w_[static_cast<std::size_t>(l)].rows(),
                               w_[static_cast<std::size_t>(l)].cols()),
         Eigen::VectorXd::Zero(b_[static_cast<std::size_t>(l)].size())});
  }
  return grads;
}

void Mlp::save(std::ostream& out) const {
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(act_));
  write_u32(out, static_cast<std::uint32_t>(sizes_.size()));
  for (const int s : sizes_) write_u32(out, static_cast<std::uint32_t>(s));
  for (int l = 0; l < layer_count(); ++l) {
    const Eigen::MatrixXd& w = w_[static_cast<std::size_t>(l)];
    // Row-major parameter block, one row of the weight matrix at a time.
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double v = w(r, c);
        write_doubles(out, &v, 1);
      }
    }
    write_doubles(out, b_[static_cast<std::size_t>(l)].data(),
                  static_cast<std::size_t>(b_[static_cast<std::size_t>(l)].size()));
  }
  if (!out) throw std::runtime_error("failed to write network checkpoint");
}

Mlp Mlp::load(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a network checkpoint");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kFormatVersion) throw std::runtime_error("unsupported checkpoint version");
  const std::uint32_t act = read_u32(in);
  if (act > 1) throw std::runtime_error("unknown activation id in checkpoint");
  const std::uint32_t n_sizes = read_u32(in);
  if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error("corrupt layer-size table");

  Mlp net;
  net.act_ = static_cast<Activation>(act);
  net.sizes_.resize(n_sizes);
  for (auto& s : net.sizes_) {
    s = static_cast<int>(read_u32(in));
    if (s < 1) throw std::runtime_error("corrupt layer-size table");
  }
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
    Eigen::MatrixXd w(net.sizes_[l + 1], net.sizes_[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        read_doubles(in, &w(r, c), 1);
      }
    }
    Eigen::VectorXd b(net.sizes_[l + 1]);
    read_doubles(in, b.data(), static_cast<std::size_t>(b.size()));
    net.w_.push_back(std::move(w));
    net.b_.push_back(std::move(b));
  }
  return net;
}

AdamOptimizer::AdamOptimizer(const Mlp& net, double learning_rate) : lr_(learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  for (int l = 0; l < net.layer_count(); ++l) {
    m_.push_back({Eigen::MatrixXd::Zero(net.weights(l).rows(), net.weights(l).cols()),
                  Eigen::VectorXd::Zero(net.biases(l).size())});
    v_.push_back({Eigen::MatrixXd::Zero(net.weights(l).rows(), net.weights(l).cols()),
                  Eigen::VectorXd::Zero(net.biases(l).size())});
  }
}

void AdamOptimizer::step(Mlp& net, const Gradients& grads) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  if (grads.layers.size() != m_.size()) throw std::invalid_argument("gradient shape mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t l = 0; l < m_.size(); ++l) {
    const auto& gw = grads.layers[l].w;
    const auto& gb = grads.layers[l].b;
    m_[l].w = kBeta1 * m_[l].w + (1.0 - kBeta1) * gw;
    m_[l].b = kBeta1 * m_[l].b + (1.0 - kBeta1) * gb;
    v_[l].w = kBeta2 * v_[l].w + (1.0 - kBeta2) * gw.cwiseProduct(gw);
    v_[l].b = kBeta2 * v_[l].b + (1.0 - kBeta2) * gb.cwiseProduct(gb);
    net.weights(static_cast<int>(l)).array() -=
        lr_ * (m_[l].w.array() / bc1) / ((v_[l].w.array() / bc2).sqrt() + kEps);
    net.biases(static_cast<int>(l)).array() -=
        lr_ * (m_[l].b.array() / bc1) / ((v_[l].b.array() / bc2).sqrt() + kEps);
  }
}

void soft_update(Mlp& target, const Mlp& online, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("soft-update rate out of [0,1]");
  if (target.layer_sizes() != online.layer_sizes()) {
    throw std::invalid_argument("target/online architecture mismatch");
  }
  for (int l = 0; l < target.layer_count(); ++l) {
    target.weights(l) = rate * online.weights(l) + (1.0 - rate) * target.weights(l);
    target.biases(l) = rate * online.biases(l) + (1.0 - rate) * target.biases(l);
  }
}

}  // namespace dmsb::nn
