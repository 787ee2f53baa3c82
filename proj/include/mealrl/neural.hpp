#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "region.hpp"

namespace mealrl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1>;

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out

  int inputs() const noexcept { return static_cast<int>(weights.cols()); }
  int outputs() const noexcept { return static_cast<int>(weights.rows()); }
};

struct NetworkShape {
  int inputs = 1;
  std::vector<int> hidden{64, 128, 128, 64};
  int outputs = 1;
  bool dueling = false;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Dense value network: rectified hidden layers, linear output. With a
/// dueling head the last hidden layer feeds a scalar value stream and a
/// per-action advantage stream, combined as Q = V + A - mean(A).
class NetworkParams {
 public:
  NetworkParams() = default;

  NetworkParams(NetworkShape shape, std::uint64_t seed) : shape_(std::move(shape)) {
    allocate();
    Rng rng(seed);
    for (auto& layer : layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.inputs()));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = u(rng);
      layer.bias.setZero();
    }
  }

  /// Same shape, every parameter zero (gradient / moment buffers).
  static NetworkParams zeros_like(const NetworkParams& other) {
    NetworkParams p;
    p.shape_ = other.shape_;
    p.allocate();
    return p;
  }

  const NetworkShape& shape() const noexcept { return shape_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  int hidden_count() const noexcept { return static_cast<int>(shape_.hidden.size()); }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& l : layers_) {
      flat.insert(flat.end(), l.weights.data(), l.weights.data() + l.weights.size());
      flat.insert(flat.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return flat;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("unflatten: parameter count mismatch");
    std::size_t at = 0;
    for (auto& l : layers_) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), l.weights.size(), l.weights.data());
      at += static_cast<std::size_t>(l.weights.size());
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), l.bias.size(), l.bias.data());
      at += static_cast<std::size_t>(l.bias.size());
    }
  }

  /// this <- tau * other + (1 - tau) * this
  void blend_from(const NetworkParams& other, double tau) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].weights = tau * other.layers_[i].weights + (1.0 - tau) * layers_[i].weights;
      layers_[i].bias = tau * other.layers_[i].bias + (1.0 - tau) * layers_[i].bias;
    }
  }

  bool all_finite() const {
    for (const auto& l : layers_) {
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    if (!(a.shape_ == b.shape_)) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      if (a.layers_[i].weights != b.layers_[i].weights || a.layers_[i].bias != b.layers_[i].bias) return false;
    }
    return true;
  }

 private:
  void allocate() {
    if (shape_.inputs < 1 || shape_.outputs < 1) throw std::invalid_argument("network: empty input or output");
    layers_.clear();
    int prev = shape_.inputs;
    for (int h : shape_.hidden) {
      if (h < 1) throw std::invalid_argument("network: hidden sizes must be positive");
      layers_.push_back({Matrix::Zero(h, prev), Vector::Zero(h)});
      prev = h;
    }
    if (shape_.dueling) {
      layers_.push_back({Matrix::Zero(1, prev), Vector::Zero(1)});
      layers_.push_back({Matrix::Zero(shape_.outputs, prev), Vector::Zero(shape_.outputs)});
    } else {
      layers_.push_back({Matrix::Zero(shape_.outputs, prev), Vector::Zero(shape_.outputs)});
    }
  }

  NetworkShape shape_;
  std::vector<DenseLayer> layers_;
};

/// Intermediate values kept for backpropagation. Columns are samples.
struct ForwardCache {
  std::vector<Matrix> activations;  // [0] = input, then each hidden output
  std::vector<Matrix> pre_activations;
  Matrix q;
};

/// Batched forward pass; `inputs` is (features x batch).
inline Matrix forward(const NetworkParams& params, const Matrix& inputs, ForwardCache* cache = nullptr) {
  const auto& shape = params.shape();
  if (inputs.rows() != shape.inputs) {
    throw std::invalid_argument("forward: expected " + std::to_string(shape.inputs) + " features, got " +
                                std::to_string(inputs.rows()));
  }
  const auto& layers = params.layers();
  Matrix h = inputs;
  if (cache) {
    cache->activations.assign(1, inputs);
    cache->pre_activations.clear();
  }
  const int hidden = params.hidden_count();
  for (int l = 0; l < hidden; ++l) {
    const auto& layer = layers[static_cast<std::size_t>(l)];
    Matrix z = layer.weights * h;
    z.colwise() += layer.bias;
    h = z.cwiseMax(0.0);
    if (cache) {
      cache->pre_activations.push_back(std::move(z));
      cache->activations.push_back(h);
    }
  }
  Matrix q;
  if (shape.dueling) {
    const auto& value = layers[static_cast<std::size_t>(hidden)];
    const auto& adv = layers[static_cast<std::size_t>(hidden + 1)];
    Matrix v = value.weights * h;
    v.colwise() += value.bias;
    Matrix a = adv.weights * h;
    a.colwise() += adv.bias;
    const Eigen::RowVectorXd mean = a.colwise().mean();
    q = a;
    q.rowwise() += v.row(0) - mean;
  } else {
    const auto& out = layers[static_cast<std::size_t>(hidden)];
    q = out.weights * h;
    q.colwise() += out.bias;
  }
  if (cache) cache->q = q;
  return q;
}

inline Vector forward(const NetworkParams& params, std::span<const double> features) {
  Matrix x = Eigen::Map<const Matrix>(features.data(), static_cast<Eigen::Index>(features.size()), 1);
  return forward(params, x).col(0);
}

/// One training sample: input, taken action, regression target, IS weight.
struct TrainingSample {
  std::span<const double> features;
  int action = 0;
  double target = 0.0;
  double weight = 1.0;
};

struct BackwardResult {
  NetworkParams gradients;
  std::vector<double> td_errors;  // Q(s,a) - y per sample
  double loss = 0.0;
};

/// Gradient of L = (1/B) sum_i w_i * l(Q(s_i,a_i) - y_i) with l(e) = e^2,
/// or a Huber loss (threshold 1) when `huber` is set.
inline BackwardResult backward(const NetworkParams& params, std::span<const TrainingSample> batch,
                               bool huber = false) {
  if (batch.empty()) throw std::invalid_argument("backward: empty batch");
  const auto& shape = params.shape();
  const auto n = static_cast<Eigen::Index>(batch.size());
  Matrix x(shape.inputs, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = batch[static_cast<std::size_t>(i)];
    if (static_cast<int>(s.features.size()) != shape.inputs) throw std::invalid_argument("backward: feature size mismatch");
    if (s.action < 0 || s.action >= shape.outputs) throw std::invalid_argument("backward: action out of range");
    if (!std::isfinite(s.target) || !std::isfinite(s.weight)) throw std::invalid_argument("backward: non-finite target or weight");
    x.col(i) = Eigen::Map<const Vector>(s.features.data(), shape.inputs);
  }
  if (!x.allFinite()) throw std::invalid_argument("backward: non-finite features");

  ForwardCache cache;
  forward(params, x, &cache);

  BackwardResult out{NetworkParams::zeros_like(params), {}, 0.0};
  out.td_errors.resize(batch.size());
  Matrix dq = Matrix::Zero(shape.outputs, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = batch[static_cast<std::size_t>(i)];
    const double err = cache.q(s.action, i) - s.target;
    out.td_errors[static_cast<std::size_t>(i)] = err;
    double loss, slope;
    if (huber && std::abs(err) > 1.0) {
      loss = 2.0 * std::abs(err) - 1.0;
      slope = err > 0 ? 2.0 : -2.0;
    } else {
      loss = err * err;
      slope = 2.0 * err;
    }
    out.loss += s.weight * loss * inv_n;
    dq(s.action, i) = s.weight * slope * inv_n;
  }

  auto& grads = out.gradients.layers();
  const auto& layers = params.layers();
  const int hidden = params.hidden_count();
  const Matrix& top = cache.activations.back();
  Matrix dh;
  if (shape.dueling) {
    // Q_a = V + A_a - mean(A): dV = sum_a dQ_a, dA_a = dQ_a - mean_a(dQ)
    const Eigen::RowVectorXd dv = dq.colwise().sum();
    Matrix da = dq;
    da.rowwise() -= dv / static_cast<double>(shape.outputs);
    auto& gv = grads[static_cast<std::size_t>(hidden)];
    auto& ga = grads[static_cast<std::size_t>(hidden + 1)];
    gv.weights = dv * top.transpose();
    gv.bias = Vector::Constant(1, dv.sum());
    ga.weights = da * top.transpose();
    ga.bias = da.rowwise().sum();
    dh = layers[static_cast<std::size_t>(hidden)].weights.transpose() * dv +
         layers[static_cast<std::size_t>(hidden + 1)].weights.transpose() * da;
  } else {
    auto& g = grads[static_cast<std::size_t>(hidden)];
    g.weights = dq * top.transpose();
    g.bias = dq.rowwise().sum();
    dh = layers[static_cast<std::size_t>(hidden)].weights.transpose() * dq;
  }
  for (int l = hidden - 1; l >= 0; --l) {
    const auto idx = static_cast<std::size_t>(l);
    const Matrix dz = dh.cwiseProduct((cache.pre_activations[idx].array() > 0.0).cast<double>().matrix());
    grads[idx].weights = dz * cache.activations[idx].transpose();
    grads[idx].bias = dz.rowwise().sum();
    if (l > 0) dh = layers[idx].weights.transpose() * dz;
  }
  return out;
}

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam: per-parameter step sizes from running first/second moment estimates.
class AdamOptimizer {
 public:
  using Settings = AdamSettings;

  AdamOptimizer() = default;
  explicit AdamOptimizer(const NetworkParams& like, Settings settings = {})
      : settings_(settings), m_(NetworkParams::zeros_like(like)), v_(NetworkParams::zeros_like(like)) {}

  void step(NetworkParams& params, const NetworkParams& gradients, double step_size) {
    ++t_;
    const double c1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
    auto& layers = params.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      update(layers[i].weights, gradients.layers()[i].weights, m_.layers()[i].weights, v_.layers()[i].weights,
             step_size, c1, c2);
      update(layers[i].bias, gradients.layers()[i].bias, m_.layers()[i].bias, v_.layers()[i].bias, step_size, c1,
             c2);
    }
  }

  long long steps() const noexcept { return t_; }

 private:
  template <typename Param>
  void update(Param& p, const Param& g, Param& m, Param& v, double step_size, double c1, double c2) const {
    m = settings_.beta1 * m + (1.0 - settings_.beta1) * g;
    v = settings_.beta2 * v + (1.0 - settings_.beta2) * g.cwiseAbs2();
    p.array() -= step_size * (m.array() / c1) / ((v.array() / c2).sqrt() + settings_.epsilon);
  }

  Settings settings_;
  NetworkParams m_;
  NetworkParams v_;
  long long t_ = 0;
};

/// Raw little-endian doubles, shape implied by the caller.
inline void write_parameters(std::ostream& out, const NetworkParams& params) {
  const auto flat = params.flatten();
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

inline void read_parameters(std::istream& in, NetworkParams& params) {
  std::vector<double> flat(params.parameter_count());
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(flat.size() * sizeof(double))) {
    throw ConfigError("checkpoint: truncated parameter block");
  }
  params.unflatten(flat);
}

}  // namespace mealrl
