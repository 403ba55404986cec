#pragma once

// Small dense feed-forward networks with batched reverse-mode gradients and
// Adam. Samples are stored column-wise: a batch of B inputs of width n is an
// n x B matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdnomad/error.hpp"
#include "mdnomad/random.hpp"

namespace mdnomad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kTanh, kRelu };

inline std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + s + "' (expected tanh or relu)");
}

/// Per-layer weight and bias arrays. Used for parameters, gradients and
/// optimiser moments alike.
struct LayerArrays {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static LayerArrays zeros_like(const LayerArrays& other) {
    LayerArrays z;
    for (const auto& w : other.weights) z.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const auto& b : other.biases) z.biases.push_back(Vector::Zero(b.size()));
    return z;
  }

  std::size_t layer_count() const { return weights.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) n += weights[k].size() + biases[k].size();
    return n;
  }

  void set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }

  LayerArrays& operator+=(const LayerArrays& o) {
    for (std::size_t k = 0; k < weights.size(); ++k) {
      weights[k] += o.weights[k];
      biases[k] += o.biases[k];
    }
    return *this;
  }
};

using Gradients = LayerArrays;

struct NetworkParams {
  std::vector<int> layer_sizes;
  Activation hidden_activation = Activation::kTanh;
  LayerArrays arrays;

  int input_width() const { return layer_sizes.front(); }
  int output_width() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return arrays.weights.size(); }
  std::vector<Matrix>& weights() { return arrays.weights; }
  const std::vector<Matrix>& weights() const { return arrays.weights; }
  std::vector<Vector>& biases() { return arrays.biases; }
  const std::vector<Vector>& biases() const { return arrays.biases; }
};

namespace detail {

inline void check_layer_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw ConfigError("network needs at least two layer sizes");
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] <= 0) throw ConfigError("layer_sizes[" + std::to_string(k) + "] must be positive");
  }
}

// tanh through the vectorised exp; saturates cleanly to +-1.
inline void apply_tanh(Matrix& z) { z = (1.0 - 2.0 / (1.0 + (2.0 * z.array()).exp())).matrix(); }

inline void apply_activation(Matrix& z, Activation a) {
  if (a == Activation::kTanh) {
    apply_tanh(z);
  } else {
    z = z.cwiseMax(0.0);
  }
}

// Derivative of the activation expressed through its output.
inline void scale_by_activation_derivative(Matrix& grad, const Matrix& activated, Activation a) {
  if (a == Activation::kTanh) {
    grad.array() *= 1.0 - activated.array().square();
  } else {
    grad.array() *= (activated.array() > 0.0).cast<double>();
  }
}

}  // namespace detail

/// Glorot-uniform weights, zero biases. Deterministic in `seed`.
inline NetworkParams network_init(const std::vector<int>& layer_sizes, Activation hidden_activation,
                                  std::uint64_t seed) {
  detail::check_layer_sizes(layer_sizes);
  NetworkParams p;
  p.layer_sizes = layer_sizes;
  p.hidden_activation = hidden_activation;
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const int fan_in = layer_sizes[k];
    const int fan_out = layer_sizes[k + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    // Row-major fill so the draw order does not depend on Eigen's storage.
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = uniform(rng, -limit, limit);
    p.arrays.weights.push_back(std::move(w));
    p.arrays.biases.push_back(Vector::Zero(fan_out));
  }
  return p;
}

/// Throws ShapeError unless the arrays match `layer_sizes`, ConfigError on
/// non-finite entries.
inline void validate(const NetworkParams& p) {
  detail::check_layer_sizes(p.layer_sizes);
  const std::size_t layers = p.layer_sizes.size() - 1;
  if (p.arrays.weights.size() != layers || p.arrays.biases.size() != layers)
    throw ShapeError("layer array count does not match layer_sizes");
  for (std::size_t k = 0; k < layers; ++k) {
    const auto& w = p.arrays.weights[k];
    if (w.rows() != p.layer_sizes[k + 1] || w.cols() != p.layer_sizes[k])
      throw ShapeError("weight " + std::to_string(k) + " has wrong shape");
    if (p.arrays.biases[k].size() != p.layer_sizes[k + 1])
      throw ShapeError("bias " + std::to_string(k) + " has wrong length");
    if (!w.allFinite() || !p.arrays.biases[k].allFinite())
      throw ConfigError("layer " + std::to_string(k) + " contains non-finite values");
  }
}

/// Activations of every layer, kept for the backward pass. activations[0] is
/// the input, activations.back() the (affine) output.
struct ForwardCache {
  std::vector<Matrix> activations;
};

inline Matrix network_forward_batch(const NetworkParams& p, const Matrix& inputs, ForwardCache* cache = nullptr) {
  if (inputs.rows() != p.input_width())
    throw ShapeError("input width " + std::to_string(inputs.rows()) + " != " + std::to_string(p.input_width()));
  const std::size_t layers = p.layer_count();
  if (cache) {
    cache->activations.resize(layers + 1);
    cache->activations[0] = inputs;
  }
  Matrix a = inputs;
  for (std::size_t k = 0; k < layers; ++k) {
    Matrix z = p.arrays.weights[k] * a;
    z.colwise() += p.arrays.biases[k];
    if (k + 1 < layers) detail::apply_activation(z, p.hidden_activation);
    a = std::move(z);
    if (cache) cache->activations[k + 1] = a;
  }
  return a;
}

inline Vector network_forward(const NetworkParams& p, std::span<const double> input) {
  if (static_cast<int>(input.size()) != p.input_width())
    throw ShapeError("input length " + std::to_string(input.size()) + " != " + std::to_string(p.input_width()));
  Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  return network_forward_batch(p, x);
}

struct BackwardResult {
  Gradients parameter_gradients;
  Matrix input_gradient;  // input_width x B
};

/// Reverse pass for the batch held in `cache`. `output_gradient` is dL/d(output)
/// for each column; parameter gradients are summed over the batch.
inline BackwardResult network_backward_batch(const NetworkParams& p, const ForwardCache& cache,
                                             const Matrix& output_gradient) {
  const std::size_t layers = p.layer_count();
  if (cache.activations.size() != layers + 1) throw ShapeError("forward cache does not match network");
  const Matrix& out = cache.activations.back();
  if (output_gradient.rows() != out.rows() || output_gradient.cols() != out.cols())
    throw ShapeError("output gradient shape does not match forward output");
  BackwardResult r;
  r.parameter_gradients.weights.resize(layers);
  r.parameter_gradients.biases.resize(layers);
  Matrix delta = output_gradient;
  for (std::size_t k = layers; k-- > 0;) {
    const Matrix& a_in = cache.activations[k];
    r.parameter_gradients.weights[k].noalias() = delta * a_in.transpose();
    r.parameter_gradients.biases[k] = delta.rowwise().sum();
    Matrix prev = p.arrays.weights[k].transpose() * delta;
    if (k > 0) detail::scale_by_activation_derivative(prev, a_in, p.hidden_activation);
    delta = std::move(prev);
  }
  r.input_gradient = std::move(delta);
  return r;
}

/// Single-sample convenience wrapper: runs the forward pass itself.
inline BackwardResult network_backward(const NetworkParams& p, std::span<const double> input,
                                       std::span<const double> output_gradient) {
  if (static_cast<int>(input.size()) != p.input_width()) throw ShapeError("input length mismatch");
  if (static_cast<int>(output_gradient.size()) != p.output_width()) throw ShapeError("output gradient length mismatch");
  ForwardCache cache;
  Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  network_forward_batch(p, x, &cache);
  Matrix g = Eigen::Map<const Vector>(output_gradient.data(), static_cast<Eigen::Index>(output_gradient.size()));
  return network_backward_batch(p, cache, g);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  LayerArrays first_moment;
  LayerArrays second_moment;
  std::uint64_t step_count = 0;
  AdamHyper hyper;

  static AdamState for_params(const NetworkParams& p, AdamHyper h = {}) {
    AdamState s;
    s.first_moment = LayerArrays::zeros_like(p.arrays);
    s.second_moment = LayerArrays::zeros_like(p.arrays);
    s.hyper = h;
    return s;
  }
};

inline void check_adam_hyper(const AdamHyper& h) {
  if (!(h.learning_rate > 0.0) || !(h.epsilon > 0.0)) throw ConfigError("Adam learning_rate and epsilon must be positive");
  if (!(h.beta1 > 0.0 && h.beta1 < 1.0) || !(h.beta2 > 0.0 && h.beta2 < 1.0))
    throw ConfigError("Adam beta1, beta2 must lie in (0,1)");
}

/// One bias-corrected Adam step, in place. Throws DivergenceError naming the
/// first layer whose gradient is non-finite; nothing is modified in that case.
inline void adam_update(NetworkParams& params, const Gradients& grads, AdamState& state) {
  check_adam_hyper(state.hyper);
  const std::size_t layers = params.layer_count();
  if (grads.weights.size() != layers || state.first_moment.weights.size() != layers)
    throw ShapeError("gradient/moment layer count mismatch");
  for (std::size_t k = 0; k < layers; ++k) {
    if (grads.weights[k].rows() != params.arrays.weights[k].rows() ||
        grads.weights[k].cols() != params.arrays.weights[k].cols() ||
        grads.biases[k].size() != params.arrays.biases[k].size())
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(k));
    if (!grads.weights[k].allFinite() || !grads.biases[k].allFinite())
      throw DivergenceError("adam_update", static_cast<std::ptrdiff_t>(k), "non-finite gradient");
  }
  const auto& h = state.hyper;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  auto step = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
    param.array() -= h.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + h.epsilon);
  };
  for (std::size_t k = 0; k < layers; ++k) {
    step(params.arrays.weights[k], grads.weights[k], state.first_moment.weights[k], state.second_moment.weights[k]);
    step(params.arrays.biases[k], grads.biases[k], state.first_moment.biases[k], state.second_moment.biases[k]);
  }
}

// ---------------------------------------------------------------------------
// Output transforms

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// d softplus / dx.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.size());
  if (v.empty()) return out;
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

}  // namespace mdnomad
