#pragma once

// Potential networks, written once over the scalar type so the same code
// evaluates plain doubles and records differentiable graphs.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsestein/diff/expr.hpp"
#include "sparsestein/error.hpp"
#include "sparsestein/models/param_vector.hpp"

namespace sparsestein::models {

/// Tied-weight, bias-free input-convex network:
///   h1 = softplus(W1 x),  hk = softplus(Wk (x + h_{k-1})),  y = WN (x + h_{N-1}).
/// `x + h` lifts x into the hidden width by zero padding.
struct IcnnSpec {
  std::size_t inputs = 3;
  std::vector<std::size_t> hidden{30, 30};
  bool constrain_first_layer = false;

  std::size_t num_layers() const { return hidden.size() + 1; }
  std::size_t fan_in(std::size_t layer) const { return layer == 0 ? inputs : hidden[layer - 1]; }
  std::size_t fan_out(std::size_t layer) const { return layer < hidden.size() ? hidden[layer] : 1; }

  std::size_t layer_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += fan_in(l) * fan_out(l);
    return off;
  }

  std::size_t num_params() const { return layer_offset(num_layers()); }

  /// True for weights held non-negative: every layer after the first, and the
  /// first too when `constrain_first_layer` is set.
  std::vector<bool> constrained_mask() const {
    std::vector<bool> mask(num_params(), true);
    if (!constrain_first_layer && !hidden.empty())
      for (std::size_t i = 0; i < fan_in(0) * fan_out(0); ++i) mask[i] = false;
    return mask;
  }
};

/// Plain feed-forward network with biases; softplus on hidden layers, linear output.
/// Per layer the layout is W (row-major, out x in) followed by b.
struct MlpSpec {
  std::size_t inputs = 4;
  std::vector<std::size_t> hidden{4, 16, 4};

  std::size_t num_layers() const { return hidden.size() + 1; }
  std::size_t fan_in(std::size_t layer) const { return layer == 0 ? inputs : hidden[layer - 1]; }
  std::size_t fan_out(std::size_t layer) const { return layer < hidden.size() ? hidden[layer] : 1; }

  std::size_t layer_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += (fan_in(l) + 1) * fan_out(l);
    return off;
  }

  std::size_t num_params() const { return layer_offset(num_layers()); }
};

template <class T>
T icnn_forward(const IcnnSpec& spec, std::span<const T> x, std::span<const T> theta) {
  using diff::softplus;
  if (x.size() != spec.inputs) throw std::invalid_argument("icnn: wrong input width");
  if (theta.size() != spec.num_params()) throw std::invalid_argument("icnn: wrong parameter count");

  auto lifted = [&](std::size_t j) { return j < x.size() ? x[j] : T(0.0); };

  std::vector<T> h;
  std::size_t off = 0;
  for (std::size_t layer = 0; layer < spec.num_layers(); ++layer) {
    const std::size_t in = spec.fan_in(layer);
    const std::size_t out = spec.fan_out(layer);
    std::vector<T> z(in);
    for (std::size_t k = 0; k < in; ++k) z[k] = layer == 0 ? x[k] : lifted(k) + h[k];
    std::vector<T> next(out, T(0.0));
    for (std::size_t j = 0; j < out; ++j) {
      T acc(0.0);
      for (std::size_t k = 0; k < in; ++k) acc += theta[off + j * in + k] * z[k];
      next[j] = acc;
    }
    off += in * out;
    if (layer + 1 == spec.num_layers()) return next[0];
    for (auto& v : next) v = softplus(v);
    h = std::move(next);
  }
  return T(0.0);  // unreachable: the output layer always returns
}

template <class T>
T mlp_forward(const MlpSpec& spec, std::span<const T> x, std::span<const T> theta) {
  using diff::softplus;
  if (x.size() != spec.inputs) throw std::invalid_argument("mlp: wrong input width");
  if (theta.size() != spec.num_params()) throw std::invalid_argument("mlp: wrong parameter count");
  std::vector<T> h(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t layer = 0; layer < spec.num_layers(); ++layer) {
    const std::size_t in = spec.fan_in(layer);
    const std::size_t out = spec.fan_out(layer);
    std::vector<T> next(out);
    for (std::size_t j = 0; j < out; ++j) {
      T acc(0.0);
      for (std::size_t k = 0; k < in; ++k) acc += theta[off + j * in + k] * h[k];
      next[j] = acc + theta[off + in * out + j];
    }
    off += (in + 1) * out;
    if (layer + 1 == spec.num_layers()) return next[0];
    for (auto& v : next) v = softplus(v);
    h = std::move(next);
  }
  return T(0.0);
}

/// Checked double-precision evaluation: constrained weights must be >= 0.
inline double icnn_forward(const IcnnSpec& spec, std::span<const double> x, const ParamVector& theta) {
  const auto values = theta.materialized();
  const auto mask = spec.constrained_mask();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (mask[i] && values[i] < 0.0)
      throw NegativeWeight("constrained weight " + std::to_string(i) + " is negative");
  return icnn_forward<double>(spec, x, values);
}

/// Replaces every constrained entry by max(0, value).
inline ParamVector clamp_nonneg(ParamVector theta, const IcnnSpec& spec) {
  const auto mask = spec.constrained_mask();
  if (mask.size() != theta.size()) throw std::invalid_argument("clamp: parameter count mismatch");
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (mask[i] && theta.values[i] < 0.0) theta.values[i] = 0.0;
  return theta;
}

/// In-place clamp on a vector paired with its constraint mask.
inline void clamp_nonneg(std::span<double> values, const std::vector<bool>& mask) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (mask[i] && values[i] < 0.0) values[i] = 0.0;
}

/// Random start: unconstrained first layer ~ N(0, 1/fan_in); constrained
/// layers ~ U(0, 2/fan_in) so hidden activations stay O(1).
inline ParamVector initialize(const IcnnSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(spec.num_params());
  const auto mask = spec.constrained_mask();
  for (std::size_t layer = 0; layer < spec.num_layers(); ++layer) {
    const double fan = static_cast<double>(spec.fan_in(layer));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(fan));
    std::uniform_real_distribution<double> uniform(0.0, 2.0 / fan);
    const std::size_t off = spec.layer_offset(layer);
    for (std::size_t i = off; i < spec.layer_offset(layer + 1); ++i) v[i] = mask[i] ? uniform(rng) : normal(rng);
  }
  return ParamVector(std::move(v));
}

inline ParamVector initialize(const MlpSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(spec.num_params(), 0.0);
  for (std::size_t layer = 0; layer < spec.num_layers(); ++layer) {
    const std::size_t in = spec.fan_in(layer);
    const std::size_t out = spec.fan_out(layer);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    const std::size_t off = spec.layer_offset(layer);
    for (std::size_t i = 0; i < in * out; ++i) v[off + i] = normal(rng);
  }
  return ParamVector(std::move(v));
}

}  // namespace sparsestein::models
