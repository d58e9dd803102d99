#pragma once

// Hard-concrete gates: stretched, clamped sigmoid relaxations of a binary
// on/off switch per parameter.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsestein/diff/evaluate.hpp"
#include "sparsestein/diff/expr.hpp"
#include "sparsestein/error.hpp"

namespace sparsestein::sparsify {

struct GateState {
  std::vector<double> log_alpha;
  double gamma = -0.1;
  double zeta = 1.1;
  double beta = 2.0 / 3.0;

  std::size_t size() const { return log_alpha.size(); }

  void validate() const {
    if (!(gamma < 0.0 && zeta > 1.0)) throw std::invalid_argument("gate stretch must satisfy gamma < 0 < 1 < zeta");
    if (!(beta > 0.0)) throw std::invalid_argument("gate temperature must be positive");
  }

  /// log alpha ~ N(0, sigma^2).
  static GateState initialize(std::size_t n, std::uint64_t seed, double sigma = 0.01) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    GateState g;
    g.log_alpha.resize(n);
    for (auto& v : g.log_alpha) v = normal(rng);
    return g;
  }
};

/// Uniform draw strictly inside (0, 1) from the top 53 bits of one engine output.
inline double open_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Scalar gate graphs for one set of hyperparameters. Each graph has the gate
/// log alpha as parameter 0; the sampled gate takes the uniform draw as input 0.
class GateGraphs {
 public:
  explicit GateGraphs(const GateState& g) {
    g.validate();
    {
      diff::GraphBuilder b;
      const diff::Ex u = b.input(0);
      const diff::Ex s = sigmoid((log(u) - log(1.0 - u) + b.param(0)) * (1.0 / g.beta));
      sample_ = b.finish({stretch_clamp(s, g)});
    }
    {
      diff::GraphBuilder b;
      b.input(0);
      test_ = b.finish({stretch_clamp(sigmoid(b.param(0)), g)});
    }
    {
      diff::GraphBuilder b;
      b.input(0);
      penalty_ = b.finish({sigmoid(b.param(0) - g.beta * std::log(-g.gamma / g.zeta))});
    }
  }

  const diff::Expr& sample() const { return sample_; }
  const diff::Expr& test() const { return test_; }
  const diff::Expr& penalty() const { return penalty_; }

 private:
  // The pass-through operand comes first so ties keep the gradient.
  static diff::Ex stretch_clamp(const diff::Ex& s, const GateState& g) {
    return min(max(s * (g.zeta - g.gamma) + g.gamma, 0.0), 1.0);
  }

  diff::Expr sample_, test_, penalty_;
};

namespace detail {
inline void eval_gates(const diff::Expr& e, std::span<const double> log_alpha, std::span<const double> u,
                       std::span<double> out, std::span<double> dout) {
  diff::Evaluator ev(e);
  double x = 0.5;
  for (std::size_t j = 0; j < log_alpha.size(); ++j) {
    if (!u.empty()) x = u[j];
    const std::array<double, 1> in{x};
    const std::array<double, 1> p{log_alpha[j]};
    ev.forward(in, p);
    out[j] = ev.output(0);
    if (!dout.empty()) {
      std::array<double, 1> g{0.0};
      ev.backward(std::array<double, 1>{1.0}, g);
      dout[j] = g[0];
    }
  }
}
}  // namespace detail

/// z = min(1, max(0, sigmoid((log u - log(1 - u) + log alpha) / beta) (zeta - gamma) + gamma)).
/// `dz` (optional) receives dz/dlog alpha.
inline std::vector<double> sample_gates(const GateState& g, std::span<const double> u, std::span<double> dz = {}) {
  if (u.size() != g.size()) throw std::invalid_argument("one uniform draw per gate required");
  for (double x : u)
    if (!(x > 0.0 && x < 1.0)) throw InvalidUniform("uniform draws must lie strictly inside (0, 1)");
  const GateGraphs graphs(g);
  std::vector<double> z(g.size());
  detail::eval_gates(graphs.sample(), g.log_alpha, u, z, dz);
  return z;
}

/// Test-time gates min(1, max(0, sigmoid(log alpha) (zeta - gamma) + gamma)).
inline std::vector<double> deterministic_gates(const GateState& g) {
  const GateGraphs graphs(g);
  std::vector<double> z(g.size());
  detail::eval_gates(graphs.test(), g.log_alpha, {}, z, {});
  return z;
}

/// Expected number of non-zero gates; `grad` (optional) receives d/dlog alpha.
inline double l0_penalty(const GateState& g, std::span<double> grad = {}) {
  const GateGraphs graphs(g);
  std::vector<double> v(g.size());
  detail::eval_gates(graphs.penalty(), g.log_alpha, {}, v, grad);
  double total = 0.0;
  for (double x : v) total += x;
  return total;
}

}  // namespace sparsestein::sparsify
