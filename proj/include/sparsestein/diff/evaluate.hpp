#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsestein/diff/expr.hpp"
#include "sparsestein/error.hpp"

namespace sparsestein::diff {

/// Value and directional derivative along one input leaf.
struct DualValue {
  double value = 0.0;
  double tangent = 0.0;
};

/// Gradient aligned index-for-index with a parameter vector.
using GradVector = std::vector<double>;

/// Scratch space for sweeps over one `Expr`. Not shared between threads; each
/// concurrent caller owns its evaluator while the graph itself is shared.
class Evaluator {
 public:
  explicit Evaluator(const Expr& expr) : expr_(&expr), values_(expr.size()), adjoints_(expr.size()) {}

  const Expr& expr() const { return *expr_; }

  void forward(std::span<const double> inputs, std::span<const double> params) {
    check_bindings(inputs, params);
    const Expr& e = *expr_;
    const std::size_t n = e.size();
    double* v = values_.data();
    for (std::size_t i = 0; i < n; ++i) {
      const std::int32_t a = e.lhs(i);
      const std::int32_t b = e.rhs(i);
      switch (e.op(i)) {
        case Op::Constant: v[i] = e.constant(i); break;
        case Op::Param: v[i] = params[static_cast<std::size_t>(e.constant(i))]; break;
        case Op::Input: v[i] = inputs[static_cast<std::size_t>(e.constant(i))]; break;
        case Op::Add: v[i] = v[a] + v[b]; break;
        case Op::Mul: v[i] = v[a] * v[b]; break;
        case Op::Neg: v[i] = -v[a]; break;
        case Op::Recip:
          if (v[a] == 0.0) throw DomainError("reciprocal of zero");
          v[i] = 1.0 / v[a];
          break;
        case Op::Exp: v[i] = std::exp(v[a]); break;
        case Op::Log:
          if (!(v[a] > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v[a]));
          v[i] = std::log(v[a]);
          break;
        case Op::Pow: {
          const double p = e.constant(i);
          if (v[a] < 0.0 && p != std::floor(p)) throw DomainError("non-integer power of negative value");
          if (v[a] == 0.0 && p < 0.0) throw DomainError("negative power of zero");
          v[i] = std::pow(v[a], p);
          break;
        }
        case Op::Min: v[i] = v[a] <= v[b] ? v[a] : v[b]; break;
        case Op::Max: v[i] = v[a] >= v[b] ? v[a] : v[b]; break;
        case Op::Softplus: v[i] = softplus(v[a]); break;
        case Op::Sigmoid: v[i] = sigmoid(v[a]); break;
        case Op::StepGe: v[i] = v[a] >= v[b] ? 1.0 : 0.0; break;
      }
    }
  }

  double output(std::size_t k) const { return values_[expr_->output(k)]; }
  double node_value(std::size_t i) const { return values_[i]; }

  /// Reverse sweep after `forward`. Adds d(sum_k seeds[k] * output_k)/d(param)
  /// into `param_grad`.
  void backward(std::span<const double> output_seeds, std::span<double> param_grad) {
    const Expr& e = *expr_;
    if (output_seeds.size() != e.num_outputs()) throw std::invalid_argument("one seed per output required");
    if (param_grad.size() < e.num_params()) throw std::invalid_argument("gradient buffer too short");
    std::fill(adjoints_.begin(), adjoints_.end(), 0.0);
    double* adj = adjoints_.data();
    const double* v = values_.data();
    std::size_t top = 0;
    for (std::size_t k = 0; k < output_seeds.size(); ++k) {
      adj[e.output(k)] += output_seeds[k];
      top = std::max(top, static_cast<std::size_t>(e.output(k)) + 1);
    }
    for (std::size_t ii = top; ii-- > 0;) {
      const double g = adj[ii];
      if (g == 0.0) continue;
      const std::int32_t a = e.lhs(ii);
      const std::int32_t b = e.rhs(ii);
      switch (e.op(ii)) {
        case Op::Constant:
        case Op::Input:
        case Op::StepGe:
          break;
        case Op::Param: param_grad[static_cast<std::size_t>(e.constant(ii))] += g; break;
        case Op::Add: adj[a] += g; adj[b] += g; break;
        case Op::Mul: adj[a] += g * v[b]; adj[b] += g * v[a]; break;
        case Op::Neg: adj[a] -= g; break;
        case Op::Recip: adj[a] -= g * v[ii] * v[ii]; break;
        case Op::Exp: adj[a] += g * v[ii]; break;
        case Op::Log: adj[a] += g / v[a]; break;
        case Op::Pow: {
          const double p = e.constant(ii);
          adj[a] += g * p * std::pow(v[a], p - 1.0);
          break;
        }
        case Op::Min: (v[a] <= v[b] ? adj[a] : adj[b]) += g; break;
        case Op::Max: (v[a] >= v[b] ? adj[a] : adj[b]) += g; break;
        case Op::Softplus: adj[a] += g * sigmoid(v[a]); break;
        case Op::Sigmoid: adj[a] += g * v[ii] * (1.0 - v[ii]); break;
      }
    }
  }

  /// Forward sweep carrying a tangent seeded at input leaf `direction`.
  DualValue forward_tangent(std::span<const double> inputs, std::span<const double> params,
                            std::size_t direction, std::size_t output_index = 0) {
    const Expr& e = *expr_;
    if (direction >= e.num_inputs()) throw std::out_of_range("direction is not a declared input leaf");
    forward(inputs, params);
    std::vector<double>& t = adjoints_;  // reused as tangent storage
    const double* v = values_.data();
    const std::size_t n = e.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::int32_t a = e.lhs(i);
      const std::int32_t b = e.rhs(i);
      switch (e.op(i)) {
        case Op::Constant:
        case Op::Param:
        case Op::StepGe: t[i] = 0.0; break;
        case Op::Input: t[i] = static_cast<std::size_t>(e.constant(i)) == direction ? 1.0 : 0.0; break;
        case Op::Add: t[i] = t[a] + t[b]; break;
        case Op::Mul: t[i] = t[a] * v[b] + v[a] * t[b]; break;
        case Op::Neg: t[i] = -t[a]; break;
        case Op::Recip: t[i] = -t[a] * v[i] * v[i]; break;
        case Op::Exp: t[i] = t[a] * v[i]; break;
        case Op::Log: t[i] = t[a] / v[a]; break;
        case Op::Pow: {
          const double p = e.constant(i);
          t[i] = t[a] == 0.0 ? 0.0 : t[a] * p * std::pow(v[a], p - 1.0);
          break;
        }
        case Op::Min: t[i] = v[a] <= v[b] ? t[a] : t[b]; break;
        case Op::Max: t[i] = v[a] >= v[b] ? t[a] : t[b]; break;
        case Op::Softplus: t[i] = t[a] * sigmoid(v[a]); break;
        case Op::Sigmoid: t[i] = t[a] * v[i] * (1.0 - v[i]); break;
      }
    }
    const std::int32_t out = e.output(output_index);
    return {v[out], t[out]};
  }

 private:
  void check_bindings(std::span<const double> inputs, std::span<const double> params) const {
    if (inputs.size() < expr_->num_inputs())
      throw UnboundLeaf("graph needs " + std::to_string(expr_->num_inputs()) + " inputs, got " +
                        std::to_string(inputs.size()));
    if (params.size() < expr_->num_params())
      throw UnboundLeaf("graph needs " + std::to_string(expr_->num_params()) + " parameters, got " +
                        std::to_string(params.size()));
  }

  const Expr* expr_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
};

/// Value of output 0.
inline double evaluate(const Expr& expr, std::span<const double> inputs, std::span<const double> params) {
  Evaluator ev(expr);
  ev.forward(inputs, params);
  return ev.output(0);
}

/// Exact partial derivative of output 0 along input leaf `direction`.
inline DualValue input_derivative(const Expr& expr, std::span<const double> inputs,
                                  std::span<const double> params, std::size_t direction) {
  Evaluator ev(expr);
  return ev.forward_tangent(inputs, params, direction);
}

/// Reverse-mode gradient of output 0 with respect to every parameter leaf.
inline GradVector param_gradient(const Expr& expr, std::span<const double> inputs,
                                 std::span<const double> params) {
  Evaluator ev(expr);
  ev.forward(inputs, params);
  GradVector g(std::max(params.size(), expr.num_params()), 0.0);
  std::vector<double> seeds(expr.num_outputs(), 0.0);
  seeds.at(0) = 1.0;
  ev.backward(seeds, g);
  for (double x : g)
    if (!std::isfinite(x)) throw NonFinite("non-finite gradient entry");
  return g;
}

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
inline double check_gradient(const std::function<double(std::span<const double>)>& f,
                             std::span<const double> analytic, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  if (analytic.size() != x.size()) throw std::invalid_argument("gradient/point size mismatch");
  std::vector<double> xp(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = xp[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

}  // namespace sparsestein::diff
