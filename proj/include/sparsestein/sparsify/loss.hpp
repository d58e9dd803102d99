#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsestein/dataset.hpp"
#include "sparsestein/models/observables.hpp"
#include "sparsestein/sparsify/gates.hpp"

namespace sparsestein::sparsify {

struct RegularizerSpec {
  int p = 2;  // 0, 1 or 2
  double lambda = 0.0;
  std::size_t mc_samples = 1;

  void validate() const {
    if (p != 0 && p != 1 && p != 2) throw std::invalid_argument("regularizer order must be 0, 1 or 2");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
    if (mc_samples < 1) throw std::invalid_argument("at least one Monte Carlo gate sample is required");
  }
};

/// lambda * sum |theta| (p = 1) or lambda * sum theta^2 (p = 2). The L1
/// subgradient at 0 is 0. `grad` (optional) is accumulated into.
inline double lp_penalty(std::span<const double> theta, int p, double lambda, std::span<double> grad = {}) {
  if (p != 1 && p != 2) throw std::invalid_argument("lp_penalty: p must be 1 or 2");
  double total = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double t = theta[i];
    if (p == 1) {
      total += std::abs(t);
      if (!grad.empty()) grad[i] += lambda * (t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0));
    } else {
      total += t * t;
      if (!grad.empty()) grad[i] += 2.0 * lambda * t;
    }
  }
  return lambda * total;
}

/// Gradients of the Monte Carlo L0 objective.
struct L0Gradient {
  std::vector<double> theta;
  std::vector<double> log_alpha;
};

/// (1/M) sum_m misfit(theta_bar * z_m) + lambda * l0_penalty, with z_m sampled
/// from uniform draws taken off `rng`. When `grad` is non-null both gradients
/// are written (not accumulated).
inline double l0_training_loss(const models::ObservableModel& model, const Dataset& data,
                               std::span<const double> weights, std::span<const double> theta_bar,
                               const GateState& gates, const RegularizerSpec& reg, std::mt19937_64& rng,
                               L0Gradient* grad = nullptr) {
  if (reg.p != 0) throw std::invalid_argument("l0_training_loss requires p = 0");
  reg.validate();
  const std::size_t n = theta_bar.size();
  if (gates.size() != n) throw std::invalid_argument("one gate per parameter required");
  if (model.num_params() != n) throw std::invalid_argument("model parameter count mismatch");

  const GateGraphs graphs(gates);
  std::vector<double> u(n), z(n), dz(n), theta(n), g(n);
  if (grad) {
    grad->theta.assign(n, 0.0);
    grad->log_alpha.assign(n, 0.0);
  }
  const double inv_m = 1.0 / static_cast<double>(reg.mc_samples);
  double total = 0.0;
  for (std::size_t m = 0; m < reg.mc_samples; ++m) {
    for (auto& x : u) x = open_uniform(rng);
    detail::eval_gates(graphs.sample(), gates.log_alpha, u, z, grad ? std::span<double>(dz) : std::span<double>());
    for (std::size_t j = 0; j < n; ++j) theta[j] = theta_bar[j] * z[j];
    if (grad) std::fill(g.begin(), g.end(), 0.0);
    total += inv_m * model.misfit(theta, data, weights, grad ? std::span<double>(g) : std::span<double>());
    if (grad)
      for (std::size_t j = 0; j < n; ++j) {
        grad->theta[j] += inv_m * g[j] * z[j];
        grad->log_alpha[j] += inv_m * g[j] * theta_bar[j] * dz[j];
      }
  }
  if (reg.lambda > 0.0) {
    std::vector<double> dp(n, 0.0);
    std::vector<double> pen(n);
    detail::eval_gates(graphs.penalty(), gates.log_alpha, {}, pen, grad ? std::span<double>(dp) : std::span<double>());
    double sum = 0.0;
    for (double v : pen) sum += v;
    total += reg.lambda * sum;
    if (grad)
      for (std::size_t j = 0; j < n; ++j) grad->log_alpha[j] += reg.lambda * dp[j];
  }
  return total;
}

inline double l0_training_loss(const models::ObservableModel& model, const Dataset& data,
                               std::span<const double> weights, std::span<const double> theta_bar,
                               const GateState& gates, const RegularizerSpec& reg, std::uint64_t seed,
                               L0Gradient* grad = nullptr) {
  std::mt19937_64 rng(seed);
  return l0_training_loss(model, data, weights, theta_bar, gates, reg, rng, grad);
}

}  // namespace sparsestein::sparsify
