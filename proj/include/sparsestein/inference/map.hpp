#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sparsestein/error.hpp"
#include "sparsestein/inference/adam.hpp"
#include "sparsestein/inference/density.hpp"
#include "sparsestein/sparsify/gates.hpp"
#include "sparsestein/sparsify/loss.hpp"

namespace sparsestein::inference {

struct MapConfig {
  AdamConfig adam;
  std::size_t epochs = 1000;
};

/// Adam descent on -log pi, projecting onto the feasible set after every step.
/// `loss_trace` (optional) receives -log pi before each step.
template <LogDensity D>
std::vector<double> train_map(const D& density, std::vector<double> theta, const MapConfig& cfg,
                              std::vector<double>* loss_trace = nullptr) {
  if (theta.size() != density.dimension()) throw std::invalid_argument("initial point has wrong dimension");
  Adam adam(theta.size(), cfg.adam);
  std::vector<double> grad(theta.size());
  apply_constraint(density, theta);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double lp = density.log_density(theta, grad);
    if (!std::isfinite(lp)) throw NonFinite("MAP loss diverged at epoch " + std::to_string(e));
    if (loss_trace) loss_trace->push_back(-lp);
    adam.ascend(theta, grad);
    apply_constraint(density, theta);
  }
  return theta;
}

struct L0Result {
  std::vector<double> theta_bar;
  sparsify::GateState gates;
  std::vector<double> loss_trace;
};

/// Joint Adam descent on (theta_bar, log alpha) for the Monte Carlo L0 objective,
/// one fresh set of gate draws per step taken from a stream seeded with `seed`.
inline L0Result train_l0(const models::ObservableModel& model, const Dataset& data, std::span<const double> weights,
                         std::vector<double> theta_bar, sparsify::GateState gates, const sparsify::RegularizerSpec& reg,
                         const MapConfig& cfg, std::uint64_t seed) {
  const std::size_t n = theta_bar.size();
  if (gates.size() != n) throw std::invalid_argument("one gate per parameter required");
  std::mt19937_64 rng(seed);
  std::vector<double> x(2 * n), g(2 * n);
  std::copy(theta_bar.begin(), theta_bar.end(), x.begin());
  std::copy(gates.log_alpha.begin(), gates.log_alpha.end(), x.begin() + static_cast<std::ptrdiff_t>(n));
  Adam adam(2 * n, cfg.adam);
  const auto& mask = model.constrained();
  L0Result out;
  sparsify::L0Gradient grad;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(n), x.end(), gates.log_alpha.begin());
    const double loss = sparsify::l0_training_loss(model, data, weights, std::span<const double>(x.data(), n), gates,
                                                   reg, rng, &grad);
    if (!std::isfinite(loss)) throw NonFinite("L0 loss diverged at epoch " + std::to_string(e));
    out.loss_trace.push_back(loss);
    std::copy(grad.theta.begin(), grad.theta.end(), g.begin());
    std::copy(grad.log_alpha.begin(), grad.log_alpha.end(), g.begin() + static_cast<std::ptrdiff_t>(n));
    adam.descend(x, g);
    models::clamp_nonneg(std::span<double>(x.data(), n), mask);
  }
  out.theta_bar.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  gates.log_alpha.assign(x.begin() + static_cast<std::ptrdiff_t>(n), x.end());
  out.gates = std::move(gates);
  return out;
}

}  // namespace sparsestein::inference
