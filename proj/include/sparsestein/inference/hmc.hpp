#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsestein/inference/density.hpp"
#include "sparsestein/inference/svgd.hpp"

namespace sparsestein::inference {

struct HmcConfig {
  double step_size = 0.1;
  std::size_t leapfrog_steps = 10;
  std::size_t samples = 1000;  // kept after burn-in and thinning
  std::size_t burn_in = 1000;
  std::size_t thin = 1;

  void validate() const {
    if (!(step_size >= 0.0)) throw std::invalid_argument("HMC step size must be non-negative");
    if (leapfrog_steps < 1) throw std::invalid_argument("HMC needs at least one leapfrog step");
    if (thin < 1) throw std::invalid_argument("thinning factor must be at least 1");
  }
};

/// Leapfrog with identity mass on U = -log pi. `grad` holds grad log pi at q on
/// entry and at the final q on exit. Returns log pi at the final q.
template <LogDensity D>
double leapfrog(const D& density, std::span<double> q, std::span<double> p, std::span<double> grad, double eps,
                std::size_t steps) {
  double lp = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < q.size(); ++i) p[i] += 0.5 * eps * grad[i];
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += eps * p[i];
    lp = density.log_density(q, grad);
    for (std::size_t i = 0; i < q.size(); ++i) p[i] += 0.5 * eps * grad[i];
  }
  return lp;
}

/// Metropolis-adjusted Hamiltonian chain. Proposals that are non-finite or
/// leave the feasible set are rejected. `trace` holds |Delta H| per proposal.
template <LogDensity D>
PosteriorSamples hmc_run(const D& density, std::vector<double> q, const HmcConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = density.dimension();
  if (q.size() != n) throw std::invalid_argument("HMC start has wrong dimension");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> grad(n), qn(n), pn(n), gn(n);
  double lp = density.log_density(q, grad);
  if (!std::isfinite(lp)) throw NonFinite("HMC start has non-finite log density");

  PosteriorSamples out;
  out.method = "hmc";
  out.seed = seed;
  out.particles.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.samples));
  const std::size_t total = cfg.burn_in + cfg.samples * cfg.thin;
  std::size_t accepted = 0, kept = 0;
  for (std::size_t it = 0; it < total; ++it) {
    double k0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pn[i] = normal(rng);
      k0 += 0.5 * pn[i] * pn[i];
    }
    qn = q;
    gn = grad;
    const double lpn = leapfrog(density, std::span<double>(qn), std::span<double>(pn), std::span<double>(gn),
                                cfg.step_size, cfg.leapfrog_steps);
    double k1 = 0.0;
    for (double v : pn) k1 += 0.5 * v * v;
    const double dH = (-lpn + k1) - (-lp + k0);
    const double u = unif(rng);
    bool ok = std::isfinite(dH);
    for (double v : gn) ok = ok && std::isfinite(v);
    if constexpr (ConstrainedDensity<D>) {
      if (ok) {
        std::vector<double> projected = qn;
        density.constrain(projected);
        ok = projected == qn;
      }
    }
    out.trace.push_back(ok ? std::abs(dH) : std::numeric_limits<double>::infinity());
    if (ok && u < std::exp(std::min(0.0, -dH))) {
      q = qn;
      grad = gn;
      lp = lpn;
      ++accepted;
    }
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == cfg.thin - 1) {
      for (std::size_t i = 0; i < n; ++i) out.particles(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(kept)) = q[i];
      ++kept;
    }
  }
  out.iterations = total;
  out.acceptance = total ? static_cast<double>(accepted) / static_cast<double>(total) : 0.0;
  return out;
}

}  // namespace sparsestein::inference
