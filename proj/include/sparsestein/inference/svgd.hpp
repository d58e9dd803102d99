#pragma once

// Stein variational gradient descent over an ensemble stored as the columns
// of a dense matrix.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sparsestein/error.hpp"
#include "sparsestein/inference/adam.hpp"
#include "sparsestein/inference/density.hpp"
#include "sparsestein/inference/parallel.hpp"

namespace sparsestein::inference {

/// Samples (one per column) plus run metadata. For Stein methods `trace`
/// holds the mean ||phi|| per iteration; for HMC, |Delta H| per proposal.
struct PosteriorSamples {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  Eigen::MatrixXd particles;
  std::vector<double> trace;
  double acceptance = std::numeric_limits<double>::quiet_NaN();

  std::size_t count() const { return static_cast<std::size_t>(particles.cols()); }
  std::span<const double> sample(std::size_t i) const {
    return {particles.col(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(particles.rows())};
  }
};

struct KernelValue {
  double k = 1.0;
  Eigen::VectorXd grad_a;
};

/// k = exp(-||a - b||^2 / h), grad_a k = -(2/h)(a - b) k.
inline KernelValue rbf_kernel(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                              double h) {
  if (!(h > 0.0)) throw std::invalid_argument("kernel bandwidth must be positive");
  const Eigen::VectorXd d = a - b;
  KernelValue out;
  out.k = std::exp(-d.squaredNorm() / h);
  out.grad_a = (-2.0 / h * out.k) * d;
  return out;
}

inline constexpr double kBandwidthFloor = 1e-8;

/// med^2 / log(S + 1) with med the median pairwise distance; floored.
inline double median_bandwidth(const Eigen::MatrixXd& particles, double floor = kBandwidthFloor) {
  const Eigen::Index s = particles.cols();
  if (s < 2) return floor;
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(s * (s - 1) / 2));
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = i + 1; j < s; ++j) dist.push_back((particles.col(i) - particles.col(j)).norm());
  const std::size_t m = dist.size();
  std::sort(dist.begin(), dist.end());
  const double med = m % 2 ? dist[m / 2] : 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
  return std::max(floor, med * med / std::log(static_cast<double>(s) + 1.0));
}

/// K_ij = exp(-||x_i - x_j||^2 / h).
inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& particles, double h) {
  const Eigen::Index s = particles.cols();
  Eigen::MatrixXd K(s, s);
  for (Eigen::Index i = 0; i < s; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < s; ++j)
      K(i, j) = K(j, i) = std::exp(-(particles.col(i) - particles.col(j)).squaredNorm() / h);
  }
  return K;
}

struct SvgdConfig {
  std::size_t iterations = 500;
  StepRule rule = StepRule::Adam;
  AdamConfig adam;
  double bandwidth = 0.0;  // > 0 fixes h; otherwise the median heuristic per step
  std::size_t threads = 1;

  void validate() const {
    adam.validate();
    if (bandwidth < 0.0) throw std::invalid_argument("bandwidth override must be positive");
  }
};

/// phi_i = (1/S) sum_j [k(x_j, x_i) grad log pi(x_j) + grad_{x_j} k(x_j, x_i)].
inline Eigen::MatrixXd stein_direction(const Eigen::MatrixXd& particles, const Eigen::MatrixXd& grads, double h) {
  const Eigen::Index s = particles.cols();
  const Eigen::MatrixXd K = kernel_matrix(particles, h);
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(particles.rows(), s);
  const double inv_s = 1.0 / static_cast<double>(s);
  for (Eigen::Index i = 0; i < s; ++i) {
    auto col = phi.col(i);
    for (Eigen::Index j = 0; j < s; ++j) {
      const double k = K(j, i);
      col += k * grads.col(j);
      if (j != i) col += (-2.0 / h * k) * (particles.col(j) - particles.col(i));
    }
    col *= inv_s;
  }
  return phi;
}

/// Ensemble with one stepper per particle.
struct SvgdState {
  Eigen::MatrixXd particles;
  std::vector<Stepper> steppers;
  std::size_t iteration = 0;

  SvgdState(Eigen::MatrixXd init, const SvgdConfig& cfg) : particles(std::move(init)) {
    if (particles.cols() < 1) throw std::invalid_argument("ensemble needs at least one particle");
    for (Eigen::Index i = 0; i < particles.cols(); ++i)
      steppers.emplace_back(static_cast<std::size_t>(particles.rows()), cfg.rule, cfg.adam);
  }
};

/// Gradients of log pi at every particle, evaluated concurrently.
template <LogDensity D>
Eigen::MatrixXd score_matrix(const D& density, const Eigen::MatrixXd& particles, std::size_t threads) {
  Eigen::MatrixXd grads(particles.rows(), particles.cols());
  const auto p = static_cast<std::size_t>(particles.rows());
  parallel_for(static_cast<std::size_t>(particles.cols()), threads, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    const double lp = density.log_density({particles.col(c).data(), p}, {grads.col(c).data(), p});
    if (!std::isfinite(lp)) throw NonFinite("log density is not finite at particle " + std::to_string(i));
  });
  return grads;
}

/// One synchronous transport step; returns the mean ||phi||.
template <LogDensity D>
double svgd_step(SvgdState& state, const D& density, const SvgdConfig& cfg) {
  const Eigen::MatrixXd grads = score_matrix(density, state.particles, cfg.threads);
  const double h = cfg.bandwidth > 0.0 ? cfg.bandwidth : median_bandwidth(state.particles);
  const Eigen::MatrixXd phi = stein_direction(state.particles, grads, h);
  const auto p = static_cast<std::size_t>(state.particles.rows());
  double norm = 0.0;
  for (Eigen::Index i = 0; i < state.particles.cols(); ++i) {
    std::span<double> x(state.particles.col(i).data(), p);
    state.steppers[static_cast<std::size_t>(i)].ascend(x, {phi.col(i).data(), p});
    apply_constraint(density, x);
    norm += phi.col(i).norm();
    for (double v : x)
      if (!std::isfinite(v)) throw NonFinite("SVGD update diverged");
  }
  ++state.iteration;
  return norm / static_cast<double>(state.particles.cols());
}

template <LogDensity D>
PosteriorSamples svgd_run(const D& density, Eigen::MatrixXd init, const SvgdConfig& cfg, std::uint64_t seed = 0) {
  cfg.validate();
  if (static_cast<std::size_t>(init.rows()) != density.dimension())
    throw std::invalid_argument("particles have wrong dimension");
  SvgdState state(std::move(init), cfg);
  PosteriorSamples out;
  out.method = "svgd";
  out.seed = seed;
  for (std::size_t t = 0; t < cfg.iterations; ++t) out.trace.push_back(svgd_step(state, density, cfg));
  out.iterations = cfg.iterations;
  out.particles = std::move(state.particles);
  return out;
}

/// Columns center + scale * N(0, I) from a seeded stream.
inline Eigen::MatrixXd jittered_ensemble(std::span<const double> center, std::size_t count, double scale,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(center.size()), static_cast<Eigen::Index>(count));
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = center[static_cast<std::size_t>(i)] + scale * n(rng);
  return x;
}

/// SVGD against -1/2 (x - m)^T L (x - m) - l1 ||x||_1.
inline PosteriorSamples sparsifying_prior_svgd(const Eigen::MatrixXd& precision, const Eigen::VectorXd& mean,
                                               double l1, Eigen::MatrixXd init, const SvgdConfig& cfg,
                                               std::uint64_t seed = 0) {
  const GaussianL1Density density(precision, mean, l1);
  auto out = svgd_run(density, std::move(init), cfg, seed);
  out.method = "svgd-l1-prior";
  return out;
}

}  // namespace sparsestein::inference
