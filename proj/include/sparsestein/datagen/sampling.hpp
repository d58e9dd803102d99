#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsestein/dataset.hpp"
#include "sparsestein/datagen/gent.hpp"
#include "sparsestein/datagen/mechchem.hpp"
#include "sparsestein/error.hpp"

namespace sparsestein::datagen {

inline constexpr double kDetFloor = 1e-8;
inline constexpr std::size_t kMaxRejections = 10000;

struct SamplingExhausted : Error { using Error::Error; };

namespace detail {

inline bool gent_admissible(const Eigen::Matrix3d& F, const GentParams& gent) {
  const Eigen::Matrix3d C = F.transpose() * F;
  if (!(C.determinant() > kDetFloor)) return false;
  return C.trace() - 3.0 < gent.Jm;
}

}  // namespace detail

/// [F]_ij = delta_ij + U[-eps, eps], redrawn when det(C) <= 1e-8 or the Gent
/// energy locks.
inline std::vector<Eigen::Matrix3d> sample_deformations(std::size_t count, double eps, std::uint64_t seed,
                                                        const GentParams& gent = {}) {
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("sampling half-width must lie in [0, 1)");
  gent.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-eps, eps);
  std::vector<Eigen::Matrix3d> out;
  out.reserve(count);
  std::size_t rejected = 0;
  while (out.size() < count) {
    Eigen::Matrix3d F = Eigen::Matrix3d::Identity();
    if (eps > 0.0)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) F(i, j) += u(rng);
    if (!detail::gent_admissible(F, gent)) {
      if (++rejected >= kMaxRejections) throw SamplingExhausted("too many consecutive rejected deformations");
      continue;
    }
    rejected = 0;
    out.push_back(F);
  }
  return out;
}

struct MechchemInput {
  models::Strain2 E = models::Strain2::Zero();
  double c = 0.0;
};

/// In-plane F with entries delta_ij + U[-eps, eps], E its Lagrange strain, c ~ U[0, 1].
inline std::vector<MechchemInput> sample_mechchem_inputs(std::size_t count, double eps, std::uint64_t seed) {
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("sampling half-width must lie in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-eps, eps);
  std::uniform_real_distribution<double> uc(0.0, 1.0);
  std::vector<MechchemInput> out;
  out.reserve(count);
  std::size_t rejected = 0;
  while (out.size() < count) {
    Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
    if (eps > 0.0)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) F(i, j) += u(rng);
    const double c = uc(rng);
    if (!((F.transpose() * F).determinant() > kDetFloor)) {
      if (++rejected >= kMaxRejections) throw SamplingExhausted("too many consecutive rejected deformations");
      continue;
    }
    rejected = 0;
    out.push_back({models::lagrange_strain(F), c});
  }
  return out;
}

enum class PathKind { Uniaxial, Mechchem };

/// Inputs along F = I + gamma e1 (x) E1, gamma uniform on [-0.4, 0.4]; the
/// mechanochemistry path pairs each gamma with c = 1.25 (gamma + 0.4).
struct ValidationPath {
  PathKind kind = PathKind::Uniaxial;
  std::vector<double> gamma;
  std::vector<double> inputs;

  std::size_t size() const { return gamma.size(); }
  std::size_t width() const { return kind == PathKind::Uniaxial ? 9 : 4; }
  std::span<const double> input(std::size_t i) const {
    return std::span<const double>(inputs).subspan(i * width(), width());
  }
};

inline constexpr double kPathHalfWidth = 0.4;

inline ValidationPath validation_path(PathKind kind, std::size_t points = 1000) {
  if (points < 2) throw std::invalid_argument("validation path needs at least two points");
  ValidationPath path;
  path.kind = kind;
  path.gamma.resize(points);
  for (std::size_t k = 0; k < points; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(points - 1);
    path.gamma[k] = -kPathHalfWidth + 2.0 * kPathHalfWidth * t;
  }
  path.gamma.front() = -kPathHalfWidth;
  path.gamma.back() = kPathHalfWidth;
  for (double g : path.gamma) {
    if (kind == PathKind::Uniaxial) {
      const double row[9] = {1.0 + g, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
      path.inputs.insert(path.inputs.end(), row, row + 9);
    } else {
      const double c = std::clamp(1.25 * (g + kPathHalfWidth), 0.0, 1.0);
      path.inputs.insert(path.inputs.end(), {g + 0.5 * g * g, 0.0, 0.0, c});
    }
  }
  return path;
}

/// Multiplicative: y = (1 + eta) y_hat; additive: y = y_hat + eta; eta ~ N(0, level^2).
inline void apply_noise(std::span<double> outputs, const NoiseSpec& noise) {
  if (!(noise.level >= 0.0)) throw std::invalid_argument("noise level must be non-negative");
  if (noise.kind == NoiseKind::None || noise.level == 0.0) return;
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> eta(0.0, noise.level);
  for (double& y : outputs) {
    const double e = eta(rng);
    y = noise.kind == NoiseKind::Multiplicative ? (1.0 + e) * y : y + e;
  }
}

inline std::vector<double> gent_outputs(std::span<const double> inputs_flat, const GentParams& p = {}) {
  std::vector<double> out;
  out.reserve(inputs_flat.size() / 9 * 6);
  for (std::size_t i = 0; i + 9 <= inputs_flat.size(); i += 9) {
    Eigen::Matrix3d F;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) F(a, b) = inputs_flat[i + static_cast<std::size_t>(3 * a + b)];
    const auto s = stress_components(gent_truth(F, p).S);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

inline std::vector<double> mechchem_outputs(std::span<const double> inputs_flat, const MechchemParams& p = {}) {
  std::vector<double> out;
  out.reserve(inputs_flat.size());
  for (std::size_t i = 0; i + 4 <= inputs_flat.size(); i += 4) {
    models::Strain2 E;
    E << inputs_flat[i], inputs_flat[i + 2], inputs_flat[i + 2], inputs_flat[i + 1];
    const auto r = mechchem_truth(E, inputs_flat[i + 3], p);
    out.insert(out.end(), {r.S(0, 0), r.S(1, 1), r.S(0, 1), r.mu});
  }
  return out;
}

inline Dataset gent_dataset(std::size_t count, double eps, std::uint64_t seed, const NoiseSpec& noise,
                            const GentParams& p = {}) {
  if (count == 0) throw std::invalid_argument("dataset needs at least one record");
  p.validate();
  Dataset d;
  d.generator = "gent";
  d.params = p.named();
  d.params.emplace_back("epsilon", eps);
  d.noise = noise;
  d.seed = seed;
  d.input_columns = hyperelastic_input_columns();
  d.output_columns = hyperelastic_output_columns();
  for (const auto& F : sample_deformations(count, eps, seed, p))
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) d.inputs.push_back(F(a, b));
  d.outputs = gent_outputs(d.inputs, p);
  apply_noise(d.outputs, noise);
  return d;
}

inline Dataset mechchem_dataset(std::size_t count, double eps, std::uint64_t seed, const NoiseSpec& noise,
                                const MechchemParams& p = {}) {
  if (count == 0) throw std::invalid_argument("dataset needs at least one record");
  p.validate();
  Dataset d;
  d.generator = "mechchem";
  d.params = p.named();
  d.params.emplace_back("epsilon", eps);
  d.noise = noise;
  d.seed = seed;
  d.input_columns = mechchem_input_columns();
  d.output_columns = mechchem_output_columns();
  for (const auto& in : sample_mechchem_inputs(count, eps, seed))
    d.inputs.insert(d.inputs.end(), {in.E(0, 0), in.E(1, 1), 0.5 * (in.E(0, 1) + in.E(1, 0)), in.c});
  d.outputs = mechchem_outputs(d.inputs, p);
  apply_noise(d.outputs, noise);
  return d;
}

}  // namespace sparsestein::datagen
