#pragma once

// Seeded generators shared by the property tests.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "sparsestein/dataset.hpp"
#include "sparsestein/models/kinematics.hpp"
#include "sparsestein/models/networks.hpp"

namespace testgen {

inline Eigen::Matrix3d random_F(std::mt19937_64& rng, double eps = 0.2) {
  std::uniform_real_distribution<double> u(-eps, eps);
  Eigen::Matrix3d F = Eigen::Matrix3d::Identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) F(i, j) += u(rng);
  return F;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// Parameters with the constraint mask honored and O(1) network outputs.
inline std::vector<double> random_icnn_params(const sparsestein::models::IcnnSpec& spec, std::mt19937_64& rng) {
  return sparsestein::models::initialize(spec, rng()).values;
}

inline std::vector<double> random_mlp_params(const sparsestein::models::MlpSpec& spec, std::mt19937_64& rng) {
  auto v = sparsestein::models::initialize(spec, rng()).values;
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& x : v) x += n(rng);
  return v;
}

inline sparsestein::Dataset single_record(const Eigen::Matrix3d& F, const std::vector<double>& y) {
  sparsestein::Dataset d;
  d.generator = "test";
  d.input_columns = sparsestein::hyperelastic_input_columns();
  d.output_columns = sparsestein::hyperelastic_output_columns();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d.inputs.push_back(F(i, j));
  d.outputs = y;
  return d;
}

inline sparsestein::Dataset single_mechchem_record(const std::vector<double>& rec, const std::vector<double>& y) {
  sparsestein::Dataset d;
  d.generator = "test";
  d.input_columns = sparsestein::mechchem_input_columns();
  d.output_columns = sparsestein::mechchem_output_columns();
  d.inputs = rec;
  d.outputs = y;
  return d;
}

}  // namespace testgen
