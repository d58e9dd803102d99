#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "sparsestein/error.hpp"

namespace sparsestein::models {

using DeformationGradient = Eigen::Matrix3d;
using Strain2 = Eigen::Matrix2d;

struct Invariants {
  double I1 = 3.0;
  double I2 = 3.0;
  double J = 1.0;
};

/// Plane-strain features of the Lagrange strain plus concentration.
struct StrainFeatures {
  double e1 = 0.0;
  double e2 = 0.0;
  double e6 = 0.0;
  double c = 0.0;
};

/// Right Cauchy-Green tensor and everything the invariant chain rule needs.
struct Kinematics {
  Eigen::Matrix3d C;
  Eigen::Matrix3d C_inv;
  Invariants inv;
};

inline Kinematics kinematics(const DeformationGradient& F) {
  Kinematics k;
  k.C = F.transpose() * F;
  const double det_c = k.C.determinant();
  if (!(det_c > 0.0)) throw SingularDeformation("det(C) must be positive");
  const double I1 = k.C.trace();
  // tr(cof C) = ((tr C)^2 - tr(C^2)) / 2
  const double I2 = 0.5 * (I1 * I1 - (k.C * k.C).trace());
  k.inv = {I1, I2, std::sqrt(det_c)};
  k.C_inv = k.C.inverse();
  return k;
}

inline Invariants invariants(const DeformationGradient& F) { return kinematics(F).inv; }

inline void check_concentration(double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw ConcentrationOutOfRange("concentration must lie in [0, 1]");
}

/// E is symmetrized; E33 is zero under plane strain.
inline StrainFeatures strain_features(const Strain2& E, double c) {
  check_concentration(c);
  const double e12 = 0.5 * (E(0, 1) + E(1, 0));
  return {(E(0, 0) + E(1, 1)) / std::sqrt(3.0), (E(0, 0) - E(1, 1)) / std::sqrt(2.0), std::sqrt(2.0) * e12, c};
}

/// Green-Lagrange strain of an in-plane deformation gradient.
inline Strain2 lagrange_strain(const Eigen::Matrix2d& F) {
  return 0.5 * (F.transpose() * F - Eigen::Matrix2d::Identity());
}

}  // namespace sparsestein::models
