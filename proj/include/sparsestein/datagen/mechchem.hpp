#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sparsestein/models/kinematics.hpp"

namespace sparsestein::datagen {

struct MechchemParams {
  double dc = 2.0;
  double de = 0.1;
  double se = 0.1;

  void validate() const {
    if (!(dc > 0.0 && de > 0.0 && se > 0.0)) throw std::invalid_argument("mechanochemistry parameters must be positive");
  }
  std::vector<std::pair<std::string, double>> named() const { return {{"dc", dc}, {"de", de}, {"se", se}}; }
};

struct MechchemResponse {
  double psi = 0.0;
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  double mu = 0.0;
};

/// Double-well free energy in c coupled to the strain features; S and mu are
/// its derivatives with respect to E and c.
inline MechchemResponse mechchem_truth(const models::Strain2& E, double c, const MechchemParams& p = {}) {
  const models::StrainFeatures f = models::strain_features(E, c);
  const double a = 2.0 * p.de / (p.se * p.se);
  const double b = p.de / (p.se * p.se * p.se * p.se);
  const double k = 16.0 * p.dc;
  const double s = 2.0 * c - 1.0;
  MechchemResponse r;
  r.psi = k * c * c * (c - 1.0) * (c - 1.0) + a * (f.e1 * f.e1 + f.e6 * f.e6) + b * std::pow(f.e2, 4) +
          s * a * f.e2 * f.e2;
  const double p1 = 2.0 * a * f.e1;
  const double p2 = 4.0 * b * f.e2 * f.e2 * f.e2 + 2.0 * s * a * f.e2;
  const double p6 = 2.0 * a * f.e6;
  r.S(0, 0) = p1 / std::sqrt(3.0) + p2 / std::sqrt(2.0);
  r.S(1, 1) = p1 / std::sqrt(3.0) - p2 / std::sqrt(2.0);
  r.S(0, 1) = r.S(1, 0) = p6 / std::sqrt(2.0);
  r.mu = k * 2.0 * c * (c - 1.0) * (2.0 * c - 1.0) + 2.0 * a * f.e2 * f.e2;
  return r;
}

}  // namespace sparsestein::datagen
