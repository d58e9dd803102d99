#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sparsestein/error.hpp"
#include "sparsestein/models/kinematics.hpp"

namespace sparsestein::datagen {

struct GentParams {
  double Jm = 77.931;
  double theta1 = 2.4195;
  double theta2 = -0.75;
  double theta3 = 1.20975;

  void validate() const {
    if (!(Jm > 0.0) || !std::isfinite(theta1) || !std::isfinite(theta2) || !std::isfinite(theta3))
      throw std::invalid_argument("Gent parameters must be finite with Jm > 0");
  }
  std::vector<std::pair<std::string, double>> named() const {
    return {{"Jm", Jm}, {"theta1", theta1}, {"theta2", theta2}, {"theta3", theta3}};
  }
};

/// Invariant partials of the raw Gent energy.
struct GentPartials {
  double psi = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double dJ = 0.0;
};

inline GentPartials gent_partials(const models::Invariants& inv, const GentParams& p) {
  const double x = (inv.I1 - 3.0) / p.Jm;
  if (!(x < 1.0)) throw GentLocking("Gent locking: I1 - 3 >= Jm");
  if (!(inv.J > 0.0) || !(inv.I2 > 0.0)) throw SingularDeformation("Gent energy needs J > 0 and I2 > 0");
  GentPartials g;
  g.psi = -0.5 * p.theta1 * p.Jm * std::log1p(-x) - p.theta2 * std::log(inv.I2 / inv.J) +
          p.theta3 * (0.5 * (inv.J * inv.J - 1.0) - std::log(inv.J));
  g.d1 = 0.5 * p.theta1 / (1.0 - x);
  g.d2 = -p.theta2 / inv.I2;
  g.dJ = p.theta2 / inv.J + p.theta3 * (inv.J - 1.0 / inv.J);
  return g;
}

/// Coefficient of (J - 1) that removes the reference stress.
inline double gent_reference_shift(const GentParams& p) {
  const GentPartials r = gent_partials({3.0, 3.0, 1.0}, p);
  return 2.0 * r.d1 + 4.0 * r.d2 + r.dJ;
}

struct GentResponse {
  double psi_raw = 0.0;
  double psi = 0.0;
  Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
};

/// Shifted energy psi_raw - psi_raw(I) - n (J - 1) and its second Piola-Kirchhoff stress.
inline GentResponse gent_truth(const models::DeformationGradient& F, const GentParams& p = {}) {
  const models::Kinematics k = models::kinematics(F);
  const GentPartials g = gent_partials(k.inv, p);
  const double n = gent_reference_shift(p);
  GentResponse r;
  r.psi_raw = g.psi;
  r.psi = g.psi - gent_partials({3.0, 3.0, 1.0}, p).psi - n * (k.inv.J - 1.0);
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  r.S = 2.0 * (g.d1 * I + g.d2 * (k.inv.I1 * I - k.C) + (g.dJ - n) * 0.5 * k.inv.J * k.C_inv);
  return r;
}

/// Stress components in dataset column order (11, 22, 33, 12, 13, 23).
inline std::vector<double> stress_components(const Eigen::Matrix3d& S) {
  return {S(0, 0), S(1, 1), S(2, 2), S(0, 1), S(0, 2), S(1, 2)};
}

}  // namespace sparsestein::datagen
