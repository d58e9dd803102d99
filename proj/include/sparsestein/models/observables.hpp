#pragma once

// Physical observables derived from network potentials.
//
// Each model compiles one graph whose outputs are the raw network potential
// and its partials with respect to the network inputs (forward tangents
// recorded into the graph). Observables are linear in those partials with
// coefficients that depend only on the record, so data misfits and Jacobians
// need one forward and one reverse sweep per record.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsestein/dataset.hpp"
#include "sparsestein/diff/evaluate.hpp"
#include "sparsestein/diff/expr.hpp"
#include "sparsestein/models/kinematics.hpp"
#include "sparsestein/models/networks.hpp"
#include "sparsestein/models/param_vector.hpp"

namespace sparsestein::models {

/// Maps record inputs and a compact parameter vector to observables.
class ObservableModel {
 public:
  virtual ~ObservableModel() = default;

  virtual std::size_t num_params() const = 0;
  virtual std::size_t num_observables() const = 0;
  virtual std::size_t input_width() const = 0;
  /// Per compact parameter: must stay non-negative.
  virtual const std::vector<bool>& constrained() const = 0;

  /// Observables for `inputs_flat.size() / input_width()` records.
  virtual void observe(std::span<const double> theta, std::span<const double> inputs_flat,
                       std::span<double> out_flat) const = 0;
  /// Normalized potential for each record.
  virtual void potential(std::span<const double> theta, std::span<const double> inputs_flat,
                         std::span<double> out) const = 0;
  /// sum_i sum_k w_ik (obs_ik - y_ik)^2; the gradient is added to `grad` when non-empty.
  virtual double misfit(std::span<const double> theta, const Dataset& data, std::span<const double> weights,
                        std::span<double> grad) const = 0;
  /// d obs / d theta, one row per (record, observable).
  virtual Eigen::MatrixXd jacobian(std::span<const double> theta, const Dataset& data) const = 0;
};

/// Graph with outputs [psi, dpsi/dx_0, ..., dpsi/dx_{d-1}] over compact parameters.
class PotentialGraph {
 public:
  template <class Potential>
  PotentialGraph(std::size_t num_inputs, const std::vector<bool>& active, Potential&& potential) {
    diff::GraphBuilder b;
    std::vector<diff::Ex> x;
    for (std::size_t k = 0; k < num_inputs; ++k) x.push_back(b.input(k));
    std::vector<diff::Ex> theta(active.size());
    std::size_t c = 0;
    for (std::size_t i = 0; i < active.size(); ++i) theta[i] = active[i] ? b.param(c++) : diff::Ex(0.0);
    const diff::Ex psi = potential(std::span<const diff::Ex>(x), std::span<const diff::Ex>(theta));
    std::vector<diff::Ex> outs{psi};
    for (std::size_t k = 0; k < num_inputs; ++k) outs.push_back(b.tangent(psi, k));
    expr_ = b.finish(std::span<const diff::Ex>(outs));
    num_params_ = c;
  }

  const diff::Expr& expr() const { return expr_; }
  std::size_t num_params() const { return num_params_; }

 private:
  diff::Expr expr_;
  std::size_t num_params_ = 0;
};

namespace detail {
inline std::vector<bool> compact_mask(const std::vector<bool>& full, const std::vector<bool>& active) {
  std::vector<bool> out;
  for (std::size_t i = 0; i < full.size(); ++i)
    if (active[i]) out.push_back(full[i]);
  return out;
}

inline void check_theta(std::span<const double> theta, std::size_t n) {
  if (theta.size() != n) throw std::invalid_argument("parameter vector has wrong length");
}
}  // namespace detail

/// Polyconvex hyperelastic potential: normalized ICNN of (I1, I2, J) and the
/// second Piola-Kirchhoff stress S = 2 dPsi/dC.
class HyperelasticModel final : public ObservableModel {
 public:
  static constexpr std::array<std::array<int, 2>, 6> kComponents{
      {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};

  explicit HyperelasticModel(IcnnSpec spec, std::vector<bool> active = {})
      : spec_(std::move(spec)),
        active_(active.empty() ? std::vector<bool>(spec_.num_params(), true) : std::move(active)),
        graph_(std::make_shared<PotentialGraph>(3, active_, [this](auto x, auto th) {
          return icnn_forward<diff::Ex>(spec_, x, th);
        })),
        constrained_(detail::compact_mask(spec_.constrained_mask(), active_)) {
    if (active_.size() != spec_.num_params()) throw std::invalid_argument("active mask has wrong length");
  }

  const IcnnSpec& spec() const { return spec_; }
  const std::vector<bool>& active() const { return active_; }
  const diff::Expr& graph() const { return graph_->expr(); }

  std::size_t num_params() const override { return graph_->num_params(); }
  std::size_t num_observables() const override { return 6; }
  std::size_t input_width() const override { return 9; }
  const std::vector<bool>& constrained() const override { return constrained_; }

  struct Response {
    double psi = 0.0;
    Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
  };

  Response respond(std::span<const double> theta, const DeformationGradient& F) const {
    detail::check_theta(theta, num_params());
    diff::Evaluator ev(graph_->expr());
    const Reference ref = reference(ev, theta);
    return respond(ev, theta, ref, kinematics(F));
  }

  void observe(std::span<const double> theta, std::span<const double> inputs_flat,
               std::span<double> out_flat) const override {
    detail::check_theta(theta, num_params());
    diff::Evaluator ev(graph_->expr());
    const Reference ref = reference(ev, theta);
    const std::size_t n = inputs_flat.size() / 9;
    for (std::size_t i = 0; i < n; ++i) {
      const Response r = respond(ev, theta, ref, kinematics(to_matrix(inputs_flat.subspan(9 * i, 9))));
      for (std::size_t k = 0; k < 6; ++k) out_flat[6 * i + k] = r.S(kComponents[k][0], kComponents[k][1]);
    }
  }

  void potential(std::span<const double> theta, std::span<const double> inputs_flat,
                 std::span<double> out) const override {
    detail::check_theta(theta, num_params());
    diff::Evaluator ev(graph_->expr());
    const Reference ref = reference(ev, theta);
    for (std::size_t i = 0; i < inputs_flat.size() / 9; ++i)
      out[i] = respond(ev, theta, ref, kinematics(to_matrix(inputs_flat.subspan(9 * i, 9)))).psi;
  }

  double misfit(std::span<const double> theta, const Dataset& data, std::span<const double> weights,
                std::span<double> grad) const override {
    detail::check_theta(theta, num_params());
    diff::Evaluator ev(graph_->expr());
    const Reference ref = reference(ev, theta);
    const bool want_grad = !grad.empty();
    double total = 0.0;
    double n_adjoint = 0.0;
    std::array<double, 4> seeds{};
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Kinematics kin = kinematics(to_matrix(data.input(i)));
      ev.forward(invariant_inputs(kin.inv), theta);
      const auto y = data.output(i);
      const Coefficients co = coefficients(kin);
      const double dJ = ev.output(3) - ref.n;
      std::array<double, 3> a{};  // adjoints of psi_1, psi_2, psi_3
      for (std::size_t k = 0; k < 6; ++k) {
        const double s = co.d1[k] * ev.output(1) + co.d2[k] * ev.output(2) + co.d3[k] * dJ;
        const double r = s - y[k];
        const double w = weights[6 * i + k];
        total += w * r * r;
        const double g = 2.0 * w * r;
        a[0] += g * co.d1[k];
        a[1] += g * co.d2[k];
        a[2] += g * co.d3[k];
      }
      if (want_grad) {
        seeds = {0.0, a[0], a[1], a[2]};
        ev.backward(seeds, grad);
        n_adjoint -= a[2];
      }
    }
    if (want_grad && n_adjoint != 0.0) {
      ev.forward(reference_inputs(), theta);
      seeds = {0.0, 2.0 * n_adjoint, 4.0 * n_adjoint, n_adjoint};
      ev.backward(seeds, grad);
    }
    return total;
  }

  Eigen::MatrixXd jacobian(std::span<const double> theta, const Dataset& data) const override {
    detail::check_theta(theta, num_params());
    const std::size_t p = num_params();
    diff::Evaluator ev(graph_->expr());
    // d n / d theta
    std::vector<double> grad_n(p, 0.0);
    ev.forward(reference_inputs(), theta);
    ev.backward(std::array<double, 4>{0.0, 2.0, 4.0, 1.0}, grad_n);

    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(6 * data.size()), static_cast<Eigen::Index>(p));
    std::array<std::vector<double>, 3> gpsi;
    for (auto& g : gpsi) g.assign(p, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Kinematics kin = kinematics(to_matrix(data.input(i)));
      const Coefficients co = coefficients(kin);
      ev.forward(invariant_inputs(kin.inv), theta);
      for (std::size_t j = 0; j < 3; ++j) {
        std::fill(gpsi[j].begin(), gpsi[j].end(), 0.0);
        std::array<double, 4> seeds{};
        seeds[j + 1] = 1.0;
        ev.backward(seeds, gpsi[j]);
      }
      for (std::size_t k = 0; k < 6; ++k) {
        auto row = jac.row(static_cast<Eigen::Index>(6 * i + k));
        for (std::size_t q = 0; q < p; ++q)
          row(static_cast<Eigen::Index>(q)) = co.d1[k] * gpsi[0][q] + co.d2[k] * gpsi[1][q] +
                                              co.d3[k] * (gpsi[2][q] - grad_n[q]);
      }
    }
    return jac;
  }

  static DeformationGradient to_matrix(std::span<const double> f) {
    DeformationGradient F;
    F << f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8];
    return F;
  }

 private:
  struct Reference {
    double psi = 0.0;
    double n = 0.0;
  };

  // dS_k/dpsi_1, dS_k/dpsi_2 and dS_k/d(dPsi/dJ) for the six stress components.
  struct Coefficients {
    std::array<double, 6> d1{}, d2{}, d3{};
  };

  static std::array<double, 3> invariant_inputs(const Invariants& inv) { return {inv.I1, inv.I2, inv.J}; }
  static std::array<double, 3> reference_inputs() { return {3.0, 3.0, 1.0}; }

  static Coefficients coefficients(const Kinematics& kin) {
    Coefficients co;
    for (std::size_t k = 0; k < 6; ++k) {
      const int a = kComponents[k][0];
      const int b = kComponents[k][1];
      const double delta = a == b ? 1.0 : 0.0;
      co.d1[k] = 2.0 * delta;
      co.d2[k] = 2.0 * (kin.inv.I1 * delta - kin.C(a, b));
      co.d3[k] = kin.inv.J * kin.C_inv(a, b);
    }
    return co;
  }

  // n = 2 dPsi/dI1 + 4 dPsi/dI2 + dPsi/dJ at (3, 3, 1) makes S(I) vanish.
  Reference reference(diff::Evaluator& ev, std::span<const double> theta) const {
    ev.forward(reference_inputs(), theta);
    return {ev.output(0), 2.0 * ev.output(1) + 4.0 * ev.output(2) + ev.output(3)};
  }

  Response respond(diff::Evaluator& ev, std::span<const double> theta, const Reference& ref,
                   const Kinematics& kin) const {
    ev.forward(invariant_inputs(kin.inv), theta);
    const double dJ = ev.output(3) - ref.n;
    Response r;
    r.psi = ev.output(0) - ref.psi - ref.n * (kin.inv.J - 1.0);
    const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
    r.S = 2.0 * (ev.output(1) * I + ev.output(2) * (kin.inv.I1 * I - kin.C) + dJ * 0.5 * kin.inv.J * kin.C_inv);
    r.S = 0.5 * (r.S + r.S.transpose()).eval();
    return r;
  }

  IcnnSpec spec_;
  std::vector<bool> active_;
  std::shared_ptr<const PotentialGraph> graph_;
  std::vector<bool> constrained_;
};

/// Two-dimensional mechanochemistry: free energy network of (e1, e2, e6, c)
/// normalized at zero strain and concentration; observes stress and chemical potential.
class MechchemModel final : public ObservableModel {
 public:
  explicit MechchemModel(MlpSpec spec = {}, std::vector<bool> active = {})
      : spec_(std::move(spec)),
        active_(active.empty() ? std::vector<bool>(spec_.num_params(), true) : std::move(active)),
        graph_(std::make_shared<PotentialGraph>(4, active_, [this](auto x, auto th) {
          return mlp_forward<diff::Ex>(spec_, x, th);
        })),
        constrained_(graph_->num_params(), false) {
    if (spec_.inputs != 4) throw std::invalid_argument("mechanochemistry network takes 4 features");
    if (active_.size() != spec_.num_params()) throw std::invalid_argument("active mask has wrong length");
  }

  const MlpSpec& spec() const { return spec_; }
  const std::vector<bool>& active() const { return active_; }

  std::size_t num_params() const override { return graph_->num_params(); }
  std::size_t num_observables() const override { return 4; }
  std::size_t input_width() const override { return 4; }
  const std::vector<bool>& constrained() const override { return constrained_; }

  struct Response {
    double psi = 0.0;
    Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
    double mu = 0.0;
  };

  Response respond(std::span<const double> theta, const Strain2& E, double c) const {
    detail::check_theta(theta, num_params());
    diff::Evaluator ev(graph_->expr());
    const double psi0 = reference_potential(ev, theta);
    const StrainFeatures f = strain_features(E, c);
    ev.forward(features(f), theta);
    Response r;
    r.psi = ev.output(0) - psi0;
    const auto obs = observables(ev);
    r.S << obs[0], obs[2], obs[2], obs[1];
    r.mu = obs[3];
    return r;
  }

  void observe(std::span<const double> theta, std::span<const double> inputs_flat,
               std::span<double> out_flat) const override {
    detail::check_theta(theta, num_params());
    diff::Evaluator ev(graph_->expr());
    for (std::size_t i = 0; i < inputs_flat.size() / 4; ++i) {
      ev.forward(features(record_features(inputs_flat.subspan(4 * i, 4))), theta);
      const auto obs = observables(ev);
      for (std::size_t k = 0; k < 4; ++k) out_flat[4 * i + k] = obs[k];
    }
  }

  void potential(std::span<const double> theta, std::span<const double> inputs_flat,
                 std::span<double> out) const override {
    detail::check_theta(theta, num_params());
    diff::Evaluator ev(graph_->expr());
    const double psi0 = reference_potential(ev, theta);
    for (std::size_t i = 0; i < inputs_flat.size() / 4; ++i) {
      ev.forward(features(record_features(inputs_flat.subspan(4 * i, 4))), theta);
      out[i] = ev.output(0) - psi0;
    }
  }

  double misfit(std::span<const double> theta, const Dataset& data, std::span<const double> weights,
                std::span<double> grad) const override {
    detail::check_theta(theta, num_params());
    diff::Evaluator ev(graph_->expr());
    double total = 0.0;
    std::array<double, 5> seeds{};
    for (std::size_t i = 0; i < data.size(); ++i) {
      ev.forward(features(record_features(data.input(i))), theta);
      const auto obs = observables(ev);
      const auto y = data.output(i);
      std::array<double, 4> a_obs{};
      for (std::size_t k = 0; k < 4; ++k) {
        const double r = obs[k] - y[k];
        const double w = weights[4 * i + k];
        total += w * r * r;
        a_obs[k] = 2.0 * w * r;
      }
      if (!grad.empty()) {
        const auto a = partial_adjoints(a_obs);
        seeds = {0.0, a[0], a[1], a[2], a[3]};
        ev.backward(seeds, grad);
      }
    }
    return total;
  }

  Eigen::MatrixXd jacobian(std::span<const double> theta, const Dataset& data) const override {
    detail::check_theta(theta, num_params());
    const std::size_t p = num_params();
    diff::Evaluator ev(graph_->expr());
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(4 * data.size()), static_cast<Eigen::Index>(p));
    std::vector<double> g(p);
    for (std::size_t i = 0; i < data.size(); ++i) {
      ev.forward(features(record_features(data.input(i))), theta);
      for (std::size_t k = 0; k < 4; ++k) {
        std::array<double, 4> unit{};
        unit[k] = 1.0;
        const auto a = partial_adjoints(unit);
        std::fill(g.begin(), g.end(), 0.0);
        ev.backward(std::array<double, 5>{0.0, a[0], a[1], a[2], a[3]}, g);
        for (std::size_t q = 0; q < p; ++q)
          jac(static_cast<Eigen::Index>(4 * i + k), static_cast<Eigen::Index>(q)) = g[q];
      }
    }
    return jac;
  }

  static StrainFeatures record_features(std::span<const double> rec) {
    Strain2 E;
    E << rec[0], rec[2], rec[2], rec[1];
    return strain_features(E, rec[3]);
  }

 private:
  static std::array<double, 4> features(const StrainFeatures& f) { return {f.e1, f.e2, f.e6, f.c}; }

  double reference_potential(diff::Evaluator& ev, std::span<const double> theta) const {
    ev.forward(std::array<double, 4>{0.0, 0.0, 0.0, 0.0}, theta);
    return ev.output(0);
  }

  // (S11, S22, S12, mu) from the feature partials.
  static std::array<double, 4> observables(const diff::Evaluator& ev) {
    const double r3 = 1.0 / std::sqrt(3.0);
    const double r2 = 1.0 / std::sqrt(2.0);
    return {ev.output(1) * r3 + ev.output(2) * r2, ev.output(1) * r3 - ev.output(2) * r2, ev.output(3) * r2,
            ev.output(4)};
  }

  static std::array<double, 4> partial_adjoints(const std::array<double, 4>& a_obs) {
    const double r3 = 1.0 / std::sqrt(3.0);
    const double r2 = 1.0 / std::sqrt(2.0);
    return {(a_obs[0] + a_obs[1]) * r3, (a_obs[0] - a_obs[1]) * r2, a_obs[2] * r2, a_obs[3]};
  }

  MlpSpec spec_;
  std::vector<bool> active_;
  std::shared_ptr<const PotentialGraph> graph_;
  std::vector<bool> constrained_;
};

// Convenience wrappers over full (uncompacted) parameter vectors.

inline double hyper_potential(const IcnnSpec& spec, const DeformationGradient& F, const ParamVector& theta) {
  const HyperelasticModel m(spec, theta.active);
  return m.respond(theta.compact(), F).psi;
}

inline Eigen::Matrix3d hyper_stress(const IcnnSpec& spec, const DeformationGradient& F, const ParamVector& theta) {
  const HyperelasticModel m(spec, theta.active);
  return m.respond(theta.compact(), F).S;
}

inline double mechchem_potential(const MlpSpec& spec, const Strain2& E, double c, const ParamVector& theta) {
  const MechchemModel m(spec, theta.active);
  return m.respond(theta.compact(), E, c).psi;
}

struct MechchemObservables {
  Eigen::Matrix2d S;
  double mu = 0.0;
};

inline MechchemObservables mechchem_observables(const MlpSpec& spec, const Strain2& E, double c,
                                                const ParamVector& theta) {
  const MechchemModel m(spec, theta.active);
  const auto r = m.respond(theta.compact(), E, c);
  return {r.S, r.mu};
}

}  // namespace sparsestein::models
