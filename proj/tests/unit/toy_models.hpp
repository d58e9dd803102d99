#pragma once

// Small observable models with closed-form answers.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "sparsestein/dataset.hpp"
#include "sparsestein/models/observables.hpp"

namespace toy {

/// yhat = a x + b (two parameters) or yhat = a x (one parameter).
class LineModel final : public sparsestein::models::ObservableModel {
 public:
  explicit LineModel(bool intercept = true) : intercept_(intercept), constrained_(intercept ? 2 : 1, false) {}
  std::size_t num_params() const override { return intercept_ ? 2 : 1; }
  std::size_t num_observables() const override { return 1; }
  std::size_t input_width() const override { return 1; }
  const std::vector<bool>& constrained() const override { return constrained_; }
  void observe(std::span<const double> th, std::span<const double> x, std::span<double> out) const override {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = th[0] * x[i] + (intercept_ ? th[1] : 0.0);
  }
  void potential(std::span<const double>, std::span<const double>, std::span<double>) const override {}
  double misfit(std::span<const double> th, const sparsestein::Dataset& d, std::span<const double> w,
                std::span<double> grad) const override {
    double total = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double x = d.inputs[i];
      const double r = th[0] * x + (intercept_ ? th[1] : 0.0) - d.outputs[i];
      total += w[i] * r * r;
      if (!grad.empty()) {
        grad[0] += 2.0 * w[i] * r * x;
        if (intercept_) grad[1] += 2.0 * w[i] * r;
      }
    }
    return total;
  }
  Eigen::MatrixXd jacobian(std::span<const double>, const sparsestein::Dataset& d) const override {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(num_params()));
    for (std::size_t i = 0; i < d.size(); ++i) {
      j(static_cast<Eigen::Index>(i), 0) = d.inputs[i];
      if (intercept_) j(static_cast<Eigen::Index>(i), 1) = 1.0;
    }
    return j;
  }

 private:
  bool intercept_;
  std::vector<bool> constrained_;
};

inline sparsestein::Dataset xy_data(std::vector<double> x, std::vector<double> y) {
  sparsestein::Dataset d;
  d.generator = "toy";
  d.input_columns = {"x"};
  d.output_columns = {"y"};
  d.inputs = std::move(x);
  d.outputs = std::move(y);
  return d;
}

/// log pi = -1/2 (x - m)^T P (x - m).
class Gaussian {
 public:
  Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd precision) : m_(std::move(mean)), p_(std::move(precision)) {}
  std::size_t dimension() const { return static_cast<std::size_t>(m_.size()); }
  double log_density(std::span<const double> x, std::span<double> g) const {
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), m_.size());
    const Eigen::VectorXd d = xv - m_;
    const Eigen::VectorXd pd = p_ * d;
    if (!g.empty()) Eigen::Map<Eigen::VectorXd>(g.data(), m_.size()) = -pd;
    return -0.5 * d.dot(pd);
  }

 private:
  Eigen::VectorXd m_;
  Eigen::MatrixXd p_;
};

}  // namespace toy
