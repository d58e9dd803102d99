#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsestein/dataset.hpp"
#include "sparsestein/error.hpp"
#include "sparsestein/models/networks.hpp"
#include "sparsestein/models/observables.hpp"
#include "sparsestein/sparsify/loss.hpp"

namespace sparsestein::inference {

/// Unnormalized log density over R^n. `log_density` overwrites `grad` with the
/// gradient when it is non-empty.
template <class D>
concept LogDensity = requires(const D& d, std::span<const double> x, std::span<double> g) {
  { d.dimension() } -> std::convertible_to<std::size_t>;
  { d.log_density(x, g) } -> std::convertible_to<double>;
};

/// Densities with a feasible set expose `constrain`, which projects a point onto it.
template <class D>
concept ConstrainedDensity = LogDensity<D> && requires(const D& d, std::span<double> x) { d.constrain(x); };

template <class D>
void apply_constraint(const D& d, std::span<double> x) {
  if constexpr (ConstrainedDensity<D>) d.constrain(x);
}

struct PriorSpec {
  int p = 2;  // 1 (Laplace) or 2 (Gaussian)
  double lambda = 0.0;
};

/// 1 / sigma^2 per output entry. Multiplicative noise: sigma = level * max(1, |y|);
/// additive: sigma = level; noiseless data uses sigma = 1.
inline std::vector<double> likelihood_weights(const Dataset& data, const NoiseSpec& noise) {
  std::vector<double> w(data.outputs.size(), 1.0);
  if (noise.kind == NoiseKind::None || noise.level == 0.0) return w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double sigma =
        noise.kind == NoiseKind::Multiplicative ? noise.level * std::max(1.0, std::abs(data.outputs[i])) : noise.level;
    w[i] = 1.0 / (sigma * sigma);
  }
  return w;
}

/// log pi(theta | D) = -sum_i w_i (y_i - yhat_i)^2 - lambda ||theta||_p, constants dropped.
class LogPosterior {
 public:
  LogPosterior(std::shared_ptr<const models::ObservableModel> model, Dataset data, std::vector<double> weights,
               PriorSpec prior)
      : model_(std::move(model)), data_(std::move(data)), weights_(std::move(weights)), prior_(prior) {
    if (weights_.size() != data_.outputs.size()) throw std::invalid_argument("one likelihood weight per output");
    for (double w : weights_)
      if (!(w > 0.0)) throw std::invalid_argument("likelihood variances must be positive");
    if (prior_.p != 1 && prior_.p != 2) throw std::invalid_argument("prior order must be 1 or 2");
    if (!(prior_.lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  }

  std::size_t dimension() const { return model_->num_params(); }
  const models::ObservableModel& model() const { return *model_; }
  std::shared_ptr<const models::ObservableModel> model_ptr() const { return model_; }
  const Dataset& data() const { return data_; }
  const std::vector<double>& weights() const { return weights_; }
  const PriorSpec& prior() const { return prior_; }

  double log_density(std::span<const double> theta, std::span<double> grad) const {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    double v = model_->misfit(theta, data_, weights_, grad);
    if (prior_.lambda > 0.0) v += sparsify::lp_penalty(theta, prior_.p, prior_.lambda, grad);
    for (auto& g : grad) g = -g;
    return -v;
  }

  void constrain(std::span<double> theta) const { models::clamp_nonneg(theta, model_->constrained()); }

  /// 2 J^T diag(w) J at theta.
  Eigen::MatrixXd gauss_newton_hessian(std::span<const double> theta) const {
    const Eigen::MatrixXd J = model_->jacobian(theta, data_);
    const Eigen::Map<const Eigen::VectorXd> w(weights_.data(), static_cast<Eigen::Index>(weights_.size()));
    return 2.0 * J.transpose() * w.asDiagonal() * J;
  }

  /// Prior variances of the Gaussian counterpart of the penalty: 1 / (2 lambda).
  Eigen::VectorXd prior_variance() const {
    if (!(prior_.lambda > 0.0)) throw std::invalid_argument("prior variance needs lambda > 0");
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dimension()), 1.0 / (2.0 * prior_.lambda));
  }

 private:
  std::shared_ptr<const models::ObservableModel> model_;
  Dataset data_;
  std::vector<double> weights_;
  PriorSpec prior_;
};

/// log pi = -1/2 (x - m)^T L (x - m) - l1 ||x||_1.
class GaussianL1Density {
 public:
  GaussianL1Density(Eigen::MatrixXd precision, Eigen::VectorXd mean, double l1)
      : precision_(std::move(precision)), mean_(std::move(mean)), l1_(l1) {
    if (precision_.rows() != precision_.cols() || precision_.rows() != mean_.size())
      throw std::invalid_argument("precision and mean shapes disagree");
    if ((precision_ - precision_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("precision must be symmetric");
  }

  std::size_t dimension() const { return static_cast<std::size_t>(mean_.size()); }
  const Eigen::MatrixXd& precision() const { return precision_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  double l1() const { return l1_; }

  double log_density(std::span<const double> x, std::span<double> grad) const {
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd d = xv - mean_;
    const Eigen::VectorXd ld = precision_ * d;
    double v = -0.5 * d.dot(ld) - l1_ * xv.cwiseAbs().sum();
    if (!grad.empty())
      for (Eigen::Index i = 0; i < d.size(); ++i)
        grad[static_cast<std::size_t>(i)] = -ld(i) - l1_ * (xv(i) > 0.0 ? 1.0 : (xv(i) < 0.0 ? -1.0 : 0.0));
    return v;
  }

 private:
  Eigen::MatrixXd precision_;
  Eigen::VectorXd mean_;
  double l1_;
};

}  // namespace sparsestein::inference
