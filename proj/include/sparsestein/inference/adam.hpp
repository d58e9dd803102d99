#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace sparsestein::inference {

/// Step size lr * decay^t at iteration t.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay = 1.0;

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("Adam betas in [0, 1)");
    if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("decay must lie in (0, 1]");
  }

  double rate(std::size_t t) const { return decay == 1.0 ? lr : lr * std::pow(decay, static_cast<double>(t)); }
};

enum class StepRule { Adam, Plain };

/// Per-coordinate Adam moments. `ascend` moves along +direction, `descend` along -direction.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) { cfg_.validate(); }

  std::size_t iterations() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  void ascend(std::span<double> x, std::span<const double> direction) { update(x, direction, 1.0); }
  void descend(std::span<double> x, std::span<const double> direction) { update(x, direction, -1.0); }

 private:
  void update(std::span<double> x, std::span<const double> d, double sign) {
    if (x.size() != m_.size() || d.size() != m_.size()) throw std::invalid_argument("Adam: dimension mismatch");
    const double lr = cfg_.rate(t_);
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < x.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * d[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * d[i] * d[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      x[i] += sign * lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }

  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

/// Adam or plain scaled-gradient stepping behind one interface.
class Stepper {
 public:
  Stepper() = default;
  Stepper(std::size_t n, StepRule rule, AdamConfig cfg) : rule_(rule), adam_(n, cfg), cfg_(cfg) {}

  void ascend(std::span<double> x, std::span<const double> d) {
    if (rule_ == StepRule::Adam) {
      adam_.ascend(x, d);
      return;
    }
    const double lr = cfg_.rate(t_++);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += lr * d[i];
  }

 private:
  StepRule rule_ = StepRule::Adam;
  Adam adam_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
};

}  // namespace sparsestein::inference
