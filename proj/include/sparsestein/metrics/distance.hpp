#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsestein/error.hpp"

namespace sparsestein::metrics {

/// Sorted, finite, non-empty sample set.
class EmpiricalDist {
 public:
  explicit EmpiricalDist(std::vector<double> samples) : x_(std::move(samples)) {
    if (x_.empty()) throw std::invalid_argument("empirical distribution needs at least one sample");
    for (double v : x_)
      if (!std::isfinite(v)) throw NonFinite("empirical distribution sample is not finite");
    std::sort(x_.begin(), x_.end());
  }
  explicit EmpiricalDist(std::span<const double> samples) : EmpiricalDist(std::vector<double>(samples.begin(), samples.end())) {}

  const std::vector<double>& samples() const { return x_; }
  std::size_t size() const { return x_.size(); }

  double mean() const {
    double s = 0.0;
    for (double v : x_) s += v;
    return s / static_cast<double>(x_.size());
  }

  /// Population standard deviation.
  double stdev() const {
    const double m = mean();
    double s = 0.0;
    for (double v : x_) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x_.size()));
  }

 private:
  std::vector<double> x_;
};

/// Integral of |F_a - F_b| for the two empirical CDFs, evaluated exactly by
/// merging the sorted samples.
inline double w1_distance(const EmpiricalDist& a, const EmpiricalDist& b) {
  const auto& x = a.samples();
  const auto& y = b.samples();
  const std::size_t n = x.size(), m = y.size();
  const double inv_n = 1.0 / static_cast<double>(n), inv_m = 1.0 / static_cast<double>(m);
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0;
  double prev = std::min(x[0], y[0]);
  double total = 0.0;
  while (i < n || j < m) {
    const double next = (j >= m || (i < n && x[i] <= y[j])) ? x[i] : y[j];
    total += std::abs(fa - fb) * (next - prev);
    prev = next;
    while (i < n && x[i] == next) ++i;
    while (j < m && y[j] == next) ++j;
    fa = static_cast<double>(i) * inv_n;
    fb = static_cast<double>(j) * inv_m;
  }
  return total;
}

/// 1 - SS_res / SS_tot.
inline double r2_score(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("r2_score: length mismatch");
  if (y.size() < 2) throw std::invalid_argument("r2_score: at least two points required");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw ConstantTarget("r2_score: target is constant");
  return 1.0 - ss_res / ss_tot;
}

}  // namespace sparsestein::metrics
