#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sparsestein::metrics {

struct LCurvePoint {
  double lambda = 0.0;
  double test_r2 = 0.0;
  std::size_t active_count = 0;
};

struct LCurve {
  std::vector<LCurvePoint> points;
  double lambda_star = 0.0;
};

/// Trains one model per distinct lambda through `recipe`. A recipe that throws
/// is recorded with R^2 = -infinity. lambda* is the largest lambda whose R^2 is
/// within `tolerance` of the best.
inline LCurve lcurve_sweep(const std::vector<double>& grid, const std::function<LCurvePoint(double)>& recipe,
                           double tolerance = 0.01) {
  LCurve out;
  std::vector<double> seen;
  for (double lambda : grid) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lcurve grid entries must be positive");
    if (std::find(seen.begin(), seen.end(), lambda) != seen.end()) continue;
    seen.push_back(lambda);
    LCurvePoint p;
    try {
      p = recipe(lambda);
    } catch (const std::exception&) {
      p.test_r2 = -std::numeric_limits<double>::infinity();
      p.active_count = 0;
    }
    p.lambda = lambda;
    out.points.push_back(p);
  }
  if (out.points.empty()) throw std::invalid_argument("lcurve grid is empty");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : out.points) best = std::max(best, p.test_r2);
  out.lambda_star = out.points.front().lambda;
  bool found = false;
  for (const auto& p : out.points)
    if (p.test_r2 >= best - tolerance && (!found || p.lambda > out.lambda_star)) {
      out.lambda_star = p.lambda;
      found = true;
    }
  return out;
}

}  // namespace sparsestein::metrics
