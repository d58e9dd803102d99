#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <set>
#include <vector>

#include "sparsestein/inference/svgd.hpp"
#include "sparsestein/metrics/distance.hpp"
#include "sparsestein/metrics/lcurve.hpp"
#include "sparsestein/metrics/pushforward.hpp"
#include "toy_models.hpp"

using namespace sparsestein;
using namespace sparsestein::metrics;

namespace {

double w1(const std::vector<double>& a, const std::vector<double>& b) {
  return w1_distance(EmpiricalDist(a), EmpiricalDist(b));
}

std::vector<double> draw(std::mt19937_64& rng, std::size_t n, double spread) {
  std::normal_distribution<double> nd(0.0, spread);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

// Integral of |F_a - F_b| by evaluating both CDFs at interval midpoints of the pooled support.
double w1_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pts(a);
  pts.insert(pts.end(), b.begin(), b.end());
  std::sort(pts.begin(), pts.end());
  auto cdf = [](const std::vector<double>& s, double t) {
    return static_cast<double>(std::count_if(s.begin(), s.end(), [t](double v) { return v <= t; })) /
           static_cast<double>(s.size());
  };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double mid = 0.5 * (pts[k] + pts[k + 1]);
    total += std::abs(cdf(a, mid) - cdf(b, mid)) * (pts[k + 1] - pts[k]);
  }
  return total;
}

}  // namespace

TEST(W1, Examples) {
  EXPECT_DOUBLE_EQ(w1({0.0}, {1.0}), 1.0);
  EXPECT_DOUBLE_EQ(w1({1.0, 2.0, 3.0}, {2.0, 3.0, 4.0}), 1.0);
  EXPECT_DOUBLE_EQ(w1({0.0, 0.0}, {0.0}), 0.0);
  EXPECT_DOUBLE_EQ(w1({0.0, 2.0}, {1.0}), 1.0);
}

TEST(W1, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(EmpiricalDist(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(EmpiricalDist(std::vector<double>{1.0, std::nan("")}), NonFinite);
  EXPECT_THROW(EmpiricalDist(std::vector<double>{std::numeric_limits<double>::infinity()}), NonFinite);
}

TEST(W1, MetricProperties) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> size(1, 40);
  for (int t = 0; t < 200; ++t) {
    const auto a = draw(rng, size(rng), 1.0), b = draw(rng, size(rng), 2.0), c = draw(rng, size(rng), 0.5);
    EXPECT_EQ(w1(a, a), 0.0);
    EXPECT_GE(w1(a, b), 0.0);
    EXPECT_NEAR(w1(a, b), w1(b, a), 1e-12);
    EXPECT_LE(w1(a, c), w1(a, b) + w1(b, c) + 1e-12);
  }
}

TEST(W1, TranslationOfOneSide) {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 50; ++t) {
    auto a = draw(rng, 30, 1.0);
    auto b = a;
    const double shift = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
    for (auto& v : b) v += shift;
    EXPECT_NEAR(w1(a, b), std::abs(shift), 1e-12);
  }
}

TEST(W1, JointTranslationInvariant) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 50; ++t) {
    auto a = draw(rng, 17, 1.0), b = draw(rng, 23, 1.5);
    const double base = w1(a, b);
    for (auto& v : a) v += 2.5;
    for (auto& v : b) v += 2.5;
    EXPECT_NEAR(w1(a, b), base, 1e-12);
  }
}

TEST(W1, MatchesMidpointOracle) {
  std::mt19937_64 rng(24);
  std::uniform_int_distribution<std::size_t> size(1, 60);
  for (int t = 0; t < 200; ++t) {
    auto a = draw(rng, size(rng), 1.0), b = draw(rng, size(rng), 1.3);
    if (t % 4 == 0) b.push_back(a.front());
    const double ref = w1_oracle(a, b);
    EXPECT_LE(std::abs(w1(a, b) - ref), 1e-10 * std::max(1.0, ref));
  }
}

TEST(W1, EqualSizeIsMeanAbsoluteSortedDifference) {
  std::mt19937_64 rng(25);
  auto a = draw(rng, 50, 1.0), b = draw(rng, 50, 2.0);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < 50; ++i) s += std::abs(a[i] - b[i]);
  EXPECT_NEAR(w1(a, b), s / 50.0, 1e-12);
}

TEST(EmpiricalDist, MomentsArePopulation) {
  const EmpiricalDist d(std::vector<double>{1.0, 3.0});
  EXPECT_DOUBLE_EQ(d.mean(), 2.0);
  EXPECT_DOUBLE_EQ(d.stdev(), 1.0);
}

TEST(R2, Examples) {
  const std::vector<double> y{1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(r2_score(y, y), 1.0);
  EXPECT_DOUBLE_EQ(r2_score(y, std::vector<double>{2.0, 2.0, 2.0}), 0.0);
  EXPECT_DOUBLE_EQ(r2_score(y, std::vector<double>{1.0, 2.0, 4.0}), 0.5);
  EXPECT_THROW(r2_score(std::vector<double>{2.0, 2.0}, std::vector<double>{1.0, 2.0}), ConstantTarget);
  EXPECT_THROW(r2_score(y, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(R2, AffineInvariantAndBoundedAbove) {
  std::mt19937_64 rng(26);
  for (int t = 0; t < 100; ++t) {
    auto y = draw(rng, 20, 1.0), yhat = draw(rng, 20, 1.0);
    for (std::size_t i = 0; i < y.size(); ++i) yhat[i] = y[i] + 0.3 * yhat[i];
    const double base = r2_score(y, yhat);
    EXPECT_LE(base, 1.0);
    auto ys = y, yh = yhat;
    for (std::size_t i = 0; i < y.size(); ++i) {
      ys[i] = -2.5 * y[i] + 7.0;
      yh[i] = -2.5 * yhat[i] + 7.0;
    }
    EXPECT_NEAR(r2_score(ys, yh), base, 1e-12);
  }
}

TEST(PushForward, LinearModelMomentsAndOrder) {
  inference::PosteriorSamples s;
  s.particles = Eigen::MatrixXd(2, 4);
  s.particles << 1.0, 2.0, 3.0, 2.0, 0.0, 0.0, 1.0, -1.0;
  const toy::LineModel model(true);
  const std::vector<double> inputs{0.0, 2.0};
  const auto pf = pushforward(s, model, inputs, 0);
  ASSERT_EQ(pf.per_input.size(), 2u);
  EXPECT_DOUBLE_EQ(pf.mean[0], 0.0);
  EXPECT_DOUBLE_EQ(pf.mean[1], 4.0);
  EXPECT_EQ(pf.per_input[1].samples(), (std::vector<double>{2.0, 3.0, 4.0, 7.0}));
  EXPECT_NEAR(pf.stdev[0], std::sqrt(0.5), 1e-15);
  const auto threaded = pushforward(s, model, inputs, 0, 3);
  EXPECT_EQ(threaded.mean, pf.mean);
  EXPECT_EQ(threaded.stdev, pf.stdev);
}

TEST(PushForward, IdenticalSamplesGiveZeroSpread) {
  inference::PosteriorSamples s;
  s.particles = Eigen::MatrixXd::Constant(2, 5, 0.5);
  const auto pf = pushforward(s, toy::LineModel(true), std::vector<double>{1.0, -1.0, 3.0}, 0);
  for (double v : pf.stdev) EXPECT_EQ(v, 0.0);
  EXPECT_DOUBLE_EQ(pf.mean[2], 2.0);
}

TEST(PushForward, RejectsEmptyAndBadObservable) {
  inference::PosteriorSamples s;
  s.particles = Eigen::MatrixXd(2, 0);
  EXPECT_THROW(pushforward(s, toy::LineModel(true), std::vector<double>{1.0}, 0), std::invalid_argument);
  s.particles = Eigen::MatrixXd::Zero(2, 1);
  EXPECT_THROW(pushforward(s, toy::LineModel(true), std::vector<double>{1.0}, 1), std::out_of_range);
}

TEST(LCurve, PicksLargestLambdaWithinTolerance) {
  const auto curve = lcurve_sweep({1e-4, 1e-3, 1e-2, 1e-1}, [](double lambda) {
    const double r2 = lambda < 5e-2 ? (lambda < 5e-3 ? 0.99 : 0.985) : 0.7;
    return LCurvePoint{lambda, r2, static_cast<std::size_t>(1.0 / lambda)};
  });
  ASSERT_EQ(curve.points.size(), 4u);
  EXPECT_EQ(curve.lambda_star, 1e-2);
}

TEST(LCurve, DuplicatesTrainedOnce) {
  int calls = 0;
  const auto curve = lcurve_sweep({0.1, 0.2, 0.1, 0.2}, [&](double lambda) {
    ++calls;
    return LCurvePoint{lambda, 0.9, 3};
  });
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(curve.points.size(), 2u);
  EXPECT_EQ(curve.lambda_star, 0.2);
}

TEST(LCurve, SinglePoint) {
  const auto curve = lcurve_sweep({0.3}, [](double lambda) { return LCurvePoint{lambda, -2.0, 0}; });
  EXPECT_EQ(curve.lambda_star, 0.3);
}

TEST(LCurve, FailedPointRecorded) {
  const auto curve = lcurve_sweep({0.01, 1.0}, [](double lambda) {
    if (lambda > 0.5) throw std::runtime_error("all gates closed");
    return LCurvePoint{lambda, 0.95, 10};
  });
  EXPECT_EQ(curve.points[1].test_r2, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(curve.points[1].active_count, 0u);
  EXPECT_EQ(curve.lambda_star, 0.01);
}

TEST(LCurve, RejectsEmptyAndNonPositiveGrid) {
  auto ok = [](double l) { return LCurvePoint{l, 1.0, 1}; };
  EXPECT_THROW(lcurve_sweep({}, ok), std::invalid_argument);
  EXPECT_THROW(lcurve_sweep({0.0}, ok), std::invalid_argument);
}
