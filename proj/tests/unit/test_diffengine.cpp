#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "sparsestein/diff/evaluate.hpp"
#include "sparsestein/diff/expr.hpp"

using namespace sparsestein;
using namespace sparsestein::diff;

namespace {

double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Random expression over 2 inputs and 3 params, kept in the domain of every op.
Ex random_graph(GraphBuilder& b, std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, 6);
  if (depth == 0) {
    std::uniform_int_distribution<int> leaf(0, 4);
    const int k = leaf(rng);
    return k < 2 ? b.input(static_cast<std::size_t>(k)) : b.param(static_cast<std::size_t>(k - 2));
  }
  const Ex l = random_graph(b, rng, depth - 1);
  const Ex r = random_graph(b, rng, depth - 1);
  switch (pick(rng)) {
    case 0: return l + r;
    case 1: return l * r;
    case 2: return softplus(l);
    case 3: return sigmoid(l) * r;
    case 4: return log(1.0 + softplus(l));
    case 5: return exp(0.1 * l);
    default: return recip(1.0 + exp(r));
  }
}

}  // namespace

TEST(Evaluate, SoftplusAtZero) {
  GraphBuilder b;
  const Expr e = b.finish({softplus(b.input(0))});
  const std::vector<double> x{0.0};
  EXPECT_NEAR(evaluate(e, x, {}), std::log(2.0), 1e-15);
  EXPECT_NEAR(evaluate(e, x, {}), 0.693147, 1e-6);
}

TEST(Evaluate, SumOfSquares) {
  GraphBuilder b;
  const Ex x1 = b.input(0), x2 = b.input(1);
  const Expr e = b.finish({x1 * x1 + x2 * x2});
  EXPECT_DOUBLE_EQ(evaluate(e, std::vector<double>{1.0, 2.0}, {}), 5.0);
}

TEST(Evaluate, LogOfZeroIsDomainError) {
  GraphBuilder b;
  const Expr e = b.finish({log(b.input(0))});
  EXPECT_THROW(evaluate(e, std::vector<double>{0.0}, {}), DomainError);
}

TEST(Evaluate, MissingBindingIsUnboundLeaf) {
  GraphBuilder b;
  const Expr e = b.finish({b.input(0) * b.param(0)});
  EXPECT_THROW(evaluate(e, std::vector<double>{1.0}, {}), UnboundLeaf);
  EXPECT_THROW(evaluate(e, {}, std::vector<double>{1.0}), UnboundLeaf);
}

TEST(Evaluate, SoftplusStableForLargeArguments) {
  GraphBuilder b;
  const Expr e = b.finish({softplus(b.input(0))});
  EXPECT_DOUBLE_EQ(evaluate(e, std::vector<double>{800.0}, {}), 800.0);
  EXPECT_GT(evaluate(e, std::vector<double>{-800.0}, {}), -1e-300);
  EXPECT_TRUE(std::isfinite(evaluate(e, std::vector<double>{-800.0}, {})));
}

TEST(Evaluate, Deterministic) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    GraphBuilder b;
    const Expr e = b.finish({random_graph(b, rng, 4)});
    const std::vector<double> x{0.3, -0.7}, p{0.5, 1.5, -0.2};
    const double a = evaluate(e, x, p);
    const double c = evaluate(e, x, p);
    EXPECT_EQ(std::memcmp(&a, &c, sizeof(double)), 0);
  }
}

TEST(InputDerivative, SoftplusSlopeAtZero) {
  GraphBuilder b;
  const Expr e = b.finish({softplus(b.input(0))});
  const auto d = input_derivative(e, std::vector<double>{0.0}, {}, 0);
  EXPECT_DOUBLE_EQ(d.tangent, 0.5);
  EXPECT_NEAR(d.value, std::log(2.0), 1e-15);
}

TEST(InputDerivative, Square) {
  GraphBuilder b;
  const Ex x = b.input(0);
  const Expr e = b.finish({x * x});
  EXPECT_DOUBLE_EQ(input_derivative(e, std::vector<double>{3.0}, {}, 0).tangent, 6.0);
}

TEST(InputDerivative, ChainRuleThroughParameter) {
  GraphBuilder b;
  const Expr e = b.finish({softplus(b.param(0) * b.input(0))});
  const auto d = input_derivative(e, std::vector<double>{1.0}, std::vector<double>{2.0}, 0);
  EXPECT_NEAR(d.tangent, 2.0 * ref_sigmoid(2.0), 1e-15);
  EXPECT_NEAR(d.tangent, 1.76159, 1e-5);
}

TEST(InputDerivative, ConstantAndSeedTangents) {
  GraphBuilder b;
  const Ex x = b.input(0);
  const Ex y = b.input(1);
  const Expr e = b.finish({x, y, b.constant(4.0) + 0.0 * x});
  Evaluator ev(e);
  EXPECT_EQ(ev.forward_tangent(std::vector<double>{1.0, 2.0}, {}, 0, 0).tangent, 1.0);
  EXPECT_EQ(ev.forward_tangent(std::vector<double>{1.0, 2.0}, {}, 0, 1).tangent, 0.0);
  EXPECT_EQ(ev.forward_tangent(std::vector<double>{1.0, 2.0}, {}, 0, 2).tangent, 0.0);
}

TEST(InputDerivative, UndeclaredDirectionRejected) {
  GraphBuilder b;
  const Expr e = b.finish({b.input(0)});
  EXPECT_THROW(input_derivative(e, std::vector<double>{1.0}, {}, 1), std::out_of_range);
}

TEST(ParamGradient, SquaredProduct) {
  GraphBuilder b;
  const Ex wx = b.param(0) * b.input(0);
  const Expr e = b.finish({wx * wx});
  const auto g = param_gradient(e, std::vector<double>{2.0}, std::vector<double>{1.0});
  ASSERT_EQ(g.size(), 1u);
  EXPECT_DOUBLE_EQ(g[0], 8.0);
}

TEST(ParamGradient, NestedTangentThenReverse) {
  // d/dw [ d/dx softplus(w x) ] at x = 1, w = 0 is sigma(0) = 0.5
  GraphBuilder b;
  const Ex f = softplus(b.param(0) * b.input(0));
  const Expr e = b.finish({b.tangent(f, 0)});
  const auto g = param_gradient(e, std::vector<double>{1.0}, std::vector<double>{0.0});
  EXPECT_DOUBLE_EQ(g[0], 0.5);
}

TEST(ParamGradient, ConstantExpressionGivesZero) {
  GraphBuilder b;
  b.param(0);
  b.param(1);
  const Expr e = b.finish({b.constant(3.0)});
  const auto g = param_gradient(e, {}, std::vector<double>{1.0, 2.0});
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
}

TEST(ParamGradient, NonFiniteRejected) {
  GraphBuilder b;
  const Expr e = b.finish({b.param(0) * b.param(0)});
  EXPECT_THROW(param_gradient(e, {}, std::vector<double>{std::numeric_limits<double>::infinity()}), NonFinite);
}

TEST(ParamGradient, MinMaxSubgradientTiesPassThrough) {
  GraphBuilder b;
  const Ex w = b.param(0);
  const Expr lo = b.finish({min(w, b.constant(1.0))});
  GraphBuilder b2;
  const Expr hi = b2.finish({max(b2.param(0), b2.constant(0.0))});
  EXPECT_EQ(param_gradient(lo, {}, std::vector<double>{1.0})[0], 1.0);
  EXPECT_EQ(param_gradient(lo, {}, std::vector<double>{2.0})[0], 0.0);
  EXPECT_EQ(param_gradient(hi, {}, std::vector<double>{0.0})[0], 1.0);
  EXPECT_EQ(param_gradient(hi, {}, std::vector<double>{-1.0})[0], 0.0);
}

TEST(CheckGradient, QuadraticExact) {
  auto f = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; };
  const std::vector<double> x{1.0, 2.0, 3.0}, g{2.0, 4.0, 6.0};
  EXPECT_LT(check_gradient(f, g, x, 1e-6), 1e-8);
}

TEST(CheckGradient, Softplus) {
  auto f = [](std::span<const double> x) { return softplus(x[0]); };
  const std::vector<double> x{0.0}, g{0.5};
  EXPECT_LT(check_gradient(f, g, x, 1e-6), 1e-6);
}

TEST(CheckGradient, ZeroStepRejected) {
  auto f = [](std::span<const double> x) { return x[0]; };
  const std::vector<double> x{0.0}, g{1.0};
  EXPECT_THROW(check_gradient(f, g, x, 0.0), std::invalid_argument);
}

TEST(Properties, GradientIsLinear) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    GraphBuilder b;
    const Ex f = random_graph(b, rng, 3);
    const Ex g = random_graph(b, rng, 3);
    const double alpha = u(rng), beta = u(rng);
    b.param(0);
    b.param(1);
    b.param(2);
    const Expr ef = b.finish({f, g, alpha * f + beta * g});
    const std::vector<double> x{u(rng), u(rng)}, p{u(rng), u(rng), u(rng)};
    Evaluator ev(ef);
    ev.forward(x, p);
    std::vector<double> gf(3), gg(3), gc(3);
    ev.backward(std::vector<double>{1, 0, 0}, gf);
    ev.backward(std::vector<double>{0, 1, 0}, gg);
    ev.backward(std::vector<double>{0, 0, 1}, gc);
    for (int i = 0; i < 3; ++i)
      EXPECT_NEAR(gc[i], alpha * gf[i] + beta * gg[i], 1e-13 * (1.0 + std::abs(gc[i])));
  }
}

TEST(Properties, TangentMatchesFiniteDifference) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    GraphBuilder b;
    const Ex f = random_graph(b, rng, 4);
    b.input(0);
    b.input(1);
    b.param(0);
    b.param(1);
    b.param(2);
    const Ex df = b.tangent(f, 1);
    const Expr e = b.finish({f, df});
    const std::vector<double> p{u(rng), u(rng), u(rng)};
    std::vector<double> x{u(rng), u(rng)};
    Evaluator ev(e);
    ev.forward(x, p);
    const double symbolic = ev.output(1);
    const double dual = ev.forward_tangent(x, p, 1, 0).tangent;
    EXPECT_NEAR(symbolic, dual, 1e-12 * (1.0 + std::abs(dual)));
    auto fx = [&](std::span<const double> xx) { return evaluate(e, xx, p); };
    const std::vector<double> g{ev.forward_tangent(x, p, 0, 0).tangent, dual};
    EXPECT_LT(check_gradient(fx, g, x, 1e-6), 1e-5);
  }
}

TEST(Properties, NestedGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    GraphBuilder b;
    const Ex f = random_graph(b, rng, 4);
    b.input(0);
    b.input(1);
    for (std::size_t i = 0; i < 3; ++i) b.param(i);
    const Ex obs = b.tangent(f, 0);
    const Expr e = b.finish({obs * obs});
    const std::vector<double> x{u(rng), u(rng)};
    std::vector<double> p{u(rng), u(rng), u(rng)};
    const auto g = param_gradient(e, x, p);
    auto fp = [&](std::span<const double> pp) { return evaluate(e, x, pp); };
    EXPECT_LT(check_gradient(fp, g, p, 1e-6), 1e-5);
  }
}
