#include <gtest/gtest.h>

#include <cmath>

#include "byzef/dataset.hpp"
#include "byzef/errors.hpp"
#include "byzef/loss.hpp"

using namespace byzef;

namespace {

Example ex(DenseVector a, int b) { return {SparseDelta::from_dense(a), b}; }

std::vector<Example> random_batch(RngStream& rng, std::size_t m, std::size_t d) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < m; ++i) {
    DenseVector a(d);
    for (auto& v : a) v = rng.normal();
    out.push_back(ex(a, rng.uniform01() < 0.5 ? 1 : -1));
  }
  return out;
}

}  // namespace

TEST(Softplus, StableAtExtremes) {
  EXPECT_DOUBLE_EQ(softplus(0.0), std::log(2.0));
  EXPECT_EQ(softplus(-800.0), 0.0);
  EXPECT_GE(softplus(-40.0), 0.0);
  EXPECT_LE(softplus(-40.0), 1e-15);
  EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_TRUE(std::isfinite(sigmoid(-1000.0)));
  EXPECT_EQ(sigmoid(1000.0), 1.0);
}

TEST(Loss, ZeroModelGivesLn2) {
  RngStream rng(1);
  const auto batch = random_batch(rng, 5, 3);
  EXPECT_NEAR(logistic_loss(DenseVector(3, 0.0), batch, 0.0), std::log(2.0), 1e-15);
}

TEST(Loss, LargeMarginDoesNotOverflow) {
  const std::vector<Example> batch{ex({40.0}, 1)};
  const double v = logistic_loss(DenseVector{1.0}, batch, 0.0);
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1e-15);
  const std::vector<Example> wrong{ex({40.0}, -1)};
  EXPECT_NEAR(logistic_loss(DenseVector{1.0}, wrong, 0.0), 40.0, 1e-12);
}

TEST(Loss, RegularizerTerm) {
  const std::vector<Example> batch{ex({0.0, 0.0}, 1)};
  EXPECT_DOUBLE_EQ(logistic_loss(DenseVector{1, 1}, batch, 1.0), std::log(2.0) + 2.0);
}

TEST(Loss, EmptyBatchThrows) {
  const std::vector<Example> none;
  EXPECT_THROW(logistic_loss(DenseVector{1.0}, none, 0.0), ArgumentError);
  EXPECT_THROW(logistic_grad(DenseVector{1.0}, none, 0.0), ArgumentError);
}

TEST(Grad, Examples) {
  const std::vector<Example> one{ex({1, 2}, 1)};
  EXPECT_EQ(logistic_grad(DenseVector{0, 0}, one, 0.0), (DenseVector{-0.5, -1}));
  const std::vector<Example> zero_row{ex({0, 0}, -1)};
  EXPECT_EQ(logistic_grad(DenseVector{0.5, -2}, zero_row, 0.3), (DenseVector{2 * 0.3 * 0.5, 2 * 0.3 * -2}));
}

TEST(Grad, FlippedLabelsNegateAtZero) {
  RngStream rng(4);
  const auto batch = random_batch(rng, 6, 4);
  const auto g = logistic_grad(DenseVector(4, 0.0), batch, 0.0);
  const auto gf = logistic_grad(DenseVector(4, 0.0), batch, 0.0, true);
  for (int j = 0; j < 4; ++j) EXPECT_EQ(gf[j], -g[j]);
}

TEST(Grad, BatchOverloadMatchesSpan) {
  RngStream rng(5);
  const auto data = random_batch(rng, 4, 3);
  Batch b;
  for (const auto& e : data) b.push_back(&e);
  const DenseVector x{0.3, -0.1, 2};
  EXPECT_EQ(logistic_grad(x, b, 0.2), logistic_grad(x, data, 0.2));
  EXPECT_EQ(logistic_loss(x, b, 0.2), logistic_loss(x, data, 0.2));
}

TEST(Grad, FiniteDifferenceAgreement) {
  RngStream rng(99);
  const double h = 1e-5;
  int failures = 0;
  for (int probe = 0; probe < 100; ++probe) {
    const std::size_t d = 1 + rng.uniform_below(8);
    const auto batch = random_batch(rng, 1 + rng.uniform_below(6), d);
    const double lambda = rng.uniform01();
    DenseVector x(d);
    for (auto& v : x) v = rng.normal();
    const auto g = logistic_grad(x, batch, lambda);
    DenseVector fd(d);
    for (std::size_t j = 0; j < d; ++j) {
      DenseVector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      fd[j] = (logistic_loss(xp, batch, lambda) - logistic_loss(xm, batch, lambda)) / (2 * h);
    }
    const double rel = std::sqrt(dist_sq(fd, g)) / std::max(1e-8, std::sqrt(norm_sq(g)));
    if (rel > 1e-6) ++failures;
  }
  EXPECT_EQ(failures, 0);
}

TEST(Loss, MidpointConvexity) {
  RngStream rng(7);
  for (int t = 0; t < 500; ++t) {
    const auto batch = random_batch(rng, 5, 3);
    const double lambda = rng.uniform01();
    DenseVector x(3), y(3), mid(3);
    for (int j = 0; j < 3; ++j) {
      x[j] = rng.normal() * 3;
      y[j] = rng.normal() * 3;
      mid[j] = 0.5 * (x[j] + y[j]);
    }
    EXPECT_LE(logistic_loss(mid, batch, lambda),
              0.5 * (logistic_loss(x, batch, lambda) + logistic_loss(y, batch, lambda)) + 1e-12);
  }
}

TEST(Smoothness, Bound) {
  const std::vector<Example> batch{ex({3, 4}, 1), ex({1, 0}, -1)};
  EXPECT_DOUBLE_EQ(logistic_smoothness_bound(batch, 0.5), 25.0 / 4.0 + 1.0);
}

TEST(Minimize, Quadratic) {
  // f(x) = 0.5 * sum c_j (x_j - t_j)^2
  const DenseVector c{1, 10}, t{3, -2};
  auto grad = [&](const DenseVector& x) {
    DenseVector g(2);
    for (int j = 0; j < 2; ++j) g[j] = c[j] * (x[j] - t[j]);
    return g;
  };
  const auto r = minimize_strongly_convex(grad, DenseVector{0, 0}, 10.0, 1.0, 1e-12, 100000);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 3.0, 1e-11);
  EXPECT_NEAR(r.x[1], -2.0, 1e-11);
}
