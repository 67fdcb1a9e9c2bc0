#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"
#include "rqvqa/error.hpp"
#include "rqvqa/loss.hpp"

using namespace rqvqa;

namespace {

std::vector<double> normal_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST(PlccLoss, PerfectAndInverted) {
  const std::vector<double> q{1.0, 4.0, 2.0, 5.0, 3.5};
  EXPECT_NEAR(plcc_loss(q, q), 0.0, 1e-8);
  std::vector<double> neg(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) neg[i] = 7.0 - q[i];
  EXPECT_NEAR(plcc_loss(neg, q), 1.0, 1e-8);
}

TEST(PlccLoss, WorkedExample) {
  const std::vector<double> p{1, 2, 3, 4}, q{1, -1, 1, -1};
  const double rho = oracle::pearson(p, q);
  EXPECT_NEAR(rho, -1.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(plcc_loss(p, q), (1.0 - rho) / 2.0, 1e-8);
  EXPECT_NEAR(plcc_loss(p, q), 0.7236, 5e-5);
}

TEST(PlccLoss, RangeShiftAndScale) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 10;
    auto p = normal_vec(n, rng), q = normal_vec(n, rng);
    const double l = plcc_loss(p, q);
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 1.0);
    auto shifted = p;
    for (double& x : shifted) x += 3.25;
    EXPECT_NEAR(plcc_loss(shifted, q), l, 1e-12);
    auto scaled = p;
    for (double& x : scaled) x *= 2.0;
    EXPECT_LT(std::abs(plcc_loss(scaled, q) - l), 1e-6);
  }
}

TEST(PlccLoss, ZeroExactlyForPositiveAffine) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> a(0.1, 5.0), b(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto q = normal_vec(6, rng);
    std::vector<double> p(q.size());
    const double s = a(rng), t = b(rng);
    for (std::size_t i = 0; i < q.size(); ++i) p[i] = s * q[i] + t;
    EXPECT_LT(plcc_loss(p, q), 1e-7);
    p[trial % 6] += s;
    EXPECT_GT(plcc_loss(p, q), 1e-4);
  }
}

TEST(PlccLossGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = normal_vec(6, rng), q = normal_vec(6, rng);
    const auto g = plcc_loss_grad(p, q);
    const auto num = oracle::numeric_gradient([&](const std::vector<double>& x) { return plcc_loss(x, q); }, p);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LT(oracle::rel_error(g[i], num[i], 1e-4), 1e-6) << i;
  }
}

TEST(PlccLossGrad, OrthogonalToOnesAndZeroAtOptimum) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = normal_vec(7, rng), q = normal_vec(7, rng);
    const auto g = plcc_loss_grad(p, q);
    EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0), 0.0, 1e-14);
    for (double x : plcc_loss_grad(q, q)) EXPECT_NEAR(x, 0.0, 1e-8);
  }
}

TEST(PlccLoss, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2}, one{1};
  EXPECT_THROW(plcc_loss(a, b), Error);
  EXPECT_THROW(plcc_loss(one, one), Error);
  EXPECT_THROW(plcc_loss_grad(a, b), Error);
  EXPECT_THROW(plcc_loss_grad(one, one), Error);
}

TEST(PlccLoss, ConstantInputsStayFinite) {
  const std::vector<double> c{2, 2, 2, 2}, q{1, 2, 3, 4};
  EXPECT_NEAR(plcc_loss(c, q), 0.5, 1e-12);
  for (double x : plcc_loss_grad(c, q)) EXPECT_TRUE(std::isfinite(x));
}

TEST(MseLoss, ValueAndGradient) {
  const std::vector<double> p{1, 2, 3}, q{2, 2, 5};
  EXPECT_DOUBLE_EQ(mse_loss(p, q), 5.0 / 3.0);
  std::mt19937_64 rng(45);
  const auto x = normal_vec(5, rng), y = normal_vec(5, rng);
  const auto g = mse_loss_grad(x, y);
  const auto num = oracle::numeric_gradient([&](const std::vector<double>& v) { return mse_loss(v, y); }, x);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LT(oracle::rel_error(g[i], num[i], 1e-4), 1e-6);
}
