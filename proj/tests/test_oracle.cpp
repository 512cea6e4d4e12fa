#include "oracle.hpp"
#include "instances.hpp"
#include "onred/red.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace onred;

TEST(NaiveDft, DeltaHasFlatSpectrum) {
  ComplexImage delta(4, 6);
  delta(0, 0) = 1.0;
  const auto out = oracle::naive_dft2(delta);
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    EXPECT_NEAR(out.data()[j].real(), 1.0 / std::sqrt(24.0), 1e-15);
    EXPECT_NEAR(out.data()[j].imag(), 0.0, 1e-15);
  }
}

TEST(NaiveDft, InverseRoundTrip) {
  Rng rng(1);
  ComplexImage v(5, 4);
  for (Eigen::Index j = 0; j < v.size(); ++j) v.data()[j] = {rng.gaussian(), rng.gaussian()};
  const auto back = oracle::naive_dft2(oracle::naive_dft2(v), true);
  EXPECT_LT((back.data() - v.data()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(NaiveDft, SizeCap) {
  EXPECT_THROW(oracle::naive_dft2(ComplexImage(65, 64)), InvalidArgument);
}

TEST(FiniteDiff, QuadraticAndLinearForms) {
  Rng rng(2);
  const auto x = random_image<double>(rng, 3, 3, -1.0, 1.0);
  const auto quad = oracle::finite_diff_gradient([](const Image& p) { return 0.5 * p.data().squaredNorm(); }, x, 1e-3);
  EXPECT_LT((quad.data() - x.data()).cwiseAbs().maxCoeff(), 1e-9);

  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(9, -2.0, 2.0);
  const auto lin = oracle::finite_diff_gradient([&](const Image& p) { return c.dot(p.data()); }, x, 0.5);
  EXPECT_LT((lin.data() - c).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(oracle::finite_diff_gradient([](const Image&) { return 0.0; }, x, 0.0), InvalidArgument);
}

TEST(EnumerateVariance, IdenticalComponentsHaveNone) {
  Rng rng(3);
  const auto truth = random_image<double>(rng, 4, 4);
  auto set = onred::testing::cdp_set(rng, truth, 1);
  set.measurements.push_back(set.measurements[0]);
  EXPECT_EQ(oracle::enumerate_variance(set, random_image<double>(rng, 4, 4), 1), 0.0);
}

TEST(EnumerateVariance, HalvesWhenBatchDoubles) {
  Rng rng(4);
  const auto truth = random_image<double>(rng, 3, 3);
  const auto set = onred::testing::linear_gaussian_set(rng, truth, 5, 6);
  const auto x = random_image<double>(rng, 3, 3);
  EXPECT_DOUBLE_EQ(oracle::enumerate_variance(set, x, 2), oracle::enumerate_variance(set, x, 1) / 2);
}

TEST(EnumerateVariance, MatchesMonteCarloOnToyLinear) {
  // I = 4, 10^6 single draws
  Rng rng(5);
  const auto truth = random_image<double>(rng, 2, 2);
  const auto set = onred::testing::linear_gaussian_set(rng, truth, 4, 3);
  const auto x = random_image<double>(rng, 2, 2);
  const auto full = full_gradient(set, x).data();
  std::vector<Eigen::VectorXd> grads;
  for (std::size_t i = 0; i < 4; ++i) grads.push_back(component_gradient(set, i, x).data());
  Rng draw(6);
  double acc = 0.0;
  const int draws = 1'000'000;
  for (int n = 0; n < draws; ++n) acc += (grads[draw.below(4)] - full).squaredNorm();
  EXPECT_NEAR(acc / draws / oracle::enumerate_variance(set, x, 1), 1.0, 0.01);
}

TEST(EnumerateVariance, Caps) {
  Rng rng(7);
  const auto truth = random_image<double>(rng, 2, 2);
  const auto set = onred::testing::cdp_set(rng, truth, 17);
  EXPECT_THROW(oracle::enumerate_variance(set, truth, 1), InvalidArgument);
  EXPECT_THROW(oracle::enumerate_variance(set.prefix(2), truth, 0), InvalidArgument);
}

TEST(Theorem1Bound, HandArithmetic) {
  // L=1, tau=0.2, gamma=1/1.4, nu^2=1, B=10, R0=1, t=100:
  //   (1.4 / (1/1.4)) = 1.96
  //   nu^2 gamma^2 / B = 1 / (1.96 * 10)            = 0.0510204...
  //   2 gamma nu R0 / sqrt(B) = 2 / (1.4 sqrt 10)    = 0.4517539...
  //   R0^2 / t = 0.01
  //   1.96 * 0.5127743... = 1.0050377...
  const double expected = 1.96 * (1.0 / 19.6 + 2.0 / (1.4 * std::sqrt(10.0)) + 0.01);
  const double got = oracle::theorem1_bound(1.0, 0.2, 1.0 / 1.4, 1.0, 10.0, 1.0, 100.0);
  EXPECT_NEAR(got, expected, 1e-14);
  EXPECT_NEAR(got, 1.0050377, 1e-7);
}

TEST(Theorem1Bound, NoiselessLimitVanishes) {
  const double a = oracle::theorem1_bound(1.0, 0.2, 0.5, 0.0, 1.0, 2.0, 1e3);
  const double b = oracle::theorem1_bound(1.0, 0.2, 0.5, 0.0, 1.0, 2.0, 1e6);
  EXPECT_NEAR(a, 1.4 * 4.0 / (0.5 * 1e3), 1e-15);
  EXPECT_NEAR(b / a, 1e-3, 1e-12);
}

TEST(Theorem1Bound, SqrtRateWhenBatchEqualsHorizon) {
  // gamma = 1/(L + 2 tau), B = t: bound * sqrt(t) stays bounded.
  const double gamma = 1.0 / 1.4;
  double prev = 0.0;
  for (double t : {1e2, 1e4, 1e6}) {
    const double scaled = oracle::theorem1_bound(1.0, 0.2, gamma, 0.7, t, 1.5, t) * std::sqrt(t);
    const double c = 1.4 / gamma * (2.0 * gamma * std::sqrt(0.7) * 1.5) + 1.4 / gamma * (0.7 * gamma * gamma + 2.25);
    EXPECT_LE(scaled, c);
    if (prev > 0.0) {
      EXPECT_LT(scaled, prev);
    }
    prev = scaled;
  }
}

TEST(Theorem1Bound, StepSizePrecondition) {
  EXPECT_THROW(oracle::theorem1_bound(1.0, 0.2, 0.8, 1.0, 1.0, 1.0, 10.0), InvalidArgument);
  EXPECT_THROW(oracle::theorem1_bound(0.0, 0.2, 0.1, 1.0, 1.0, 1.0, 10.0), InvalidArgument);
  EXPECT_NO_THROW(oracle::theorem1_bound(1.0, 0.2, 1.0 / 1.4, 1.0, 1.0, 1.0, 10.0));
}

TEST(TvChainOracle, KnownTwoPointSolution) {
  // prox of lambda |u2 - u1| at (0, 1): shrink the gap by 2 lambda
  const Eigen::VectorXd u = oracle::tv_prox_chain_exact(Eigen::Vector2d(0.0, 1.0), 0.2);
  EXPECT_NEAR(u[0], 0.2, 1e-12);
  EXPECT_NEAR(u[1], 0.8, 1e-12);
  const Eigen::VectorXd merged = oracle::tv_prox_chain_exact(Eigen::Vector2d(0.0, 1.0), 0.6);
  EXPECT_NEAR(merged[0], 0.5, 1e-12);
  EXPECT_NEAR(merged[1], 0.5, 1e-12);
}
