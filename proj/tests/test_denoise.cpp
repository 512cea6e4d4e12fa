#include "onred/denoise.hpp"
#include "oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace onred;

namespace {

DenoiserSpec tv_spec(double lambda, int iters = 50) {
  DenoiserSpec spec;
  spec.kind = DenoiserKind::TvProx;
  spec.tv_lambda = lambda;
  spec.tv_inner_iters = iters;
  return spec;
}

DenoiserSpec kernel_spec(double alpha) {
  DenoiserSpec spec;
  spec.kind = DenoiserKind::AveragedKernel;
  spec.kernel_alpha = alpha;
  return spec;
}

}  // namespace

TEST(Denoise, IdentityReturnsInput) {
  Rng rng(1);
  const auto x = random_image<double>(rng, 7, 5);
  DenoiserSpec spec;
  spec.kind = DenoiserKind::Identity;
  EXPECT_EQ(denoise(spec, x), x);
}

TEST(Denoise, DefaultSigmaMapping) {
  DenoiserSpec spec;
  spec.sigma = 5.0;
  EXPECT_DOUBLE_EQ(spec.tv_weight(), 2.5);
  spec.tv_lambda = 0.01;
  EXPECT_DOUBLE_EQ(spec.tv_weight(), 0.01);
}

TEST(TvProx, ConstantImageIsFixed) {
  const auto c = Image::Constant(9, 6, 0.37);
  const auto out = denoise(tv_spec(2.5), c);
  EXPECT_LT((out.data() - c.data()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TvProx, ChainMatchesExactActiveSetSolution) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_image<double>(rng, 4, 1, -1.0, 1.0);
    const double lambda = 0.05 + 0.5 * rng.uniform();
    const Eigen::VectorXd expected = oracle::tv_prox_chain_exact(f.data(), lambda);
    const auto column = tv_prox(f, lambda, 20000);
    EXPECT_LT((column.data() - expected).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    const auto row = tv_prox(Image(1, 4, f.data()), lambda, 20000);
    EXPECT_LT((row.data() - expected).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
  }
}

TEST(TvProx, VanishingWeightIsNearIdentity) {
  Rng rng(3);
  const auto x = random_image<double>(rng, 16, 16);
  const auto out = denoise(tv_spec(1e-8), x);
  EXPECT_LT((out.data() - x.data()).norm(), 1e-4 * x.data().norm());
}

TEST(TvProx, ReducesTotalVariation) {
  Rng rng(4);
  const auto x = random_image<double>(rng, 12, 12);
  auto tv = [](const Image& u) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < u.height(); ++r)
      for (Eigen::Index c = 0; c < u.width(); ++c) {
        if (c + 1 < u.width()) s += std::abs(u(r, c + 1) - u(r, c));
        if (r + 1 < u.height()) s += std::abs(u(r + 1, c) - u(r, c));
      }
    return s;
  };
  EXPECT_LT(tv(denoise(tv_spec(0.1), x)), tv(x));
  // Mean is preserved: D^T q has zero sum.
  EXPECT_NEAR(denoise(tv_spec(0.1), x).data().mean(), x.data().mean(), 1e-12);
}

TEST(TvProx, NonexpansiveOnRandomPairs) {
  Rng rng(5);
  const auto spec = tv_spec(2.5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_image<double>(rng, 16, 16);
    const auto y = random_image<double>(rng, 16, 16);
    const double lhs = (denoise(spec, x).data() - denoise(spec, y).data()).norm();
    EXPECT_LE(lhs, (x.data() - y.data()).norm() * (1 + 1e-6));
  }
}

TEST(AveragedKernel, NonexpansiveAndLinear) {
  Rng rng(6);
  for (double alpha : {0.0, 0.3, 1.0}) {
    const auto spec = kernel_spec(alpha);
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = random_image<double>(rng, 16, 16, -1.0, 1.0);
      const auto y = random_image<double>(rng, 16, 16, -1.0, 1.0);
      const auto dx = denoise(spec, x);
      const auto dy = denoise(spec, y);
      EXPECT_LE((dx.data() - dy.data()).norm(), (x.data() - y.data()).norm() + 1e-12);
      const double a = rng.gaussian(), b = rng.gaussian();
      const auto mix = denoise(spec, x.with_data(a * x.data() + b * y.data()));
      EXPECT_LT((mix.data() - (a * dx.data() + b * dy.data())).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(AveragedKernel, PreservesConstantsAndHandlesThinGrids) {
  const auto c = Image::Constant(5, 1, 2.0);
  EXPECT_LT((denoise(kernel_spec(0.2), c).data().array() - 2.0).abs().maxCoeff(), 1e-15);
  const auto single = Image::Constant(1, 1, 3.0);
  EXPECT_EQ(box3_filter(single).data()[0], 3.0);
}

TEST(AveragedKernel, FloatScalar) {
  Rng rng(7);
  const auto x = random_image<float>(rng, 6, 6);
  const auto out = denoise(kernel_spec(0.5), x);
  EXPECT_LE(out.data().norm(), x.data().norm() * (1.0f + 1e-6f));
}

TEST(ResidualOperator, VanishesForIdentityZeroTauAndConstants) {
  Rng rng(8);
  const auto x = random_image<double>(rng, 6, 6);
  DenoiserSpec identity;
  identity.kind = DenoiserKind::Identity;
  EXPECT_EQ(residual_operator_H(identity, 0.7, x).data().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(residual_operator_H(tv_spec(2.5), 0.0, x).data().cwiseAbs().maxCoeff(), 0.0);
  const auto c = Image::Constant(6, 6, 0.4);
  EXPECT_LT(residual_operator_H(tv_spec(2.5), 0.2, c).data().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ResidualOperator, ScalesWithTau) {
  Rng rng(9);
  const auto x = random_image<double>(rng, 6, 6);
  const auto spec = kernel_spec(0.25);
  const Eigen::VectorXd expected = 0.3 * (x.data() - denoise(spec, x).data());
  EXPECT_LT((residual_operator_H(spec, 0.3, x).data() - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RedRegularizer, ZeroCases) {
  Rng rng(10);
  const auto x = random_image<double>(rng, 4, 4);
  DenoiserSpec identity;
  identity.kind = DenoiserKind::Identity;
  EXPECT_EQ(red_regularizer_value(identity, 0.5, x), 0.0);
  EXPECT_EQ(red_regularizer_value(kernel_spec(0.5), 0.0, x), 0.0);
}

TEST(RedRegularizer, TwoByTwoKernelQuadraticForm) {
  // 2x2 box filter with mirrored border, expanded by hand:
  //   (Kx)_00 = (4a + 2b + 2c + d) / 9, and symmetric permutations.
  const double a = 1.0, b = 2.0, c = -1.0, d = 0.5, tau = 0.2;
  const double k00 = (4 * a + 2 * b + 2 * c + d) / 9;
  const double k01 = (2 * a + 4 * b + c + 2 * d) / 9;
  const double k10 = (2 * a + b + 4 * c + 2 * d) / 9;
  const double k11 = (a + 2 * b + 2 * c + 4 * d) / 9;
  const double xx = a * a + b * b + c * c + d * d;
  const double xkx = a * k00 + b * k01 + c * k10 + d * k11;
  const double expected = tau / 2 * (xx - (0.5 * xx + 0.5 * xkx));

  const Image x(2, 2, Eigen::Vector4d(a, b, c, d));
  EXPECT_NEAR(red_regularizer_value(kernel_spec(0.5), tau, x), expected, 1e-15);
}

TEST(Denoise, RejectsBadInputs) {
  Image x(3, 3);
  x(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(denoise(kernel_spec(0.5), x), InvalidArgument);
  EXPECT_THROW(kernel_spec(1.5).validate(), InvalidArgument);
  EXPECT_THROW(tv_spec(0.1, 0).validate(), InvalidArgument);
  EXPECT_THROW(parse_denoiser_kind("bm3d"), InvalidArgument);
}
