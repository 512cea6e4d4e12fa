#pragma once

#include "onred/core.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace onred {

enum class DenoiserKind { Identity, TvProx, AveragedKernel };

inline std::string_view to_string(DenoiserKind kind) {
  switch (kind) {
    case DenoiserKind::Identity: return "identity";
    case DenoiserKind::TvProx: return "tv";
    case DenoiserKind::AveragedKernel: return "kernel";
  }
  return "?";
}

inline DenoiserKind parse_denoiser_kind(std::string_view name) {
  if (name == "identity") return DenoiserKind::Identity;
  if (name == "tv" || name == "tv-prox" || name == "tv_prox") return DenoiserKind::TvProx;
  if (name == "kernel" || name == "averaged-kernel" || name == "averaged_kernel")
    return DenoiserKind::AveragedKernel;
  throw InvalidArgument("unknown denoiser '" + std::string(name) + "'");
}

struct DenoiserSpec {
  DenoiserKind kind = DenoiserKind::TvProx;
  double sigma = 5.0;
  int tv_inner_iters = 50;
  double kernel_alpha = 0.5;
  /// Overrides the default sigma -> prox weight mapping when set.
  std::optional<double> tv_lambda;

  /// Prox weight of TV_PROX; 0.1 * sigma^2 unless overridden.
  double tv_weight() const { return tv_lambda ? *tv_lambda : 0.1 * sigma * sigma; }

  void validate() const {
    if (!(sigma >= 0.0)) throw InvalidArgument("denoiser sigma must be nonnegative");
    if (tv_inner_iters < 1) throw InvalidArgument("tv_inner_iters must be >= 1");
    if (!(kernel_alpha >= 0.0 && kernel_alpha <= 1.0)) throw InvalidArgument("kernel_alpha must lie in [0, 1]");
    if (tv_lambda && !(*tv_lambda >= 0.0)) throw InvalidArgument("tv_lambda must be nonnegative");
  }
};

namespace detail {

// Forward differences with Neumann (mirrored) boundary: the difference across
// the last row/column is zero. Output layout: [horizontal | vertical].
template <typename Scalar>
void tv_gradient(const VectorX<Scalar>& u, Eigen::Index h, Eigen::Index w, VectorX<Scalar>& out) {
  const Eigen::Index n = h * w;
  out.resize(2 * n);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      const Eigen::Index j = r * w + c;
      out[j] = c + 1 < w ? u[j + 1] - u[j] : Scalar(0);
      out[n + j] = r + 1 < h ? u[j + w] - u[j] : Scalar(0);
    }
}

// Adjoint of tv_gradient (negative divergence).
template <typename Scalar>
void tv_gradient_adjoint(const VectorX<Scalar>& p, Eigen::Index h, Eigen::Index w, VectorX<Scalar>& out) {
  const Eigen::Index n = h * w;
  out.setZero(n);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      const Eigen::Index j = r * w + c;
      if (c + 1 < w) {
        out[j] -= p[j];
        out[j + 1] += p[j];
      }
      if (r + 1 < h) {
        out[j] -= p[n + j];
        out[j + w] += p[n + j];
      }
    }
}

}  // namespace detail

/// prox of lambda * anisotropic TV:  argmin_u 1/2||u - f||^2 + lambda ||D u||_1.
///
/// Projected gradient on the dual, u = f - D^T q with |q| <= lambda elementwise,
/// step 1/8 (||D||^2 <= 8 in 2D), started from q = 0.
template <typename Scalar>
ImageGrid<Scalar> tv_prox(const ImageGrid<Scalar>& f, Scalar lambda, int iterations) {
  if (lambda < Scalar(0)) throw InvalidArgument("tv weight must be nonnegative");
  if (lambda == Scalar(0)) return f;
  const Eigen::Index h = f.height();
  const Eigen::Index w = f.width();
  const Scalar step = Scalar(1) / Scalar(8);

  VectorX<Scalar> q = VectorX<Scalar>::Zero(2 * h * w);
  VectorX<Scalar> u = f.data();
  VectorX<Scalar> du;
  VectorX<Scalar> dtq;
  for (int it = 0; it < iterations; ++it) {
    detail::tv_gradient(u, h, w, du);
    q = (q + step * du).cwiseMax(-lambda).cwiseMin(lambda);
    detail::tv_gradient_adjoint(q, h, w, dtq);
    u = f.data() - dtq;
  }
  return f.with_data(u);
}

/// Normalized 3x3 box filter, half-sample symmetric boundary. Separable,
/// symmetric and doubly stochastic, hence ||K|| <= 1.
template <typename Scalar>
ImageGrid<Scalar> box3_filter(const ImageGrid<Scalar>& x) {
  const Eigen::Index h = x.height();
  const Eigen::Index w = x.width();
  auto clampi = [](Eigen::Index i, Eigen::Index n) { return i < 0 ? Eigen::Index(0) : (i >= n ? n - 1 : i); };
  ImageGrid<Scalar> rows(h, w);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c)
      rows(r, c) = (x(r, clampi(c - 1, w)) + x(r, c) + x(r, clampi(c + 1, w))) / Scalar(3);
  ImageGrid<Scalar> out(h, w);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c)
      out(r, c) = (rows(clampi(r - 1, h), c) + rows(r, c) + rows(clampi(r + 1, h), c)) / Scalar(3);
  return out;
}

template <typename Scalar>
ImageGrid<Scalar> denoise(const DenoiserSpec& spec, const ImageGrid<Scalar>& x) {
  require_finite(x, "denoiser input");
  switch (spec.kind) {
    case DenoiserKind::Identity:
      return x;
    case DenoiserKind::TvProx:
      return tv_prox(x, static_cast<Scalar>(spec.tv_weight()), spec.tv_inner_iters);
    case DenoiserKind::AveragedKernel: {
      const auto alpha = static_cast<Scalar>(spec.kernel_alpha);
      return x.with_data(alpha * x.data() + (Scalar(1) - alpha) * box3_filter(x).data());
    }
  }
  throw InvalidArgument("unknown denoiser kind");
}

/// H(x) = tau (x - D_sigma(x))
template <typename Scalar>
ImageGrid<Scalar> residual_operator_H(const DenoiserSpec& spec, Scalar tau, const ImageGrid<Scalar>& x) {
  if (tau == Scalar(0)) return x.with_data(VectorX<Scalar>::Zero(x.size()));
  return x.with_data(tau * (x.data() - denoise(spec, x).data()));
}

/// tau/2 x^T (x - D(x)). Diagnostic only: it is the RED regularizer just when
/// the denoiser is locally homogeneous with a symmetric Jacobian.
template <typename Scalar>
Scalar red_regularizer_value(const DenoiserSpec& spec, Scalar tau, const ImageGrid<Scalar>& x) {
  if (tau == Scalar(0)) return Scalar(0);
  return tau / Scalar(2) * x.data().dot(x.data() - denoise(spec, x).data());
}

}  // namespace onred
