#pragma once

#include "onred/core.hpp"
#include "onred/fft.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <variant>
#include <vector>

namespace onred {

// ---------------------------------------------------------------------------
// Coded diffraction patterns

/// Unit-modulus random phase mask, regenerable from its seed.
template <typename Scalar>
struct CdpMask {
  std::uint64_t seed = 0;
  ComplexGrid<Scalar> phases;

  Eigen::Index height() const { return phases.height(); }
  Eigen::Index width() const { return phases.width(); }
};

/// exp(i 2 pi u), u ~ U[0,1), drawn in row-major order from `rng`.
template <typename Scalar = double>
CdpMask<Scalar> cdp_mask_generate(Rng& rng, Eigen::Index height, Eigen::Index width) {
  CdpMask<Scalar> mask{0, ComplexGrid<Scalar>(height, width)};
  for (Eigen::Index j = 0; j < mask.phases.size(); ++j) {
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    mask.phases.data()[j] = std::complex<Scalar>(static_cast<Scalar>(std::cos(angle)),
                                                 static_cast<Scalar>(std::sin(angle)));
  }
  return mask;
}

/// Mask regenerated from a stored seed (the on-disk representation).
template <typename Scalar = double>
CdpMask<Scalar> cdp_mask_from_seed(std::uint64_t seed, Eigen::Index height, Eigen::Index width) {
  Rng rng(seed);
  auto mask = cdp_mask_generate<Scalar>(rng, height, width);
  mask.seed = seed;
  return mask;
}

template <typename Scalar>
struct CdpMeasurement {
  CdpMask<Scalar> mask;
  VectorX<Scalar> magnitudes;  // y_i, row-major, nonnegative
};

/// z = F(M .* x) with the unitary DFT.
template <typename Scalar>
ComplexGrid<Scalar> cdp_field(const ImageGrid<Scalar>& x, const CdpMask<Scalar>& mask) {
  require_same_shape(x, mask.phases, "cdp_field");
  ComplexGrid<Scalar> modulated = mask.phases.with_data(
      (mask.phases.data().array() * x.data().array().template cast<std::complex<Scalar>>()).matrix());
  return fft2(modulated);
}

/// |F(M .* x)| element-wise.
template <typename Scalar>
VectorX<Scalar> cdp_forward(const ImageGrid<Scalar>& x, const CdpMask<Scalar>& mask) {
  return cdp_field(x, mask).data().cwiseAbs();
}

/// g_i(x) = 1/2 ||y_i - |F M_i x|||^2
template <typename Scalar>
Scalar cdp_fidelity(const ImageGrid<Scalar>& x, const CdpMeasurement<Scalar>& m) {
  const VectorX<Scalar> amp = cdp_forward(x, m.mask);
  if (amp.size() != m.magnitudes.size()) throw DimensionMismatch("cdp_fidelity: measurement length");
  return Scalar(0.5) * (m.magnitudes - amp).squaredNorm();
}

/// z/|z|; `fallback` where z = 0.
template <typename Scalar>
std::complex<Scalar> phase_of(const std::complex<Scalar>& z, const std::complex<Scalar>& fallback) {
  const Scalar r = std::abs(z);
  return r > Scalar(0) ? z / r : fallback;
}

/// grad g_i(x) = Re{ conj(M_i) .* F^H (z - y_i .* phase(z)) },  z = F(M_i x)
///
/// Where z_j = 0 the loss is not differentiable; the phase there is taken from
/// F(M_i), the response to the all-ones image. That is the one-sided
/// derivative toward a constant nonnegative image and lies in the
/// subdifferential. From x = 0 the first step is then an error-reduction step
/// from a flat start.
template <typename Scalar>
ImageGrid<Scalar> cdp_gradient(const ImageGrid<Scalar>& x, const CdpMeasurement<Scalar>& m) {
  ComplexGrid<Scalar> z = cdp_field(x, m.mask);
  if (z.size() != m.magnitudes.size()) throw DimensionMismatch("cdp_gradient: measurement length");
  auto& zd = z.data();
  std::optional<ComplexGrid<Scalar>> probe;
  for (Eigen::Index j = 0; j < zd.size(); ++j) {
    std::complex<Scalar> fallback(1, 0);
    if (zd[j] == std::complex<Scalar>(0)) {
      if (!probe) probe = fft2(m.mask.phases);
      fallback = phase_of(probe->data()[j], fallback);
    }
    zd[j] -= m.magnitudes[j] * phase_of(zd[j], fallback);
  }
  const ComplexGrid<Scalar> back = ifft2(z);
  return x.with_data((m.mask.phases.data().conjugate().array() * back.data().array()).real().matrix());
}

// ---------------------------------------------------------------------------
// Linear models  y = H x + e

/// Identity, pixel subsampling, or an explicit dense matrix acting on the
/// row-major image vector.
template <typename Scalar>
class LinearOperator {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  static LinearOperator identity(Eigen::Index n) {
    LinearOperator op;
    op.kind_ = Kind::Identity;
    op.cols_ = n;
    return op;
  }

  /// Keeps the listed pixel indices, in the order given.
  static LinearOperator subsample(Eigen::Index n, std::vector<Eigen::Index> keep) {
    for (auto k : keep)
      if (k < 0 || k >= n) throw InvalidArgument("subsample index out of range");
    LinearOperator op;
    op.kind_ = Kind::Subsample;
    op.cols_ = n;
    op.keep_ = std::move(keep);
    return op;
  }

  static LinearOperator dense(Matrix h) {
    LinearOperator op;
    op.kind_ = Kind::Dense;
    op.cols_ = h.cols();
    op.matrix_ = std::move(h);
    return op;
  }

  Eigen::Index rows() const {
    switch (kind_) {
      case Kind::Identity: return cols_;
      case Kind::Subsample: return static_cast<Eigen::Index>(keep_.size());
      case Kind::Dense: return matrix_.rows();
    }
    return 0;
  }
  Eigen::Index cols() const { return cols_; }

  VectorX<Scalar> apply(const VectorX<Scalar>& x) const {
    if (x.size() != cols_) throw DimensionMismatch("linear operator input length");
    switch (kind_) {
      case Kind::Identity: return x;
      case Kind::Subsample: {
        VectorX<Scalar> out(rows());
        for (std::size_t k = 0; k < keep_.size(); ++k) out[k] = x[keep_[k]];
        return out;
      }
      case Kind::Dense: return matrix_ * x;
    }
    return {};
  }

  VectorX<Scalar> apply_adjoint(const VectorX<Scalar>& r) const {
    if (r.size() != rows()) throw DimensionMismatch("linear operator adjoint input length");
    switch (kind_) {
      case Kind::Identity: return r;
      case Kind::Subsample: {
        VectorX<Scalar> out = VectorX<Scalar>::Zero(cols_);
        for (std::size_t k = 0; k < keep_.size(); ++k) out[keep_[k]] += r[k];
        return out;
      }
      case Kind::Dense: return matrix_.transpose() * r;
    }
    return {};
  }

  /// Largest singular value squared by power iteration on H^T H.
  Scalar spectral_norm_sq(int max_iters = 50, Scalar tol = Scalar(1e-8)) const {
    if (kind_ == Kind::Identity) return Scalar(1);
    if (kind_ == Kind::Subsample) return keep_.empty() ? Scalar(0) : Scalar(1);
    VectorX<Scalar> v = VectorX<Scalar>::Ones(cols_).normalized();
    Scalar estimate = 0;
    for (int it = 0; it < max_iters; ++it) {
      VectorX<Scalar> w = apply_adjoint(apply(v));
      const Scalar next = w.norm();
      if (next == Scalar(0)) return Scalar(0);
      v = w / next;
      const bool done = std::abs(next - estimate) <= tol * next;
      estimate = next;
      if (done) break;
    }
    return estimate;
  }

 private:
  enum class Kind { Identity, Subsample, Dense };
  Kind kind_ = Kind::Identity;
  Eigen::Index cols_ = 0;
  std::vector<Eigen::Index> keep_;
  Matrix matrix_;
};

template <typename Scalar>
struct LinearMeasurement {
  LinearOperator<Scalar> op;
  VectorX<Scalar> y;
};

template <typename Scalar>
Scalar linear_fidelity(const ImageGrid<Scalar>& x, const LinearMeasurement<Scalar>& m) {
  if (m.op.rows() != m.y.size()) throw DimensionMismatch("linear_fidelity: operator/observation length");
  return Scalar(0.5) * (m.y - m.op.apply(x.data())).squaredNorm();
}

/// H^T (H x - y)
template <typename Scalar>
ImageGrid<Scalar> linear_gradient(const ImageGrid<Scalar>& x, const LinearMeasurement<Scalar>& m) {
  if (m.op.rows() != m.y.size()) throw DimensionMismatch("linear_gradient: operator/observation length");
  return x.with_data(m.op.apply_adjoint(m.op.apply(x.data()) - m.y));
}

// ---------------------------------------------------------------------------
// Measurement sets

template <typename Scalar>
using Measurement = std::variant<CdpMeasurement<Scalar>, LinearMeasurement<Scalar>>;

template <typename Scalar>
struct MeasurementSet {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  std::vector<Measurement<Scalar>> measurements;
  double input_snr_db = std::numeric_limits<double>::infinity();

  std::size_t size() const { return measurements.size(); }
  bool empty() const { return measurements.empty(); }

  /// First `count` measurements, for fixed-subset baselines.
  MeasurementSet prefix(std::size_t count) const {
    if (count == 0 || count > measurements.size())
      throw InvalidArgument("subset size must be in [1, I]");
    MeasurementSet out{height, width, {}, input_snr_db};
    out.measurements.assign(measurements.begin(), measurements.begin() + static_cast<long>(count));
    return out;
  }
};

template <typename Scalar>
Scalar component_fidelity(const MeasurementSet<Scalar>& set, std::size_t i, const ImageGrid<Scalar>& x) {
  return std::visit(
      [&](const auto& m) -> Scalar {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, CdpMeasurement<Scalar>>)
          return cdp_fidelity(x, m);
        else
          return linear_fidelity(x, m);
      },
      set.measurements.at(i));
}

template <typename Scalar>
ImageGrid<Scalar> component_gradient(const MeasurementSet<Scalar>& set, std::size_t i,
                                     const ImageGrid<Scalar>& x) {
  if (x.height() != set.height || x.width() != set.width)
    throw DimensionMismatch("component_gradient: image and measurement grids differ");
  return std::visit(
      [&](const auto& m) -> ImageGrid<Scalar> {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, CdpMeasurement<Scalar>>)
          return cdp_gradient(x, m);
        else
          return linear_gradient(x, m);
      },
      set.measurements.at(i));
}

/// g(x) = (1/I) sum_i g_i(x)
template <typename Scalar>
Scalar total_fidelity(const MeasurementSet<Scalar>& set, const ImageGrid<Scalar>& x) {
  if (set.empty()) throw InvalidArgument("empty measurement set");
  Scalar sum = 0;
  for (std::size_t i = 0; i < set.size(); ++i) sum += component_fidelity(set, i, x);
  return sum / static_cast<Scalar>(set.size());
}

/// Common Lipschitz bound over the components. Unit-modulus masks and the
/// unitary DFT make every CDP component contribute exactly 1.
template <typename Scalar>
Scalar estimate_lipschitz(const MeasurementSet<Scalar>& set) {
  if (set.empty()) throw InvalidArgument("empty measurement set");
  Scalar lipschitz = 0;
  for (const auto& m : set.measurements) {
    const Scalar li = std::visit(
        [](const auto& mm) -> Scalar {
          if constexpr (std::is_same_v<std::decay_t<decltype(mm)>, CdpMeasurement<Scalar>>)
            return Scalar(1);
          else
            return mm.op.spectral_norm_sq();
        },
        m);
    lipschitz = std::max(lipschitz, li);
  }
  return lipschitz;
}

/// Adds white Gaussian noise rescaled so that 20 log10(||y|| / ||noise||)
/// equals `snr_db` exactly. Infinite SNR leaves y untouched.
template <typename Scalar>
VectorX<Scalar> add_noise_at_snr(const VectorX<Scalar>& clean, double snr_db, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return clean;
  if (std::isnan(snr_db)) throw InvalidArgument("input SNR is NaN");
  VectorX<Scalar> noise(clean.size());
  for (Eigen::Index j = 0; j < noise.size(); ++j) noise[j] = static_cast<Scalar>(rng.gaussian());
  const Scalar noise_norm = noise.norm();
  if (noise_norm == Scalar(0)) return clean;
  const Scalar target = clean.norm() / static_cast<Scalar>(std::pow(10.0, snr_db / 20.0));
  return clean + noise * (target / noise_norm);
}

/// Draws I mask seeds from `rng`, then per-measurement noise in index order.
/// Noisy magnitudes below zero are clamped.
template <typename Scalar>
MeasurementSet<Scalar> simulate_cdp(const ImageGrid<Scalar>& x_true, std::size_t count,
                                    double input_snr_db, Rng& rng) {
  if (count == 0) throw InvalidArgument("number of measurements must be positive");
  require_finite(x_true, "ground truth");
  MeasurementSet<Scalar> set{x_true.height(), x_true.width(), {}, input_snr_db};

  std::vector<std::uint64_t> seeds(count);
  for (auto& s : seeds) s = rng.next_u64();

  set.measurements.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto mask = cdp_mask_from_seed<Scalar>(seeds[i], x_true.height(), x_true.width());
    VectorX<Scalar> clean = cdp_forward(x_true, mask);
    VectorX<Scalar> noisy = add_noise_at_snr(clean, input_snr_db, rng).cwiseMax(Scalar(0));
    set.measurements.emplace_back(CdpMeasurement<Scalar>{std::move(mask), std::move(noisy)});
  }
  return set;
}

}  // namespace onred
