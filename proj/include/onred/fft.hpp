#pragma once

#include "onred/core.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <vector>

namespace onred {

/// Unitary 2D DFT on row-major grids: rows first, then columns, each direction
/// scaled by 1/sqrt(n) so that ||F v|| = ||v|| and F^H = F^{-1}.
///
/// Holds kissfft plans, so one instance per thread.
template <typename Scalar>
class UnitaryFft2 {
 public:
  using Complex = std::complex<Scalar>;

  UnitaryFft2() { engine_.SetFlag(Eigen::FFT<Scalar>::Unscaled); }

  ComplexGrid<Scalar> forward(const ComplexGrid<Scalar>& v) { return transform(v, false); }
  ComplexGrid<Scalar> inverse(const ComplexGrid<Scalar>& v) { return transform(v, true); }

 private:
  ComplexGrid<Scalar> transform(const ComplexGrid<Scalar>& v, bool inverse) {
    const Eigen::Index h = v.height();
    const Eigen::Index w = v.width();
    ComplexGrid<Scalar> out = v;
    auto& d = out.data();

    // Length-1 passes are the identity; kissfft cannot plan them.
    line_in_.resize(static_cast<std::size_t>(w));
    for (Eigen::Index r = 0; r < h && w > 1; ++r) {
      for (Eigen::Index c = 0; c < w; ++c) line_in_[c] = d[r * w + c];
      run(inverse);
      for (Eigen::Index c = 0; c < w; ++c) d[r * w + c] = line_out_[c];
    }
    line_in_.resize(static_cast<std::size_t>(h));
    for (Eigen::Index c = 0; c < w && h > 1; ++c) {
      for (Eigen::Index r = 0; r < h; ++r) line_in_[r] = d[r * w + c];
      run(inverse);
      for (Eigen::Index r = 0; r < h; ++r) d[r * w + c] = line_out_[r];
    }
    d *= Scalar(1) / std::sqrt(static_cast<Scalar>(h * w));
    return out;
  }

  void run(bool inverse) {
    if (inverse)
      engine_.inv(line_out_, line_in_);
    else
      engine_.fwd(line_out_, line_in_);
  }

  Eigen::FFT<Scalar> engine_;
  std::vector<Complex> line_in_;
  std::vector<Complex> line_out_;
};

/// Per-thread transform instance; keeps the forward operators pure functions.
template <typename Scalar>
UnitaryFft2<Scalar>& thread_fft() {
  thread_local UnitaryFft2<Scalar> fft;
  return fft;
}

template <typename Scalar>
ComplexGrid<Scalar> fft2(const ComplexGrid<Scalar>& v) {
  return thread_fft<Scalar>().forward(v);
}

template <typename Scalar>
ComplexGrid<Scalar> ifft2(const ComplexGrid<Scalar>& v) {
  return thread_fft<Scalar>().inverse(v);
}

}  // namespace onred
