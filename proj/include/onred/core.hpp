#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace onred {

// Error taxonomy. The CLI maps these to distinct exit codes.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionMismatch : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

/// Raised when an iterate stops being finite (misconfigured step size, etc).
struct NumericalAbort : std::runtime_error {
  NumericalAbort(const std::string& what, long iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row-major H x W grid stored as a flat Eigen column vector, so the unknown
/// behaves as an element of R^n in every expression.
template <typename T>
class Grid {
 public:
  using value_type = T;
  using Vector = VectorX<T>;

  Grid() = default;

  Grid(Eigen::Index height, Eigen::Index width)
      : height_(height), width_(width), data_(Vector::Zero(checked_size(height, width))) {}

  template <typename Derived>
  Grid(Eigen::Index height, Eigen::Index width, const Eigen::MatrixBase<Derived>& data)
      : height_(height), width_(width), data_(data) {
    if (data_.size() != checked_size(height, width))
      throw DimensionMismatch("grid data length does not equal height*width");
  }

  static Grid Constant(Eigen::Index height, Eigen::Index width, const T& value) {
    return Grid(height, width, Vector::Constant(checked_size(height, width), value));
  }

  Eigen::Index height() const { return height_; }
  Eigen::Index width() const { return width_; }
  Eigen::Index size() const { return data_.size(); }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  T& operator()(Eigen::Index row, Eigen::Index col) { return data_[row * width_ + col]; }
  const T& operator()(Eigen::Index row, Eigen::Index col) const { return data_[row * width_ + col]; }

  bool same_shape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  bool all_finite() const { return data_.allFinite(); }

  /// Same shape, new contents. The expression length must match.
  template <typename Derived>
  Grid with_data(const Eigen::MatrixBase<Derived>& data) const {
    return Grid(height_, width_, data);
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  static Eigen::Index checked_size(Eigen::Index height, Eigen::Index width) {
    if (height <= 0 || width <= 0) throw InvalidArgument("grid dimensions must be positive");
    return height * width;
  }

  Eigen::Index height_ = 0;
  Eigen::Index width_ = 0;
  Vector data_;
};

template <typename Scalar>
using ImageGrid = Grid<Scalar>;

template <typename Scalar>
using ComplexGrid = Grid<std::complex<Scalar>>;

using Image = ImageGrid<double>;
using ComplexImage = ComplexGrid<double>;

template <typename Scalar>
void require_finite(const ImageGrid<Scalar>& x, const char* what) {
  if (!x.all_finite()) throw InvalidArgument(std::string(what) + " contains non-finite entries");
}

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width())
    throw DimensionMismatch(std::string(what) + ": grid dimensions differ");
}

/// SplitMix64 counter stream. Output is identical on every platform for a
/// given seed; single owner, not thread-safe.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw InvalidArgument("rng bound must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  /// Standard normal via Box-Muller; both variates are consumed in pairs so the
  /// stream stays platform independent (no std::normal_distribution).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t state() const { return state_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Rng rng_new(std::uint64_t seed) { return Rng(seed); }

/// B i.i.d. indices drawn uniformly from {0, ..., I-1}, with replacement.
inline std::vector<std::size_t> rng_uniform_indices(Rng& rng, std::size_t batch, std::size_t total) {
  if (batch == 0 || total == 0) throw InvalidArgument("minibatch size and component count must be positive");
  std::vector<std::size_t> out(batch);
  for (auto& idx : out) idx = static_cast<std::size_t>(rng.below(total));
  return out;
}

template <typename Scalar>
ImageGrid<Scalar> random_image(Rng& rng, Eigen::Index height, Eigen::Index width,
                               Scalar lo = Scalar(0), Scalar hi = Scalar(1)) {
  ImageGrid<Scalar> out(height, width);
  for (Eigen::Index j = 0; j < out.size(); ++j)
    out.data()[j] = lo + (hi - lo) * static_cast<Scalar>(rng.uniform());
  return out;
}

}  // namespace onred
