#pragma once

// Small measurement sets shared by the unit and acceptance suites.

#include "onred/core.hpp"
#include "onred/forward.hpp"

namespace onred::testing {

/// I components y_i = H_i x_true with i.i.d. N(0, 1/rows) entries in H_i.
inline MeasurementSet<double> linear_gaussian_set(Rng& rng, const Image& x_true, std::size_t count,
                                                  Eigen::Index rows) {
  MeasurementSet<double> set{x_true.height(), x_true.width(), {}};
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::MatrixXd h(rows, x_true.size());
    for (Eigen::Index c = 0; c < h.cols(); ++c)
      for (Eigen::Index r = 0; r < h.rows(); ++r) h(r, c) = scale * rng.gaussian();
    Eigen::VectorXd y = h * x_true.data();
    set.measurements.emplace_back(LinearMeasurement<double>{LinearOperator<double>::dense(std::move(h)), std::move(y)});
  }
  return set;
}

/// I random-mask CDP components of x_true, noiseless.
inline MeasurementSet<double> cdp_set(Rng& rng, const Image& x_true, std::size_t count) {
  return simulate_cdp(x_true, count, std::numeric_limits<double>::infinity(), rng);
}

/// Smooth image in the interior of the positive orthant, away from |z| = 0.
inline Image smooth_point(Rng& rng, Eigen::Index h, Eigen::Index w) {
  return random_image<double>(rng, h, w, 0.2, 1.0);
}

}  // namespace onred::testing
