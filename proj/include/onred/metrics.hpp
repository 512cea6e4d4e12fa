#pragma once

#include "onred/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <vector>

namespace onred {

/// One logged iteration of a solver run.
struct TraceRow {
  long k = 0;
  double grad_norm_sq = 0.0;  // ||G(x^k)||^2, always the full operator
  double norm_acc = 0.0;      // grad_norm_sq / row0.grad_norm_sq
  std::optional<double> snr_db;
  std::vector<std::size_t> sampled_indices;  // minibatch that produced x^k
  double wall_ms = 0.0;
};

using RunTrace = std::vector<TraceRow>;

/// 20 log10(||truth|| / ||truth - estimate||); +inf when they coincide.
template <typename DerivedA, typename DerivedB>
double snr_db(const Eigen::MatrixBase<DerivedA>& estimate, const Eigen::MatrixBase<DerivedB>& truth) {
  if (estimate.size() != truth.size()) throw DimensionMismatch("snr_db: length mismatch");
  const double signal = static_cast<double>(truth.norm());
  if (signal == 0.0) throw InvalidArgument("snr_db: ground truth is the zero vector");
  const double error = static_cast<double>((truth - estimate).norm());
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(signal / error);
}

/// Reconstruction SNR with the global sign ambiguity of real-valued phase
/// retrieval resolved: the better of x and -x.
template <typename Scalar>
double snr_db_sign_resolved(const ImageGrid<Scalar>& estimate, const ImageGrid<Scalar>& truth) {
  require_same_shape(estimate, truth, "snr_db");
  const VectorX<Scalar> flipped = -estimate.data();
  return std::max(snr_db(estimate.data(), truth.data()), snr_db(flipped, truth.data()));
}

struct NormalizedAccuracy {
  std::vector<double> values;
  /// Row 0 had zero residual: the run started at a fixed point.
  bool started_at_fixed_point = false;
};

inline NormalizedAccuracy normalized_accuracy(const RunTrace& trace) {
  NormalizedAccuracy out;
  if (trace.empty()) return out;
  const double ref = trace.front().grad_norm_sq;
  out.values.resize(trace.size(), 0.0);
  if (ref == 0.0) {
    out.started_at_fixed_point = true;
    return out;
  }
  for (std::size_t k = 0; k < trace.size(); ++k) out.values[k] = trace[k].grad_norm_sq / ref;
  return out;
}

/// Identifies one sweep cell. The multiplier is relative to 1/(L + 2 tau).
struct SweepCell {
  double gamma_multiplier = 1.0;
  std::size_t minibatch = 1;

  friend auto operator<=>(const SweepCell&, const SweepCell&) = default;
};

struct SweepKey {
  SweepCell cell;
  std::uint64_t seed = 0;

  friend auto operator<=>(const SweepKey&, const SweepKey&) = default;
};

struct SweepSummaryRow {
  SweepCell cell;
  std::size_t runs = 0;
  double mean_norm_acc = 0.0;
  double std_norm_acc = 0.0;   // population standard deviation
  double mean_min_norm_acc = 0.0;
};

/// Per cell: mean/std of the final-iterate normalized accuracy across runs,
/// plus the mean running minimum.
inline std::vector<SweepSummaryRow> aggregate_sweep(const std::map<SweepKey, RunTrace>& traces) {
  if (traces.empty()) throw InvalidArgument("aggregate_sweep: no traces");
  std::map<SweepCell, std::vector<std::pair<double, double>>> per_cell;
  for (const auto& [key, trace] : traces) {
    const auto acc = normalized_accuracy(trace);
    if (acc.values.empty()) throw InvalidArgument("aggregate_sweep: empty trace");
    const double final = acc.values.back();
    const double best = *std::min_element(acc.values.begin(), acc.values.end());
    per_cell[key.cell].emplace_back(final, best);
  }
  std::vector<SweepSummaryRow> rows;
  for (const auto& [cell, values] : per_cell) {
    SweepSummaryRow row{cell, values.size(), 0.0, 0.0, 0.0};
    for (const auto& [final, best] : values) {
      row.mean_norm_acc += final;
      row.mean_min_norm_acc += best;
    }
    row.mean_norm_acc /= static_cast<double>(values.size());
    row.mean_min_norm_acc /= static_cast<double>(values.size());
    double var = 0.0;
    for (const auto& [final, best] : values) var += (final - row.mean_norm_acc) * (final - row.mean_norm_acc);
    row.std_norm_acc = std::sqrt(var / static_cast<double>(values.size()));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace onred
