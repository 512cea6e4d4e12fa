#pragma once

#include "onred/core.hpp"
#include "onred/denoise.hpp"
#include "onred/forward.hpp"
#include "onred/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace onred {

enum class Algorithm { GmRed, OnRed, Sgm };

inline std::string_view to_string(Algorithm alg) {
  switch (alg) {
    case Algorithm::GmRed: return "gm-red";
    case Algorithm::OnRed: return "on-red";
    case Algorithm::Sgm: return "sgm";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view name) {
  if (name == "gm-red" || name == "gm_red" || name == "GM_RED") return Algorithm::GmRed;
  if (name == "on-red" || name == "on_red" || name == "ON_RED") return Algorithm::OnRed;
  if (name == "sgm" || name == "SGM") return Algorithm::Sgm;
  throw InvalidArgument("unknown algorithm '" + std::string(name) + "'");
}

/// gamma = 1/(L + 2 tau), the largest step the convergence analysis allows.
inline double default_step_size(double lipschitz, double tau) {
  if (!(lipschitz > 0.0)) throw InvalidArgument("Lipschitz constant must be positive");
  if (!(tau >= 0.0)) throw InvalidArgument("tau must be nonnegative");
  return 1.0 / (lipschitz + 2.0 * tau);
}

struct SolverConfig {
  Algorithm algorithm = Algorithm::OnRed;
  double gamma = 1.0;
  double tau = 0.2;
  std::size_t minibatch = 1;
  /// Restrict to the first `subset` measurements; 0 uses all of them.
  std::size_t subset = 0;
  long iterations = 100;
  std::uint64_t seed = 0;
  DenoiserSpec denoiser;
  /// Trace rows are written for k = 0, every multiple of this, and the last k.
  long log_stride = 1;
  bool record_time = false;

  void validate(std::size_t total) const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive and finite");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be nonnegative and finite");
    if (iterations < 1) throw InvalidArgument("iteration budget must be >= 1");
    if (log_stride < 1) throw InvalidArgument("log stride must be >= 1");
    if (total == 0) throw InvalidArgument("measurement set is empty");
    if (subset > total) throw InvalidArgument("subset exceeds the number of measurements");
    const std::size_t available = subset ? subset : total;
    if (algorithm != Algorithm::GmRed) {
      if (minibatch < 1) throw InvalidArgument("minibatch size must be >= 1");
      if (minibatch > available) throw InvalidArgument("minibatch size exceeds the number of measurements");
    }
    denoiser.validate();
  }
};

/// Non-fatal: step larger than the analysed range.
inline std::optional<std::string> step_size_warning(const SolverConfig& config, double lipschitz) {
  const double tau = config.algorithm == Algorithm::Sgm ? 0.0 : config.tau;
  const double limit = default_step_size(lipschitz, tau);
  if (config.gamma > limit * (1.0 + 1e-12))
    return "gamma=" + std::to_string(config.gamma) + " exceeds 1/(L+2tau)=" + std::to_string(limit);
  return std::nullopt;
}

template <typename Scalar>
struct RedOperatorEval {
  ImageGrid<Scalar> g_grad;    // gradient or minibatch estimate
  ImageGrid<Scalar> h_val;     // tau (x - D(x))
  ImageGrid<Scalar> combined;  // g_grad + h_val
};

/// Mean of the listed component gradients, summed in ascending index order.
template <typename Scalar>
ImageGrid<Scalar> mean_component_gradient(const MeasurementSet<Scalar>& set, const ImageGrid<Scalar>& x,
                                          std::vector<std::size_t> indices) {
  if (set.empty()) throw InvalidArgument("empty measurement set");
  if (indices.empty()) throw InvalidArgument("no component indices");
  std::sort(indices.begin(), indices.end());
  VectorX<Scalar> sum = VectorX<Scalar>::Zero(x.size());
  for (auto i : indices) sum += component_gradient(set, i, x).data();
  return x.with_data(sum / static_cast<Scalar>(indices.size()));
}

/// (1/I) sum_i grad g_i(x)
template <typename Scalar>
ImageGrid<Scalar> full_gradient(const MeasurementSet<Scalar>& set, const ImageGrid<Scalar>& x) {
  std::vector<std::size_t> all(set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return mean_component_gradient(set, x, std::move(all));
}

/// Unbiased estimate from B uniform draws with replacement. Returns the
/// indices in draw order.
template <typename Scalar>
std::pair<ImageGrid<Scalar>, std::vector<std::size_t>> minibatch_gradient(const MeasurementSet<Scalar>& set,
                                                                          const ImageGrid<Scalar>& x,
                                                                          std::size_t batch, Rng& rng) {
  if (set.empty()) throw InvalidArgument("empty measurement set");
  auto indices = rng_uniform_indices(rng, batch, set.size());
  auto grad = mean_component_gradient(set, x, indices);
  return {std::move(grad), std::move(indices)};
}

template <typename Scalar>
RedOperatorEval<Scalar> evaluate_operator(ImageGrid<Scalar> grad_est, const DenoiserSpec& spec, Scalar tau,
                                          const ImageGrid<Scalar>& x) {
  require_same_shape(grad_est, x, "evaluate_operator");
  auto h = residual_operator_H(spec, tau, x);
  auto combined = x.with_data(grad_est.data() + h.data());
  return {std::move(grad_est), std::move(h), std::move(combined)};
}

/// G(x) = grad g(x) + tau (x - D(x)) with the full gradient.
template <typename Scalar>
RedOperatorEval<Scalar> evaluate_operator(const MeasurementSet<Scalar>& set, const DenoiserSpec& spec, Scalar tau,
                                          const ImageGrid<Scalar>& x) {
  return evaluate_operator(full_gradient(set, x), spec, tau, x);
}

/// x - gamma (grad_est + tau (x - D(x)))
template <typename Scalar>
ImageGrid<Scalar> red_step(const ImageGrid<Scalar>& x, const ImageGrid<Scalar>& grad_est, const DenoiserSpec& spec,
                           Scalar tau, Scalar gamma) {
  if (!(gamma > Scalar(0))) throw InvalidArgument("gamma must be positive");
  const auto op = evaluate_operator(grad_est, spec, tau, x);
  auto next = x.with_data(x.data() - gamma * op.combined.data());
  if (!next.all_finite()) throw NumericalAbort("red_step produced non-finite values", 0);
  return next;
}

template <typename Scalar>
struct SolverResult {
  ImageGrid<Scalar> x;
  RunTrace trace;
};

namespace detail {

template <typename Scalar>
SolverResult<Scalar> run_red_loop(const MeasurementSet<Scalar>& full_set, const ImageGrid<Scalar>& x0,
                                  const SolverConfig& config, bool batch, Scalar tau,
                                  const ImageGrid<Scalar>* truth) {
  config.validate(full_set.size());
  if (x0.height() != full_set.height || x0.width() != full_set.width)
    throw DimensionMismatch("initial image does not match the measurement grid");
  if (truth) require_same_shape(*truth, x0, "ground truth");

  const MeasurementSet<Scalar> subset_storage =
      config.subset ? full_set.prefix(config.subset) : MeasurementSet<Scalar>{};
  const MeasurementSet<Scalar>& set = config.subset ? subset_storage : full_set;

  const auto gamma = static_cast<Scalar>(config.gamma);
  const auto start = std::chrono::steady_clock::now();
  Rng rng(config.seed);

  SolverResult<Scalar> result{x0, {}};
  auto& x = result.x;
  std::vector<std::size_t> last_indices;

  for (long k = 0;; ++k) {
    const bool last = k == config.iterations;
    const bool log_row = k == 0 || last || k % config.log_stride == 0;

    std::optional<RedOperatorEval<Scalar>> full;
    if (log_row || (batch && !last)) full = evaluate_operator(set, config.denoiser, tau, x);

    if (log_row) {
      TraceRow row;
      row.k = k;
      row.grad_norm_sq = static_cast<double>(full->combined.data().squaredNorm());
      if (truth) row.snr_db = snr_db_sign_resolved(x, *truth);
      row.sampled_indices = std::move(last_indices);
      if (config.record_time)
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      result.trace.push_back(std::move(row));
    }
    last_indices.clear();
    if (last) break;

    VectorX<Scalar> step;
    if (batch) {
      step = full->combined.data();
    } else {
      auto [estimate, indices] = minibatch_gradient(set, x, config.minibatch, rng);
      const VectorX<Scalar> h = full ? full->h_val.data() : residual_operator_H(config.denoiser, tau, x).data();
      step = estimate.data() + h;
      last_indices = std::move(indices);
    }
    x.data() -= gamma * step;
    if (!x.all_finite())
      throw NumericalAbort("iterate became non-finite at iteration " + std::to_string(k + 1), k + 1);
  }

  for (auto& row : result.trace)
    row.norm_acc = result.trace.front().grad_norm_sq > 0.0 ? row.grad_norm_sq / result.trace.front().grad_norm_sq
                                                           : 0.0;
  return result;
}

}  // namespace detail

/// Batch RED gradient method: x^k = x^{k-1} - gamma G(x^{k-1}).
template <typename Scalar>
SolverResult<Scalar> run_gm_red(const MeasurementSet<Scalar>& set, const ImageGrid<Scalar>& x0,
                                const SolverConfig& config, const ImageGrid<Scalar>* truth = nullptr) {
  if (config.algorithm != Algorithm::GmRed) throw InvalidArgument("run_gm_red requires algorithm gm-red");
  return detail::run_red_loop(set, x0, config, true, static_cast<Scalar>(config.tau), truth);
}

/// Online RED: the data term uses a fresh minibatch each iteration. Logged
/// residuals are always of the full operator G.
template <typename Scalar>
SolverResult<Scalar> run_on_red(const MeasurementSet<Scalar>& set, const ImageGrid<Scalar>& x0,
                                const SolverConfig& config, const ImageGrid<Scalar>* truth = nullptr) {
  if (config.algorithm != Algorithm::OnRed) throw InvalidArgument("run_on_red requires algorithm on-red");
  return detail::run_red_loop(set, x0, config, false, static_cast<Scalar>(config.tau), truth);
}

/// Stochastic gradient baseline: on-red with tau = 0.
template <typename Scalar>
SolverResult<Scalar> run_sgm(const MeasurementSet<Scalar>& set, const ImageGrid<Scalar>& x0,
                             const SolverConfig& config, const ImageGrid<Scalar>* truth = nullptr) {
  if (config.algorithm != Algorithm::Sgm) throw InvalidArgument("run_sgm requires algorithm sgm");
  return detail::run_red_loop(set, x0, config, false, Scalar(0), truth);
}

template <typename Scalar>
SolverResult<Scalar> run_solver(const MeasurementSet<Scalar>& set, const ImageGrid<Scalar>& x0,
                                const SolverConfig& config, const ImageGrid<Scalar>* truth = nullptr) {
  switch (config.algorithm) {
    case Algorithm::GmRed: return run_gm_red(set, x0, config, truth);
    case Algorithm::OnRed: return run_on_red(set, x0, config, truth);
    case Algorithm::Sgm: return run_sgm(set, x0, config, truth);
  }
  throw InvalidArgument("unknown algorithm");
}

}  // namespace onred
