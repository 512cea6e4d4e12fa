// onred: simulate coded-diffraction data, run RED solvers, sweep step size and
// minibatch size, and evaluate reconstructions.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical abort, 4 I/O error.

#include "onred/io.hpp"
#include "onred/red.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace onred;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

// Solver flags shared by `run` and `sweep`. Unset flags leave the config-file
// value (or the default) in place.
struct SolverFlags {
  std::optional<std::string> config_file;
  std::optional<std::string> algorithm;
  std::optional<std::size_t> minibatch;
  std::optional<double> tau;
  std::optional<double> sigma;
  std::optional<double> tv_lambda;
  std::optional<std::string> denoiser;
  std::optional<int> tv_iters;
  std::optional<double> alpha;
  std::optional<long> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> subset;
  std::optional<long> log_stride;
  bool record_time = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_file, "JSON config; flags override its values")->check(CLI::ExistingFile);
    cmd.add_option("--alg", algorithm, "gm-red | on-red | sgm");
    cmd.add_option("--B", minibatch, "minibatch size");
    cmd.add_option("--tau", tau, "regularization strength");
    cmd.add_option("--sigma", sigma, "denoiser strength");
    cmd.add_option("--tv-lambda", tv_lambda, "TV prox weight (default 0.1*sigma^2)");
    cmd.add_option("--denoiser", denoiser, "identity | tv | kernel");
    cmd.add_option("--tv-iters", tv_iters, "inner TV iterations");
    cmd.add_option("--alpha", alpha, "kernel denoiser blend in [0,1]");
    cmd.add_option("--iters", iterations, "iteration budget");
    cmd.add_option("--seed", seed, "RNG seed for minibatch sampling");
    cmd.add_option("--subset", subset, "use only the first m measurements (0 = all)");
    cmd.add_option("--log-stride", log_stride, "trace every k-th iteration");
    cmd.add_flag("--record-time", record_time, "fill the wall_ms trace column (breaks byte reproducibility)");
  }

  // defaults <- config file <- flags. The raw file JSON is handed back if asked.
  SolverConfig resolve(nlohmann::json* file_json = nullptr) const {
    SolverConfig cfg;
    if (config_file) {
      const auto j = read_json(*config_file);
      merge_json(j, cfg);
      if (file_json) *file_json = j;
    }
    if (algorithm) cfg.algorithm = parse_algorithm(*algorithm);
    if (minibatch) cfg.minibatch = *minibatch;
    if (tau) cfg.tau = *tau;
    if (sigma) cfg.denoiser.sigma = *sigma;
    if (denoiser) cfg.denoiser.kind = parse_denoiser_kind(*denoiser);
    if (tv_iters) cfg.denoiser.tv_inner_iters = *tv_iters;
    if (alpha) cfg.denoiser.kernel_alpha = *alpha;
    // An explicit sigma without an explicit lambda falls back to the mapping.
    if (tv_lambda) cfg.denoiser.tv_lambda = *tv_lambda;
    else if (sigma) cfg.denoiser.tv_lambda.reset();
    if (iterations) cfg.iterations = *iterations;
    if (seed) cfg.seed = *seed;
    if (subset) cfg.subset = *subset;
    if (log_stride) cfg.log_stride = *log_stride;
    if (record_time) cfg.record_time = true;
    return cfg;
  }
};

double effective_tau(const SolverConfig& cfg) { return cfg.algorithm == Algorithm::Sgm ? 0.0 : cfg.tau; }

/// Images are nonnegative, so the sign of the CDP solution is fixed by its sum.
Image canonical_sign(const Image& x) { return x.data().sum() < 0.0 ? x.with_data(-x.data()) : x; }

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto slash = item.find('/');
    out.push_back(slash == std::string::npos ? parse_number(item)
                                             : parse_number(item.substr(0, slash)) /
                                                   parse_number(item.substr(slash + 1)));
  }
  if (out.empty()) throw InvalidArgument("empty list '" + text + "'");
  return out;
}

/// "0..4" or "1,5,9".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  const auto dots = text.find("..");
  try {
    if (dots != std::string::npos) {
      const auto lo = std::stoull(text.substr(0, dots));
      const auto hi = std::stoull(text.substr(dots + 2));
      if (hi < lo) throw InvalidArgument("empty seed range '" + text + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoull(item));
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const InvalidArgument*>(&e)) throw;
    throw InvalidArgument("bad seed list '" + text + "'");
  }
  if (out.empty()) throw InvalidArgument("empty seed list");
  return out;
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::optional<std::string> phantom;
  std::optional<std::string> image;
  std::size_t count = 6;
  std::string snr = "25";
  std::uint64_t seed = 0;
  std::string out;
  std::optional<std::string> truth;
};

int cmd_simulate(const SimulateArgs& a) {
  if (a.phantom.has_value() == a.image.has_value())
    throw InvalidArgument("give exactly one of --phantom or --image");
  const Image x_true = a.phantom ? make_phantom(*a.phantom) : quantize16(read_pgm(*a.image));
  const double snr = parse_number(a.snr);
  Rng rng(a.seed);
  const auto set = simulate_cdp(x_true, a.count, snr, rng);
  write_measurements(fs::path(a.out), set);
  const fs::path truth_path = a.truth ? fs::path(*a.truth) : fs::path(a.out + ".truth.pgm");
  write_pgm(truth_path, x_true);

  double realized = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& m = std::get<CdpMeasurement<double>>(set.measurements[i]);
    realized += snr_db(m.magnitudes, cdp_forward(x_true, m.mask));
  }
  realized /= static_cast<double>(set.size());
  std::cout << "measurements=" << set.size() << " grid=" << set.height << "x" << set.width << '\n'
            << "input_snr_db=" << format_number(snr) << '\n'
            << "realized_snr_db=" << format_number(realized) << " (after clamping)\n"
            << "wrote " << a.out << " and " << truth_path.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  SolverFlags flags;
  std::optional<std::string> gamma;
  std::string measurements;
  std::optional<std::string> truth;
  std::string out = "run";
};

int cmd_run(const RunArgs& a) {
  nlohmann::json file_json;
  SolverConfig cfg = a.flags.resolve(&file_json);
  const auto set = read_measurements(fs::path(a.measurements));
  const double lipschitz = estimate_lipschitz(set);

  if (cfg.algorithm == Algorithm::Sgm && (a.flags.tau || file_json.contains("tau")) && cfg.tau != 0.0)
    warn("sgm has no regularizer; tau is ignored");

  // --gamma beats a numeric config value; otherwise 1/(L+2tau).
  bool gamma_auto = true;
  if (a.gamma) {
    if (*a.gamma != "auto") cfg.gamma = parse_number(*a.gamma), gamma_auto = false;
  } else if (file_json.contains("gamma") && !file_json["gamma"].is_string()) {
    gamma_auto = false;
  }
  if (gamma_auto) cfg.gamma = default_step_size(lipschitz, effective_tau(cfg));
  if (auto w = step_size_warning(cfg, lipschitz)) warn(*w);

  std::optional<Image> truth;
  if (a.truth) truth = read_pgm(*a.truth);
  const Image x0(set.height, set.width);
  const auto result = run_solver(set, x0, cfg, truth ? &*truth : nullptr);

  write_trace_csv(fs::path(a.out + ".trace.csv"), result.trace);
  write_pgm(fs::path(a.out + ".pgm"), canonical_sign(result.x));
  auto sidecar = to_json(cfg);
  sidecar["lipschitz"] = lipschitz;
  sidecar["gamma_auto"] = gamma_auto;
  sidecar["measurements"] = a.measurements;
  if (a.truth) sidecar["truth"] = *a.truth;
  write_json(fs::path(a.out + ".json"), sidecar);

  const auto& last = result.trace.back();
  std::cout << "algorithm=" << to_string(cfg.algorithm) << " gamma=" << format_number(cfg.gamma)
            << " iterations=" << cfg.iterations << '\n'
            << "final_norm_acc=" << format_number(last.norm_acc) << '\n';
  if (last.snr_db) std::cout << "snr_db=" << format_number(*last.snr_db) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  SolverFlags flags;
  std::string gammas = "1";
  std::string batches = "10";
  std::string seeds = "0";
  std::string measurements;
  std::optional<std::string> truth;
  std::string out = "sweep";
  unsigned jobs = 0;
};

int cmd_sweep(const SweepArgs& a) {
  const SolverConfig base = a.flags.resolve();
  const auto set = read_measurements(fs::path(a.measurements));
  const double lipschitz = estimate_lipschitz(set);
  const double gamma0 = default_step_size(lipschitz, effective_tau(base));
  const auto multipliers = parse_list(a.gammas);
  std::vector<std::size_t> batch_sizes;
  for (double b : parse_list(a.batches)) {
    if (b < 1 || b != std::floor(b)) throw InvalidArgument("minibatch sizes must be positive integers");
    batch_sizes.push_back(static_cast<std::size_t>(b));
  }
  const auto seeds = parse_seeds(a.seeds);
  std::optional<Image> truth;
  if (a.truth) truth = read_pgm(*a.truth);

  struct Job {
    SweepKey key;
    SolverConfig cfg;
    std::string stem;
  };
  std::vector<Job> jobs;
  std::size_t cell_index = 0;
  for (double mult : multipliers)
    for (std::size_t b : batch_sizes) {
      for (auto s : seeds) {
        Job job{{{mult, b}, s}, base, {}};
        job.cfg.gamma = mult * gamma0;
        job.cfg.minibatch = b;
        job.cfg.seed = s + cell_index;
        job.cfg.validate(set.size());
        job.stem = "g" + format_number(mult) + "_B" + std::to_string(b) + "_s" + std::to_string(s);
        jobs.push_back(std::move(job));
      }
      ++cell_index;
    }

  fs::create_directories(a.out);
  std::vector<SolverResult<double>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  const unsigned workers =
      std::max(1u, std::min<unsigned>(a.jobs ? a.jobs : std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(jobs.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
          try {
            const Image x0(set.height, set.width);
            results[j] = run_solver(set, x0, jobs[j].cfg, truth ? &*truth : nullptr);
          } catch (...) {
            errors[j] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::map<SweepKey, RunTrace> traces;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const fs::path stem = fs::path(a.out) / jobs[j].stem;
    write_trace_csv(fs::path(stem.string() + ".trace.csv"), results[j].trace);
    write_pgm(fs::path(stem.string() + ".pgm"), canonical_sign(results[j].x));
    traces[jobs[j].key] = std::move(results[j].trace);
  }
  const auto summary = aggregate_sweep(traces);
  write_summary_csv(fs::path(a.out) / "summary.csv", summary);

  auto sidecar = to_json(base);
  sidecar.erase("gamma");
  sidecar.erase("minibatch");
  sidecar["lipschitz"] = lipschitz;
  sidecar["gamma_base"] = gamma0;
  sidecar["gamma_multipliers"] = multipliers;
  sidecar["minibatch_sizes"] = batch_sizes;
  sidecar["seeds"] = seeds;
  sidecar["measurements"] = a.measurements;
  write_json(fs::path(a.out) / "sweep.json", sidecar);

  write_summary_csv(std::cout, summary);
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::optional<std::string> recon;
  std::optional<std::string> truth;
  std::optional<std::string> trace;
};

int cmd_eval(const EvalArgs& a) {
  if (!a.trace && !(a.recon && a.truth)) throw InvalidArgument("eval needs --recon with --truth, or --trace");
  if (a.recon.has_value() != a.truth.has_value()) throw InvalidArgument("--recon and --truth go together");
  if (a.recon) {
    const Image recon = read_pgm(*a.recon);
    const Image truth = read_pgm(*a.truth);
    std::cout << "snr_db=" << format_number(snr_db_sign_resolved(recon, truth)) << '\n';
  }
  if (a.trace) {
    const auto trace = read_trace_csv(*a.trace);
    const auto acc = normalized_accuracy(trace);
    if (acc.values.empty()) throw IoError("trace has no rows");
    if (acc.started_at_fixed_point) warn("initial residual is zero; the run started at a fixed point");
    std::cout << "final_norm_acc=" << format_number(acc.values.back()) << '\n'
              << "min_norm_acc=" << format_number(*std::min_element(acc.values.begin(), acc.values.end()))
              << '\n';
    if (trace.back().snr_db) std::cout << "final_snr_db=" << format_number(*trace.back().snr_db) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online regularization-by-denoising solvers for coded-diffraction phase retrieval"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "simulate coded-diffraction measurements");
  simulate->add_option("--phantom", sim.phantom, "built-in image: shepp<N> | checker<N>");
  simulate->add_option("--image", sim.image, "ground-truth PGM (P5)");
  simulate->add_option("--I", sim.count, "number of measurements")->check(CLI::PositiveNumber);
  simulate->add_option("--snr", sim.snr, "input SNR in dB, or 'inf'");
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--out", sim.out, "measurement file")->required();
  simulate->add_option("--truth", sim.truth, "ground-truth PGM output (default <out>.truth.pgm)");

  RunArgs run;
  auto* runcmd = app.add_subcommand("run", "run one solver");
  run.flags.attach(*runcmd);
  runcmd->add_option("--gamma", run.gamma, "step size, or 'auto' for 1/(L+2tau)");
  runcmd->add_option("--truth", run.truth, "ground-truth PGM for SNR logging");
  runcmd->add_option("--out", run.out, "output prefix: <out>.trace.csv, <out>.pgm, <out>.json");
  runcmd->add_option("measurements", run.measurements, "measurement file")->required();

  SweepArgs sweep;
  auto* sweepcmd = app.add_subcommand("sweep", "sweep step-size multipliers and minibatch sizes");
  sweep.flags.attach(*sweepcmd);
  sweepcmd->add_option("--gammas", sweep.gammas, "multipliers of 1/(L+2tau), e.g. 1,1/3,1/9");
  sweepcmd->add_option("--Bs", sweep.batches, "minibatch sizes, e.g. 10,20,30");
  sweepcmd->add_option("--seeds", sweep.seeds, "seed list '0,1,2' or range '0..4'");
  sweepcmd->add_option("--truth", sweep.truth, "ground-truth PGM for SNR logging");
  sweepcmd->add_option("--out", sweep.out, "output directory");
  sweepcmd->add_option("--jobs", sweep.jobs, "worker threads (default: hardware concurrency)");
  sweepcmd->add_option("measurements", sweep.measurements, "measurement file")->required();

  EvalArgs ev;
  auto* evalcmd = app.add_subcommand("eval", "score a reconstruction or a trace");
  evalcmd->add_option("--recon", ev.recon, "reconstruction PGM");
  evalcmd->add_option("--truth", ev.truth, "ground-truth PGM");
  evalcmd->add_option("--trace", ev.trace, "trace CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (runcmd->parsed()) return cmd_run(run);
    if (sweepcmd->parsed()) return cmd_sweep(sweep);
    if (evalcmd->parsed()) return cmd_eval(ev);
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
