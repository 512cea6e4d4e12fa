#pragma once

#include "onred/core.hpp"
#include "onred/forward.hpp"
#include "onred/metrics.hpp"
#include "onred/red.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace onred {

/// File could not be opened, read, or parsed.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// PGM (P5). 8-bit when maxval < 256, else 16-bit big-endian as the format
// requires. Values are rescaled to [0, 1] on read.
Image read_pgm(const std::filesystem::path& path);
/// Clips to [0, 1] and quantizes to 16 bits.
void write_pgm(const std::filesystem::path& path, const Image& image);
/// Round-trips `image` through the 16-bit quantizer used by write_pgm.
Image quantize16(const Image& image);

/// Built-in test images: "shepp<N>" (Shepp-Logan style, N x N) and
/// "checker<N>" (8-pixel checkerboard).
Image make_phantom(const std::string& name);

// MeasurementSet container: one line of JSON
//   {"version":1,"height":H,"width":W,"I":I,"input_snr_db":x|"inf","mask_seeds":[...]}
// terminated by '\n', followed by I blocks of H*W little-endian float64
// magnitudes. Masks are regenerated from their seeds on read.
void write_measurements(std::ostream& out, const MeasurementSet<double>& set);
void write_measurements(const std::filesystem::path& path, const MeasurementSet<double>& set);
MeasurementSet<double> read_measurements(std::istream& in);
MeasurementSet<double> read_measurements(const std::filesystem::path& path);

// Trace CSV: k,grad_norm_sq,norm_acc,snr_db,sampled_indices,wall_ms
void write_trace_csv(std::ostream& out, const RunTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace);
RunTrace read_trace_csv(const std::filesystem::path& path);

// Summary CSV: gamma_mult,B,runs,mean_norm_acc,std_norm_acc,mean_min_norm_acc
void write_summary_csv(std::ostream& out, const std::vector<SweepSummaryRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SweepSummaryRow>& rows);

/// 6 significant digits; "inf"/"-inf"/"nan" for non-finite values.
std::string format_number(double value);
/// Parses a number, accepting "inf".
double parse_number(const std::string& text);

nlohmann::json to_json(const DenoiserSpec& spec);
nlohmann::json to_json(const SolverConfig& config);
/// Overlays keys present in `j` onto `config`; unknown keys are rejected.
void merge_json(const nlohmann::json& j, SolverConfig& config);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace onred
