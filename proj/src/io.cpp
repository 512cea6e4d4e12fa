#include "onred/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace onred {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

long pgm_int(std::istream& in, const char* what) {
  const std::string tok = pgm_token(in);
  try {
    std::size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(std::string("bad PGM ") + what + ": '" + tok + "'");
  }
}

void put_f64_le(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  std::array<char, 8> bytes;
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  out.write(bytes.data(), 8);
}

double get_f64_le(std::istream& in) {
  std::array<unsigned char, 8> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), 8)) throw IoError("truncated measurement data");
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

struct Ellipse {
  double intensity, a, b, x0, y0, phi_deg;
};

// Modified Shepp-Logan (Toft) with nonnegative intensities in [0, 1].
constexpr std::array<Ellipse, 10> kShepp = {{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
}};

long phantom_size(const std::string& name, const std::string& prefix) {
  const std::string digits = name.substr(prefix.size());
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
    throw InvalidArgument("unknown phantom '" + name + "'");
  const long n = std::stol(digits);
  if (n < 2 || n > 4096) throw InvalidArgument("phantom size out of range: " + digits);
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// PGM

Image read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (pgm_token(in) != "P5") throw IoError("'" + path.string() + "' is not a binary PGM (P5)");
  const long width = pgm_int(in, "width");
  const long height = pgm_int(in, "height");
  const long maxval = pgm_int(in, "maxval");
  if (width <= 0 || height <= 0) throw IoError("bad PGM dimensions");
  if (maxval <= 0 || maxval > 65535) throw IoError("bad PGM maxval");
  // pgm_token consumed exactly one whitespace byte after maxval.
  Image img(height, width);
  const bool wide = maxval > 255;
  for (Eigen::Index j = 0; j < img.size(); ++j) {
    unsigned value;
    if (wide) {
      const int hi = in.get();
      const int lo = in.get();
      if (lo == EOF) throw IoError("truncated PGM data in '" + path.string() + "'");
      value = (static_cast<unsigned>(hi) << 8) | static_cast<unsigned>(lo);
    } else {
      const int v = in.get();
      if (v == EOF) throw IoError("truncated PGM data in '" + path.string() + "'");
      value = static_cast<unsigned>(v);
    }
    img.data()[j] = std::min(1.0, static_cast<double>(value) / static_cast<double>(maxval));
  }
  return img;
}

namespace {
unsigned to_u16(double v) {
  const double clipped = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned>(std::lround(clipped * 65535.0));
}
}  // namespace

void write_pgm(const std::filesystem::path& path, const Image& image) {
  auto out = open_out(path);
  out << "P5\n" << image.width() << ' ' << image.height() << "\n65535\n";
  for (Eigen::Index j = 0; j < image.size(); ++j) {
    const unsigned v = to_u16(image.data()[j]);
    out.put(static_cast<char>((v >> 8) & 0xFF));
    out.put(static_cast<char>(v & 0xFF));
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Image quantize16(const Image& image) {
  Image out = image;
  for (Eigen::Index j = 0; j < out.size(); ++j) out.data()[j] = to_u16(image.data()[j]) / 65535.0;
  return out;
}

Image make_phantom(const std::string& name) {
  if (name.rfind("shepp", 0) == 0) {
    const long n = phantom_size(name, "shepp");
    Image img(n, n);
    for (long r = 0; r < n; ++r)
      for (long c = 0; c < n; ++c) {
        const double x = (2.0 * c + 1.0) / n - 1.0;
        const double y = 1.0 - (2.0 * r + 1.0) / n;
        double v = 0.0;
        for (const auto& e : kShepp) {
          const double phi = e.phi_deg * 3.14159265358979323846 / 180.0;
          const double dx = x - e.x0;
          const double dy = y - e.y0;
          const double u = dx * std::cos(phi) + dy * std::sin(phi);
          const double w = -dx * std::sin(phi) + dy * std::cos(phi);
          if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.intensity;
        }
        img(r, c) = std::clamp(v, 0.0, 1.0);
      }
    return quantize16(img);
  }
  if (name.rfind("checker", 0) == 0) {
    const long n = phantom_size(name, "checker");
    Image img(n, n);
    for (long r = 0; r < n; ++r)
      for (long c = 0; c < n; ++c) img(r, c) = ((r / 8 + c / 8) % 2) ? 0.8 : 0.2;
    return quantize16(img);
  }
  throw InvalidArgument("unknown phantom '" + name + "'");
}

// ---------------------------------------------------------------------------
// Measurement container

void write_measurements(std::ostream& out, const MeasurementSet<double>& set) {
  nlohmann::json header;
  header["version"] = 1;
  header["height"] = set.height;
  header["width"] = set.width;
  header["I"] = set.size();
  if (std::isinf(set.input_snr_db) && set.input_snr_db > 0)
    header["input_snr_db"] = "inf";
  else
    header["input_snr_db"] = set.input_snr_db;
  auto seeds = nlohmann::json::array();
  for (const auto& m : set.measurements) {
    const auto* cdp = std::get_if<CdpMeasurement<double>>(&m);
    if (!cdp) throw InvalidArgument("only coded-diffraction sets can be serialized");
    seeds.push_back(cdp->mask.seed);
  }
  header["mask_seeds"] = seeds;
  out << header.dump() << '\n';
  for (const auto& m : set.measurements)
    for (double v : std::get<CdpMeasurement<double>>(m).magnitudes) put_f64_le(out, v);
  if (!out) throw IoError("failed writing measurement set");
}

void write_measurements(const std::filesystem::path& path, const MeasurementSet<double>& set) {
  auto out = open_out(path);
  write_measurements(out, set);
}

MeasurementSet<double> read_measurements(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("missing measurement header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad measurement header: ") + e.what());
  }
  try {
    if (header.at("version").get<int>() != 1) throw IoError("unsupported measurement file version");
    MeasurementSet<double> set;
    set.height = header.at("height").get<Eigen::Index>();
    set.width = header.at("width").get<Eigen::Index>();
    const auto count = header.at("I").get<std::size_t>();
    const auto& snr = header.at("input_snr_db");
    set.input_snr_db = snr.is_string() ? parse_number(snr.get<std::string>()) : snr.get<double>();
    const auto seeds = header.at("mask_seeds").get<std::vector<std::uint64_t>>();
    if (set.height <= 0 || set.width <= 0) throw IoError("bad grid dimensions in measurement header");
    if (seeds.size() != count) throw IoError("mask_seeds length does not match I");
    const Eigen::Index n = set.height * set.width;
    for (std::size_t i = 0; i < count; ++i) {
      VectorX<double> y(n);
      for (Eigen::Index j = 0; j < n; ++j) y[j] = get_f64_le(in);
      set.measurements.emplace_back(
          CdpMeasurement<double>{cdp_mask_from_seed<double>(seeds[i], set.height, set.width), std::move(y)});
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad measurement header: ") + e.what());
  }
}

MeasurementSet<double> read_measurements(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_measurements(in);
}

// ---------------------------------------------------------------------------
// CSV

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

double parse_number(const std::string& text) {
  if (text == "inf" || text == "+inf" || text == "Inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("not a number: '" + text + "'");
  }
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << "k,grad_norm_sq,norm_acc,snr_db,sampled_indices,wall_ms\n";
  for (const auto& row : trace) {
    out << row.k << ',' << format_number(row.grad_norm_sq) << ',' << format_number(row.norm_acc) << ',';
    if (row.snr_db) out << format_number(*row.snr_db);
    out << ',';
    for (std::size_t b = 0; b < row.sampled_indices.size(); ++b) out << (b ? ";" : "") << row.sampled_indices[b];
    out << ',' << format_number(row.wall_ms) << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace) {
  auto out = open_out(path);
  write_trace_csv(out, trace);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

RunTrace read_trace_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("k,grad_norm_sq", 0) != 0)
    throw IoError("'" + path.string() + "' is not a trace CSV");
  RunTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 6) throw IoError("malformed trace row: " + line);
    try {
      TraceRow row;
      row.k = std::stol(cells[0]);
      row.grad_norm_sq = parse_number(cells[1]);
      row.norm_acc = parse_number(cells[2]);
      if (!cells[3].empty()) row.snr_db = parse_number(cells[3]);
      if (!cells[4].empty())
        for (const auto& idx : split(cells[4], ';')) row.sampled_indices.push_back(std::stoul(idx));
      row.wall_ms = parse_number(cells[5]);
      trace.push_back(std::move(row));
    } catch (const std::exception&) {
      throw IoError("malformed trace row: " + line);
    }
  }
  return trace;
}

void write_summary_csv(std::ostream& out, const std::vector<SweepSummaryRow>& rows) {
  out << "gamma_mult,B,runs,mean_norm_acc,std_norm_acc,mean_min_norm_acc\n";
  for (const auto& r : rows)
    out << format_number(r.cell.gamma_multiplier) << ',' << r.cell.minibatch << ',' << r.runs << ','
        << format_number(r.mean_norm_acc) << ',' << format_number(r.std_norm_acc) << ','
        << format_number(r.mean_min_norm_acc) << '\n';
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SweepSummaryRow>& rows) {
  auto out = open_out(path);
  write_summary_csv(out, rows);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// JSON config

nlohmann::json to_json(const DenoiserSpec& spec) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(spec.kind));
  j["sigma"] = spec.sigma;
  j["tv_inner_iters"] = spec.tv_inner_iters;
  j["kernel_alpha"] = spec.kernel_alpha;
  j["tv_lambda"] = spec.tv_weight();
  return j;
}

nlohmann::json to_json(const SolverConfig& config) {
  nlohmann::json j;
  j["algorithm"] = std::string(to_string(config.algorithm));
  j["gamma"] = config.gamma;
  j["tau"] = config.tau;
  j["minibatch"] = config.minibatch;
  j["subset"] = config.subset;
  j["iterations"] = config.iterations;
  j["seed"] = config.seed;
  j["log_stride"] = config.log_stride;
  j["record_time"] = config.record_time;
  j["denoiser"] = to_json(config.denoiser);
  return j;
}

void merge_json(const nlohmann::json& j, SolverConfig& config) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "algorithm") config.algorithm = parse_algorithm(value.get<std::string>());
      else if (key == "gamma") {
        if (!value.is_string()) config.gamma = value.get<double>();
        else if (value.get<std::string>() != "auto") throw InvalidArgument("gamma must be a number or \"auto\"");
      } else if (key == "tau") config.tau = value.get<double>();
      else if (key == "minibatch") config.minibatch = value.get<std::size_t>();
      else if (key == "subset") config.subset = value.get<std::size_t>();
      else if (key == "iterations") config.iterations = value.get<long>();
      else if (key == "seed") config.seed = value.get<std::uint64_t>();
      else if (key == "log_stride") config.log_stride = value.get<long>();
      else if (key == "record_time") config.record_time = value.get<bool>();
      else if (key == "denoiser") {
        if (!value.is_object()) throw InvalidArgument("denoiser must be a JSON object");
        auto& d = config.denoiser;
        for (const auto& [dk, dv] : value.items()) {
          if (dk == "kind") d.kind = parse_denoiser_kind(dv.get<std::string>());
          else if (dk == "sigma") d.sigma = dv.get<double>();
          else if (dk == "tv_inner_iters") d.tv_inner_iters = dv.get<int>();
          else if (dk == "kernel_alpha") d.kernel_alpha = dv.get<double>();
          else if (dk == "tv_lambda") {
            if (dv.is_null()) d.tv_lambda.reset();
            else d.tv_lambda = dv.get<double>();
          } else throw InvalidArgument("unknown denoiser key '" + dk + "'");
        }
      } else if (key == "gamma_auto" || key == "lipschitz" || key == "measurements" || key == "truth") {
        // Informational sidecar fields; resolved by the caller.
      } else {
        throw InvalidArgument("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad config value: ") + e.what());
  }
}

nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse '" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace onred
