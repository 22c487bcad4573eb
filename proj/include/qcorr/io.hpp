#pragma once

// File formats: channel pairs (CSV and a raw binary), estimator outputs
// (CSV), fits and summaries (JSON), fringe datasets (CSV) and the
// provenance sidecar that accompanies every artifact.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "covariance.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "generator.hpp"
#include "loss_estimation.hpp"
#include "spectral.hpp"

namespace qcorr {

inline constexpr const char* kToolName = "qcorr";
inline constexpr const char* kToolVersion = "1.0.0";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw IoError("cannot parse number '" + std::string(s) + "' in " + what);
  }
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(config_json(c).dump()); }

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace detail

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// ---- channel pairs ----------------------------------------------------------

// CSV layout:
//   # qcorr channel pair v1
//   # sample_rate=<Hz>
//   # calibration=<m/sqrt(Hz) per SNL>
//   # seed=<u64>
//   # provenance=<fingerprint>
//   index,x1,x2
inline void write_channel_csv(const std::filesystem::path& path, const ChannelPair& p) {
  p.validate();
  auto out = detail::open_out(path);
  out << "# qcorr channel pair v1\n"
      << "# sample_rate=" << format_double(p.sample_rate) << '\n'
      << "# calibration=" << format_double(p.calibration) << '\n'
      << "# seed=" << p.seed << '\n'
      << "# provenance=" << p.provenance << '\n'
      << "index,x1,x2\n";
  std::string line;
  for (std::size_t i = 0; i < p.size(); ++i) {
    line.clear();
    line += std::to_string(i);
    line += ',';
    line += format_double(p.x1[i]);
    line += ',';
    line += format_double(p.x2[i]);
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline ChannelPair read_channel_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  ChannelPair p;
  p.sample_rate = 0.0;
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  const std::string what = path.string();
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string val = line.substr(eq + 1);
      if (key == "sample_rate") p.sample_rate = parse_double(val, what);
      else if (key == "calibration") p.calibration = parse_double(val, what);
      else if (key == "seed") p.seed = std::stoull(val);
      else if (key == "provenance") p.provenance = val;
      continue;
    }
    if (!header_seen) {
      if (line != "index,x1,x2") throw IoError(what + ": expected column header 'index,x1,x2'");
      header_seen = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 3) throw IoError(what + ":" + std::to_string(lineno) + ": expected 3 columns");
    p.x1.push_back(parse_double(f[1], what));
    p.x2.push_back(parse_double(f[2], what));
  }
  if (!header_seen) throw IoError(what + ": missing column header");
  if (!(p.sample_rate > 0.0)) throw IoError(what + ": missing or invalid sample_rate header");
  p.validate();
  return p;
}

// Binary layout (little-endian host order): "QCRP", u32 version = 1,
// f64 sample_rate, f64 calibration, u64 seed, u64 n, then n (x1, x2) pairs.
inline void write_channel_binary(const std::filesystem::path& path, const ChannelPair& p) {
  p.validate();
  auto out = detail::open_out(path, std::ios::out | std::ios::binary);
  const std::uint32_t version = 1;
  const std::uint64_t n = p.size();
  out.write("QCRP", 4);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&p.sample_rate), sizeof(double));
  out.write(reinterpret_cast<const char*>(&p.calibration), sizeof(double));
  out.write(reinterpret_cast<const char*>(&p.seed), sizeof(std::uint64_t));
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.write(reinterpret_cast<const char*>(&p.x1[i]), sizeof(double));
    out.write(reinterpret_cast<const char*>(&p.x2[i]), sizeof(double));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline ChannelPair read_channel_binary(const std::filesystem::path& path) {
  auto in = detail::open_in(path, std::ios::in | std::ios::binary);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  ChannelPair p;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || std::memcmp(magic, "QCRP", 4) != 0 || version != 1) {
    throw IoError(path.string() + ": not a qcorr binary channel file");
  }
  in.read(reinterpret_cast<char*>(&p.sample_rate), sizeof(double));
  in.read(reinterpret_cast<char*>(&p.calibration), sizeof(double));
  in.read(reinterpret_cast<char*>(&p.seed), sizeof(std::uint64_t));
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  p.x1.resize(n);
  p.x2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(&p.x1[i]), sizeof(double));
    in.read(reinterpret_cast<char*>(&p.x2[i]), sizeof(double));
  }
  if (!in) throw IoError(path.string() + ": truncated binary channel file");
  p.validate();
  return p;
}

inline ChannelPair read_channels(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? read_channel_binary(path) : read_channel_csv(path);
}

// ---- estimator outputs --------------------------------------------------------

inline void write_covariance_csv(const std::filesystem::path& path, const CovarianceTrace& t) {
  auto out = detail::open_out(path);
  out << "lag_s,lag_samples,rho\n";
  for (std::size_t i = 0; i < t.rho.size(); ++i) {
    out << format_double(t.lags[i]) << ',' << t.lag_samples[i] << ',' << format_double(t.rho[i]) << '\n';
  }
}

inline void write_spectrum_csv(const std::filesystem::path& path, const SpectralEstimate& e) {
  auto out = detail::open_out(path);
  out << "frequency_hz,value,standard_error,cross_re,cross_im\n";
  for (std::size_t k = 0; k < e.values.size(); ++k) {
    const std::complex<double> c = k < e.cross.size() ? e.cross[k] : std::complex<double>{};
    out << format_double(e.frequencies[k]) << ',' << format_double(e.values[k]) << ','
        << format_double(k < e.standard_error.size() ? e.standard_error[k] : 0.0) << ',' << format_double(c.real())
        << ',' << format_double(c.imag()) << '\n';
  }
}

inline void write_difference_csv(const std::filesystem::path& path, const DifferenceTrace& t) {
  auto out = detail::open_out(path);
  out << "lag_s,lag_samples,variance,var1,var2,cov\n";
  for (std::size_t i = 0; i < t.variance.size(); ++i) {
    out << format_double(t.lags[i]) << ',' << t.lag_samples[i] << ',' << format_double(t.variance[i]) << ','
        << format_double(t.var1[i]) << ',' << format_double(t.var2[i]) << ',' << format_double(t.cov[i]) << '\n';
  }
}

inline void write_snr_csv(const std::filesystem::path& path, const SnrCurve& c) {
  auto out = detail::open_out(path);
  out << "n_samples,snr,standard_error\n";
  for (std::size_t i = 0; i < c.snr.size(); ++i) {
    out << format_double(c.n_samples[i]) << ',' << format_double(c.snr[i]) << ','
        << format_double(c.standard_error[i]) << '\n';
  }
}

inline nlohmann::json fit_json(const ScalingFit& f) {
  return {{"exponent", f.exponent},
          {"exponent_sigma", f.exponent_sigma()},
          {"prefactor", f.prefactor},
          {"prefactor_sigma", f.prefactor_sigma()},
          {"covariance_lnprefactor_exponent",
           {{f.covariance[0][0], f.covariance[0][1]}, {f.covariance[1][0], f.covariance[1][1]}}},
          {"chi2", f.chi2},
          {"dof", f.dof}};
}

inline nlohmann::json loss_fit_json(const LossFit& f) {
  return {{"prm_reflectivity", f.prm_reflectivity},
          {"prm_reflectivity_sigma", f.prm_reflectivity_sigma},
          {"internal_loss", f.internal_loss},
          {"internal_loss_sigma", f.internal_loss_sigma},
          {"correlation", f.correlation},
          {"chi2", f.chi2},
          {"dof", f.dof},
          {"iterations", f.iterations}};
}

// ---- fringe data ----------------------------------------------------------

inline void write_fringe_csv(const std::filesystem::path& path, const FringeDataset& d) {
  auto out = detail::open_out(path);
  out << "phase_rad,gain,gain_sigma,p_as_w,p_as_sigma\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << format_double(d.phases[i]) << ',' << format_double(d.gains[i]) << ',' << format_double(d.gain_sigma[i])
        << ',' << format_double(d.p_as[i]) << ',' << format_double(d.p_as_sigma[i]) << '\n';
  }
}

inline FringeDataset read_fringe_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  const std::string what = path.string();
  std::string line;
  FringeDataset d;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "phase_rad,gain,gain_sigma,p_as_w,p_as_sigma") {
        throw IoError(what + ": expected header 'phase_rad,gain,gain_sigma,p_as_w,p_as_sigma'");
      }
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 5) throw IoError(what + ":" + std::to_string(lineno) + ": expected 5 columns");
    d.phases.push_back(parse_double(f[0], what));
    d.gains.push_back(parse_double(f[1], what));
    d.gain_sigma.push_back(parse_double(f[2], what));
    d.p_as.push_back(parse_double(f[3], what));
    d.p_as_sigma.push_back(parse_double(f[4], what));
  }
  if (!header) throw IoError(what + ": missing header");
  d.validate();
  return d;
}

// ---- provenance ------------------------------------------------------------

struct Provenance {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::json config;  // canonical config, enough to re-derive the artifact
  std::vector<std::string> inputs;
  nlohmann::json extra = nlohmann::json::object();
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& artifact) {
  return artifact.string() + ".provenance.json";
}

inline void write_provenance(const std::filesystem::path& artifact, const Provenance& p) {
  nlohmann::json j{{"tool", kToolName},
                   {"tool_version", kToolVersion},
                   {"command", p.command},
                   {"artifact", artifact.filename().string()},
                   {"config_hash", p.config_hash},
                   {"seed", p.seed},
                   {"config", p.config},
                   {"inputs", p.inputs}};
  for (auto it = p.extra.begin(); it != p.extra.end(); ++it) j[it.key()] = it.value();
  write_json(sidecar_path(artifact), j);
}

}  // namespace qcorr
