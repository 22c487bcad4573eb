#pragma once

// Experiment configuration: a versioned JSON document covering the two
// interferometers, the injected quantum state, signals, acquisition and
// analysis settings. Loading runs every module's validation, so a config
// that loads is a config that runs.

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "covariance.hpp"
#include "errors.hpp"
#include "generator.hpp"
#include "interferometer.hpp"
#include "noise_model.hpp"
#include "spectral.hpp"

namespace qcorr {

inline constexpr int kConfigVersion = 1;

struct NoiseConfig {
  Injection injection = Injection::Coherent;
  std::array<SqueezingSpec, 2> sources{};
  std::array<LossBudget, 2> losses{};
  // Direct per-channel read-out squeezing (dB below SNL). Overrides the
  // source/loss description when set.
  std::optional<std::array<double, 2>> channel_squeezing_db;

  QuadratureState state() const {
    if (channel_squeezing_db) {
      const auto& db = *channel_squeezing_db;
      for (double d : db) {
        if (!(d >= 0.0)) throw ParameterError("noise.channel_squeezing_db entries must be >= 0");
      }
      const double v1 = db_to_variance(db[0]), v2 = db_to_variance(db[1]);
      switch (injection) {
        case Injection::Coherent:
          if (db[0] != 0.0 || db[1] != 0.0) throw ParameterError("coherent injection cannot carry channel squeezing");
          return {};
        case Injection::ISS: {
          QuadratureState st{Injection::ISS, v1, v2, 0.0};
          st.validate();
          return st;
        }
        case Injection::TWB:
          return twb_from_channel_variances(v1, v2);
      }
    }
    return build_readout_covariance(injection, sources, losses);
  }
};

struct AnalysisConfig {
  std::vector<std::size_t> n_spectra{1, 10, 100, 1000};
  double max_lag = 1e-4;  // s
  std::vector<std::size_t> subset_sizes{15625, 31250, 62500, 125000, 250000, 500000};
  std::ptrdiff_t floor_exclude = 3;
  Band band{0.0, 100e3};
  std::ptrdiff_t difference_lags = 50;  // samples, either side of zero
  std::size_t twb_subset = 5000;
  std::vector<std::string> estimators{"covariance", "clsd", "psd_difference", "variance_of_difference"};
};

struct ExperimentConfig {
  int version = kConfigVersion;
  std::string name = "default";
  std::array<InterferometerParams, 2> interferometers{};
  NoiseConfig noise;
  std::vector<SignalSpec> signals;
  AcquisitionSpec acquisition;
  std::size_t runs = 1;
  AnalysisConfig analysis;

  // m/sqrt(Hz) per unit SNL, from the first interferometer.
  double calibration() const { return shot_noise_displacement_asd(interferometers[0]); }

  void validate() const {
    if (version != kConfigVersion) {
      throw ParameterError("unsupported config version " + std::to_string(version) + " (expected " +
                           std::to_string(kConfigVersion) + ")");
    }
    for (const auto& ifo : interferometers) ifo.validate();
    noise.state();
    acquisition.validate();
    for (const auto& s : signals) s.validate(acquisition);
    if (runs < 1) throw ParameterError("runs must be >= 1");
    const std::size_t n = acquisition.sample_count();
    for (auto k : analysis.n_spectra) {
      if (k < 1 || k > n / 2) throw ParameterError("analysis.n_spectra entries must lie in [1, samples/2]");
    }
    for (auto k : analysis.subset_sizes) {
      if (k > n) throw ParameterError("analysis.subset_sizes entry exceeds the run length");
    }
    if (2 * lag_count(analysis.max_lag, acquisition.sample_rate) >= static_cast<std::ptrdiff_t>(n) ||
        !(analysis.max_lag >= 0.0)) {
      throw ParameterError("analysis.max_lag must be >= 0 and below half the run duration");
    }
    if (!(analysis.band.high > analysis.band.low)) throw ParameterError("analysis.band must have high > low");
    if (analysis.difference_lags < 0 || 2 * analysis.difference_lags + 2 >= static_cast<std::ptrdiff_t>(n)) {
      throw ParameterError("analysis.difference_lags out of range");
    }
    if (analysis.twb_subset < 2 || analysis.twb_subset > n) throw ParameterError("analysis.twb_subset out of range");
    static const std::set<std::string> known{"covariance", "snr", "clsd", "cpsd", "psd", "psd_difference",
                                             "variance_of_difference", "twb_estimate"};
    for (const auto& e : analysis.estimators) {
      if (!known.count(e)) throw ParameterError("unknown estimator '" + e + "'");
    }
  }
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ParameterError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ParameterError(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
void get_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParameterError(where + "." + key + ": " + e.what());
  }
}

inline InterferometerParams parse_interferometer(const json& j, const std::string& where) {
  check_keys(j, where,
             {"wavelength_m", "arm_length_m", "input_power_w", "prm_reflectivity", "end_mirror_reflectivity",
              "internal_loss", "darm_offset_rad", "output_power_w"});
  InterferometerParams p;
  get_opt(j, "wavelength_m", p.wavelength, where);
  get_opt(j, "arm_length_m", p.arm_length, where);
  get_opt(j, "input_power_w", p.input_power, where);
  get_opt(j, "prm_reflectivity", p.prm_reflectivity, where);
  get_opt(j, "end_mirror_reflectivity", p.end_mirror_reflectivity, where);
  get_opt(j, "internal_loss", p.internal_loss, where);
  get_opt(j, "darm_offset_rad", p.darm_offset, where);
  get_opt(j, "output_power_w", p.output_power, where);
  return p;
}

inline json interferometer_json(const InterferometerParams& p) {
  return {{"wavelength_m", p.wavelength},
          {"arm_length_m", p.arm_length},
          {"input_power_w", p.input_power},
          {"prm_reflectivity", p.prm_reflectivity},
          {"end_mirror_reflectivity", p.end_mirror_reflectivity},
          {"internal_loss", p.internal_loss},
          {"darm_offset_rad", p.darm_offset},
          {"output_power_w", p.output_power}};
}

template <class T>
std::array<T, 2> pair_of(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw ParameterError(where + "." + key + ": expected a two-element array");
  return {v[0].get<T>(), v[1].get<T>()};
}

inline NoiseConfig parse_noise(const json& j) {
  const std::string where = "noise";
  check_keys(j, where, {"injection", "squeezing_db", "antisqueezing_db", "losses", "channel_squeezing_db"});
  NoiseConfig n;
  if (j.contains("injection")) n.injection = injection_from_string(j.at("injection").get<std::string>());
  if (j.contains("squeezing_db")) {
    const auto& s = j.at("squeezing_db");
    if (s.is_number()) {
      n.sources[0].squeezing_db = n.sources[1].squeezing_db = s.get<double>();
    } else {
      const auto a = pair_of<double>(j, "squeezing_db", where);
      n.sources[0].squeezing_db = a[0];
      n.sources[1].squeezing_db = a[1];
    }
  }
  if (j.contains("antisqueezing_db")) {
    const auto a = pair_of<double>(j, "antisqueezing_db", where);
    n.sources[0].antisqueezing_db = a[0];
    n.sources[1].antisqueezing_db = a[1];
  }
  if (j.contains("losses")) {
    const auto& l = j.at("losses");
    if (!l.is_array() || l.size() != 2) throw ParameterError("noise.losses: expected two loss budgets");
    for (std::size_t i = 0; i < 2; ++i) {
      const std::string w = "noise.losses[" + std::to_string(i) + "]";
      check_keys(l[i], w, {"prm_reflectivity", "internal_loss", "extra_injection_loss"});
      get_opt(l[i], "prm_reflectivity", n.losses[i].prm_reflectivity, w);
      get_opt(l[i], "internal_loss", n.losses[i].internal_loss, w);
      get_opt(l[i], "extra_injection_loss", n.losses[i].extra_injection_loss, w);
    }
  }
  if (j.contains("channel_squeezing_db")) n.channel_squeezing_db = pair_of<double>(j, "channel_squeezing_db", where);
  return n;
}

// Amplitude units: "snl" (default), "m_per_rthz" (divided by the SNL
// calibration) or "eom" (drive voltages through the strain calibration).
inline SignalSpec parse_signal(const json& j, std::size_t idx, double calibration, double wavelength) {
  const std::string where = "signals[" + std::to_string(idx) + "]";
  check_keys(j, where,
             {"kind", "amplitude", "amplitude_unit", "eom", "tone_frequency_hz", "correlation", "band_hz",
              "phase_rad"});
  SignalSpec s;
  if (j.contains("kind")) s.kind = signal_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("correlation")) s.correlation = correlation_from_string(j.at("correlation").get<std::string>());
  std::string unit = "snl";
  get_opt(j, "amplitude_unit", unit, where);
  if (unit == "snl") {
    get_opt(j, "amplitude", s.amplitude, where);
  } else if (unit == "m_per_rthz") {
    double a = 0.0;
    get_opt(j, "amplitude", a, where);
    s.amplitude = a / calibration;
  } else if (unit == "eom") {
    if (!j.contains("eom")) throw ParameterError(where + ": amplitude_unit 'eom' needs an 'eom' object");
    const auto& e = j.at("eom");
    check_keys(e, where + ".eom", {"v_rms", "v_pi", "bandwidth_hz"});
    CalibrationInput c{e.at("v_rms").get<double>(), e.at("v_pi").get<double>(), e.at("bandwidth_hz").get<double>()};
    s.amplitude = strain_calibration(c, wavelength) / calibration;
  } else {
    throw ParameterError(where + ".amplitude_unit: expected snl, m_per_rthz or eom, got '" + unit + "'");
  }
  get_opt(j, "tone_frequency_hz", s.tone_frequency, where);
  if (j.contains("band_hz")) {
    const auto b = pair_of<double>(j, "band_hz", where);
    s.band_low = b[0];
    s.band_high = b[1];
  }
  if (j.contains("phase_rad")) s.phase = j.at("phase_rad").get<double>();
  return s;
}

inline json signal_json(const SignalSpec& s) {
  json j{{"kind", std::string(to_string(s.kind))},
         {"amplitude", s.amplitude},
         {"amplitude_unit", "snl"},
         {"correlation", std::string(to_string(s.correlation))},
         {"tone_frequency_hz", s.tone_frequency},
         {"band_hz", {s.band_low, s.band_high}}};
  if (s.phase) j["phase_rad"] = *s.phase;
  return j;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::get_opt;
  detail::check_keys(j, "config",
                     {"version", "name", "interferometers", "noise", "signals", "acquisition", "runs", "analysis"});
  ExperimentConfig c;
  if (!j.contains("version")) throw ParameterError("config: missing 'version'");
  get_opt(j, "version", c.version, "config");
  if (c.version != kConfigVersion) {
    throw ParameterError("unsupported config version " + std::to_string(c.version));
  }
  get_opt(j, "name", c.name, "config");
  if (j.contains("interferometers")) {
    const auto& a = j.at("interferometers");
    if (!a.is_array() || a.size() != 2) throw ParameterError("interferometers: expected two entries");
    for (std::size_t i = 0; i < 2; ++i) {
      c.interferometers[i] = detail::parse_interferometer(a[i], "interferometers[" + std::to_string(i) + "]");
    }
  }
  if (j.contains("noise")) c.noise = detail::parse_noise(j.at("noise"));
  if (j.contains("acquisition")) {
    const auto& a = j.at("acquisition");
    const std::string w = "acquisition";
    detail::check_keys(a, w, {"sample_rate_hz", "duration_s", "demod_frequency_hz", "lowpass_cutoff_hz", "seed"});
    get_opt(a, "sample_rate_hz", c.acquisition.sample_rate, w);
    get_opt(a, "duration_s", c.acquisition.duration, w);
    get_opt(a, "demod_frequency_hz", c.acquisition.demod_frequency, w);
    get_opt(a, "lowpass_cutoff_hz", c.acquisition.lowpass_cutoff, w);
    get_opt(a, "seed", c.acquisition.seed, w);
  }
  get_opt(j, "runs", c.runs, "config");
  if (j.contains("signals")) {
    const auto& s = j.at("signals");
    if (!s.is_array()) throw ParameterError("signals: expected an array");
    for (std::size_t i = 0; i < s.size(); ++i) {
      c.signals.push_back(detail::parse_signal(s[i], i, c.calibration(), c.interferometers[0].wavelength));
    }
  }
  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    const std::string w = "analysis";
    detail::check_keys(a, w,
                       {"n_spectra", "max_lag_s", "subset_sizes", "floor_exclude", "band_hz", "difference_lags",
                        "twb_subset", "estimators"});
    get_opt(a, "n_spectra", c.analysis.n_spectra, w);
    get_opt(a, "max_lag_s", c.analysis.max_lag, w);
    get_opt(a, "subset_sizes", c.analysis.subset_sizes, w);
    get_opt(a, "floor_exclude", c.analysis.floor_exclude, w);
    if (a.contains("band_hz")) {
      const auto b = detail::pair_of<double>(a, "band_hz", w);
      c.analysis.band = {b[0], b[1]};
    }
    get_opt(a, "difference_lags", c.analysis.difference_lags, w);
    get_opt(a, "twb_subset", c.analysis.twb_subset, w);
    get_opt(a, "estimators", c.analysis.estimators, w);
  }
  c.validate();
  return c;
}

// Canonical JSON form; parse_config(config_json(c)) reproduces c.
inline nlohmann::json config_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["version"] = c.version;
  j["name"] = c.name;
  j["interferometers"] = {detail::interferometer_json(c.interferometers[0]),
                          detail::interferometer_json(c.interferometers[1])};
  nlohmann::json n{{"injection", std::string(to_string(c.noise.injection))},
                   {"squeezing_db", {c.noise.sources[0].squeezing_db, c.noise.sources[1].squeezing_db}},
                   {"antisqueezing_db", {c.noise.sources[0].antisqueezing(), c.noise.sources[1].antisqueezing()}}};
  n["losses"] = nlohmann::json::array();
  for (const auto& l : c.noise.losses) {
    n["losses"].push_back({{"prm_reflectivity", l.prm_reflectivity},
                           {"internal_loss", l.internal_loss},
                           {"extra_injection_loss", l.extra_injection_loss}});
  }
  if (c.noise.channel_squeezing_db) n["channel_squeezing_db"] = *c.noise.channel_squeezing_db;
  j["noise"] = n;
  j["signals"] = nlohmann::json::array();
  for (const auto& s : c.signals) j["signals"].push_back(detail::signal_json(s));
  j["acquisition"] = {{"sample_rate_hz", c.acquisition.sample_rate},
                      {"duration_s", c.acquisition.duration},
                      {"demod_frequency_hz", c.acquisition.demod_frequency},
                      {"lowpass_cutoff_hz", c.acquisition.lowpass_cutoff},
                      {"seed", c.acquisition.seed}};
  j["runs"] = c.runs;
  j["analysis"] = {{"n_spectra", c.analysis.n_spectra},
                   {"max_lag_s", c.analysis.max_lag},
                   {"subset_sizes", c.analysis.subset_sizes},
                   {"floor_exclude", c.analysis.floor_exclude},
                   {"band_hz", {c.analysis.band.low, c.analysis.band.high}},
                   {"difference_lags", c.analysis.difference_lags},
                   {"twb_subset", c.analysis.twb_subset},
                   {"estimators", c.analysis.estimators}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace qcorr
