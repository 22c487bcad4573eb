#pragma once

// Seeded synthesis of two demodulated read-out channels.
//
// Samples are produced directly at baseband: every noise source is white
// across the sampled band, tones sit at (f_tone - f_demod). Each logical
// noise source owns its own counter-based stream, so adding or removing one
// source never changes the draws of another.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "qcorr/errors.hpp"
#include "qcorr/interferometer.hpp"
#include "qcorr/noise_model.hpp"
#include "qcorr/philox.hpp"

namespace qcorr {

enum class SignalKind { Tone, WhiteNoise };
enum class Correlation { Correlated, Uncorrelated, Channel1Only, Channel2Only };

inline std::string_view to_string(SignalKind k) {
  return k == SignalKind::Tone ? "tone" : "white_noise";
}

inline std::string_view to_string(Correlation c) {
  switch (c) {
    case Correlation::Correlated: return "correlated";
    case Correlation::Uncorrelated: return "uncorrelated";
    case Correlation::Channel1Only: return "channel1";
    case Correlation::Channel2Only: return "channel2";
  }
  return "unknown";
}

inline Correlation correlation_from_string(std::string_view s) {
  if (s == "correlated") return Correlation::Correlated;
  if (s == "uncorrelated") return Correlation::Uncorrelated;
  if (s == "channel1") return Correlation::Channel1Only;
  if (s == "channel2") return Correlation::Channel2Only;
  throw ParameterError("unknown signal correlation '" + std::string(s) + "'");
}

inline SignalKind signal_kind_from_string(std::string_view s) {
  if (s == "tone") return SignalKind::Tone;
  if (s == "white_noise") return SignalKind::WhiteNoise;
  throw ParameterError("unknown signal kind '" + std::string(s) + "'");
}

struct AcquisitionSpec {
  double sample_rate = 500e3;        // Hz
  double duration = 1.0;             // s
  double demod_frequency = 13.5e6;   // Hz
  double lowpass_cutoff = 100e3;     // Hz
  std::uint64_t seed = 42;

  std::size_t sample_count() const {
    return static_cast<std::size_t>(std::llround(duration * sample_rate));
  }

  void validate() const {
    if (!(sample_rate > 0.0) || !(duration > 0.0)) {
      throw ParameterError("sample_rate and duration must be > 0");
    }
    if (!(lowpass_cutoff > 0.0) || lowpass_cutoff > 0.5 * sample_rate) {
      throw ParameterError("lowpass_cutoff must lie in (0, sample_rate/2]");
    }
    if (!(demod_frequency > 0.0)) throw ParameterError("demod_frequency must be > 0");
    const double n = duration * sample_rate;
    if (n < 1.0 || std::abs(n - std::round(n)) > 1e-6 * std::max(1.0, n)) {
      throw ParameterError("duration * sample_rate must be a positive integer sample count");
    }
  }
};

struct SignalSpec {
  SignalKind kind = SignalKind::WhiteNoise;
  // Standard deviation (white noise) or peak amplitude (tone), SNL units.
  double amplitude = 0.0;
  double tone_frequency = 13.55e6;  // Hz, absolute
  Correlation correlation = Correlation::Correlated;
  double band_low = 12.3e6;   // Hz, absolute source band of the noise
  double band_high = 13.8e6;
  // Fixed initial tone phase; drawn from the seeded stream when unset.
  std::optional<double> phase;

  void validate(const AcquisitionSpec& acq) const {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
      throw ParameterError("signal amplitude must be finite and >= 0");
    }
    if (kind == SignalKind::Tone) {
      const double f = std::abs(tone_frequency - acq.demod_frequency);
      if (f > acq.lowpass_cutoff) {
        throw ParameterError("tone at " + std::to_string(tone_frequency) +
                             " Hz falls outside the demodulated band");
      }
    } else {
      if (!(band_low < band_high)) throw ParameterError("signal band must have low < high");
      if (band_low > acq.demod_frequency - acq.lowpass_cutoff ||
          band_high < acq.demod_frequency + acq.lowpass_cutoff) {
        throw ParameterError("noise source band must cover the whole demodulated band");
      }
    }
  }
};

struct ChannelPair {
  std::vector<double> x1;
  std::vector<double> x2;
  double sample_rate = 500e3;
  double calibration = kReferenceShotNoiseAsd;  // m/sqrt(Hz) per unit SNL
  std::uint64_t seed = 0;
  std::string provenance;

  std::size_t size() const { return x1.size(); }
  double duration() const { return static_cast<double>(size()) / sample_rate; }

  void validate() const {
    if (x1.size() != x2.size()) throw ParameterError("channel lengths differ");
    if (x1.empty()) throw ParameterError("channel pair is empty");
    if (!(sample_rate > 0.0)) throw ParameterError("sample_rate must be > 0");
    if (!(calibration > 0.0)) throw ParameterError("calibration must be > 0");
  }
};

// x1 - x2 sample by sample.
inline std::vector<double> difference(const ChannelPair& pair) {
  pair.validate();
  std::vector<double> d(pair.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = pair.x1[i] - pair.x2[i];
  return d;
}

namespace detail {

// Stream ids; signal j uses kSignalBase + 3j + {0 shared, 1 ch1, 2 ch2}.
inline constexpr std::uint32_t kQuantumShared = 0;
inline constexpr std::uint32_t kQuantumCh1 = 1;
inline constexpr std::uint32_t kQuantumCh2 = 2;
inline constexpr std::uint32_t kSignalBase = 3;
inline constexpr std::uint32_t kTonePhase = 0xFFFFFFFFu;

// Mixing coefficients x1 = a1 s + b1 n1, x2 = a2 s + b2 n2 reproducing the
// state covariance. The shared weight is split as (var1/var2)^(1/4) so both
// residual variances stay non-negative whenever the state is PSD.
struct Mixing {
  double a1, a2, b1, b2;
};

inline Mixing mixing_for(const QuadratureState& st) {
  const double c = std::abs(st.cov12);
  const double k = std::pow(st.var1 / st.var2, 0.25);
  const double a1 = std::sqrt(c) * k;
  const double a2 = std::copysign(std::sqrt(c) / k, st.cov12);
  return {a1, a2, std::sqrt(std::max(0.0, st.var1 - a1 * a1)),
          std::sqrt(std::max(0.0, st.var2 - a2 * a2))};
}

}  // namespace detail

inline std::string fingerprint(std::uint64_t seed, Injection config) {
  std::ostringstream os;
  os << to_string(config) << ";seed=" << seed << ";fp=" << std::hex
     << splitmix64(seed ^ (static_cast<std::uint64_t>(config) << 56));
  return os.str();
}

// Synthesises x_i = photon noise + injected signals for every sample.
// jobs > 1 splits the sample range over threads; output is identical.
inline ChannelPair generate(const QuadratureState& state, const std::vector<SignalSpec>& signals,
                            const AcquisitionSpec& acq, double calibration = kReferenceShotNoiseAsd,
                            unsigned jobs = 1) {
  acq.validate();
  state.validate();
  for (const auto& s : signals) s.validate(acq);
  if (!(calibration > 0.0)) throw ParameterError("calibration must be > 0");

  const std::size_t n = acq.sample_count();
  ChannelPair out;
  out.x1.assign(n, 0.0);
  out.x2.assign(n, 0.0);
  out.sample_rate = acq.sample_rate;
  out.calibration = calibration;
  out.seed = acq.seed;
  out.provenance = fingerprint(acq.seed, state.config);

  const CounterRng rng(acq.seed);
  const detail::Mixing mix = detail::mixing_for(state);

  struct ToneTerm {
    double omega, amplitude, phase1, phase2;
    bool ch1, ch2;
  };
  std::vector<ToneTerm> tones;
  for (std::size_t j = 0; j < signals.size(); ++j) {
    const auto& s = signals[j];
    if (s.kind != SignalKind::Tone) continue;
    const double drawn1 = 2.0 * std::numbers::pi * rng.uniform(detail::kTonePhase, j, 0);
    const double drawn2 = 2.0 * std::numbers::pi * rng.uniform(detail::kTonePhase, j, 1);
    const double p1 = s.phase.value_or(drawn1);
    const double p2 = s.correlation == Correlation::Uncorrelated ? drawn2 : p1;
    tones.push_back({2.0 * std::numbers::pi * (s.tone_frequency - acq.demod_frequency),
                     s.amplitude, p1, p2,
                     s.correlation != Correlation::Channel2Only,
                     s.correlation != Correlation::Channel1Only});
  }

  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double shared = rng.normal(detail::kQuantumShared, i);
      double v1 = mix.a1 * shared + mix.b1 * rng.normal(detail::kQuantumCh1, i);
      double v2 = mix.a2 * shared + mix.b2 * rng.normal(detail::kQuantumCh2, i);
      for (std::size_t j = 0; j < signals.size(); ++j) {
        const auto& s = signals[j];
        if (s.kind != SignalKind::WhiteNoise || s.amplitude == 0.0) continue;
        const auto base = static_cast<std::uint32_t>(detail::kSignalBase + 3 * j);
        switch (s.correlation) {
          case Correlation::Correlated: {
            const double w = s.amplitude * rng.normal(base, i);
            v1 += w;
            v2 += w;
            break;
          }
          case Correlation::Uncorrelated:
            v1 += s.amplitude * rng.normal(base + 1, i);
            v2 += s.amplitude * rng.normal(base + 2, i);
            break;
          case Correlation::Channel1Only:
            v1 += s.amplitude * rng.normal(base + 1, i);
            break;
          case Correlation::Channel2Only:
            v2 += s.amplitude * rng.normal(base + 2, i);
            break;
        }
      }
      const double t = static_cast<double>(i) / acq.sample_rate;
      for (const auto& tone : tones) {
        if (tone.ch1) v1 += tone.amplitude * std::sin(tone.omega * t + tone.phase1);
        if (tone.ch2) v2 += tone.amplitude * std::sin(tone.omega * t + tone.phase2);
      }
      out.x1[i] = v1;
      out.x2[i] = v2;
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n / 4096 + 1)));
  if (workers == 1) {
    fill(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(fill, b, e);
    }
  }
  return out;
}

// Derived seed for run `index` of a batch; a bijection of parent + index.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(parent + (index + 1) * 0x9E3779B97F4A7C15ull);
}

inline std::vector<AcquisitionSpec> split_runs(const AcquisitionSpec& acq, std::size_t n_runs) {
  if (n_runs < 1) throw ParameterError("split_runs: n_runs must be >= 1");
  std::vector<AcquisitionSpec> runs(n_runs, acq);
  for (std::size_t i = 0; i < n_runs; ++i) runs[i].seed = derive_seed(acq.seed, i);
  return runs;
}

}  // namespace qcorr
