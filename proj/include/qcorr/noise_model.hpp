#pragma once

// Two-channel Gaussian quadrature model of the read-out noise.
//
// All variances are normalised to the shot-noise limit (SNL = 1). Only the
// detected quadrature of each channel is tracked: a 2x2 covariance
// [[var1, cov12], [cov12, var2]].

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "qcorr/errors.hpp"

namespace qcorr {

enum class Injection { Coherent, ISS, TWB };

inline std::string_view to_string(Injection c) {
  switch (c) {
    case Injection::Coherent: return "coherent";
    case Injection::ISS: return "iss";
    case Injection::TWB: return "twb";
  }
  return "unknown";
}

inline Injection injection_from_string(std::string_view s) {
  if (s == "coherent") return Injection::Coherent;
  if (s == "iss") return Injection::ISS;
  if (s == "twb") return Injection::TWB;
  throw ParameterError("unknown injection mode '" + std::string(s) + "' (expected coherent, iss or twb)");
}

// Decibels below shot noise -> linear variance. 6.5 dB -> 0.2239.
inline double db_to_variance(double db) { return std::pow(10.0, -db / 10.0); }

// Linear variance -> decibels below shot noise (positive = reduction).
inline double variance_to_db(double variance) {
  if (!(variance > 0.0)) throw ParameterError("variance_to_db: variance must be > 0");
  return -10.0 * std::log10(variance);
}

// Beam-splitter loss: a fraction (1 - efficiency) of the mode is replaced by vacuum.
inline double apply_loss(double variance, double efficiency) {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
    throw ParameterError("apply_loss: efficiency must lie in [0, 1]");
  }
  if (!(variance > 0.0)) throw ParameterError("apply_loss: variance must be > 0");
  return efficiency * variance + (1.0 - efficiency);
}

struct SqueezingSpec {
  double squeezing_db = 0.0;
  // Defaults to the pure-state value (equal to squeezing_db).
  std::optional<double> antisqueezing_db;

  double antisqueezing() const { return antisqueezing_db.value_or(squeezing_db); }

  void validate() const {
    if (!(squeezing_db >= 0.0) || !std::isfinite(squeezing_db)) {
      throw ParameterError("squeezing_db must be a finite value >= 0");
    }
    if (!(antisqueezing() >= squeezing_db) || !std::isfinite(antisqueezing())) {
      throw ParameterError("antisqueezing_db must be >= squeezing_db (purity bound)");
    }
  }

  // Linear variance of the squeezed quadrature before any loss.
  double variance() const { return db_to_variance(squeezing_db); }
  // Linear variance of the conjugate (anti-squeezed) quadrature before any loss.
  double antisqueezed_variance() const { return db_to_variance(-antisqueezing()); }
};

struct LossBudget {
  double prm_reflectivity = 1.0;
  double internal_loss = 0.0;
  double extra_injection_loss = 0.0;

  void validate() const {
    if (!(prm_reflectivity > 0.0 && prm_reflectivity <= 1.0)) {
      throw ParameterError("prm_reflectivity must lie in (0, 1]");
    }
    if (!(internal_loss >= 0.0 && internal_loss < 1.0)) {
      throw ParameterError("internal_loss must lie in [0, 1)");
    }
    if (!(extra_injection_loss >= 0.0 && extra_injection_loss < 1.0)) {
      throw ParameterError("extra_injection_loss must lie in [0, 1)");
    }
  }

  double efficiency() const {
    return prm_reflectivity * (1.0 - internal_loss) * (1.0 - extra_injection_loss);
  }
};

struct QuadratureState {
  Injection config = Injection::Coherent;
  double var1 = 1.0;
  double var2 = 1.0;
  double cov12 = 0.0;

  // Throws StateError unless the covariance matrix is positive semi-definite.
  void validate() const {
    if (!(var1 > 0.0) || !(var2 > 0.0) || !std::isfinite(var1) || !std::isfinite(var2)) {
      throw StateError("quadrature variances must be finite and > 0");
    }
    if (!std::isfinite(cov12) || cov12 * cov12 > var1 * var2 * (1.0 + 1e-12)) {
      throw StateError("quadrature covariance violates |cov12| <= sqrt(var1 var2)");
    }
  }

  double determinant() const { return var1 * var2 - cov12 * cov12; }

  // Var(X1 - X2) / 2 and Var(X1 + X2) / 2, both SNL-normalised.
  double difference_variance() const { return 0.5 * (var1 + var2 - 2.0 * cov12); }
  double sum_variance() const { return 0.5 * (var1 + var2 + 2.0 * cov12); }
};

// Builds the read-out covariance for one injection configuration.
//
// ISS uses sources[i] for channel i. TWB uses sources[0] only: the beam is
// split 50/50, then each half propagates through its own channel loss. With
// per-channel efficiencies eta_i the detected quadratures obey
//   var_i = 1 - eta_i (1 - V_s) / 2,   cov12 = sqrt(eta_1 eta_2) (1 - V_s) / 2,
// with the positive sign of cov12 placing the squeezing in X1 - X2.
inline QuadratureState build_readout_covariance(Injection config,
                                                const std::array<SqueezingSpec, 2>& sources,
                                                const std::array<LossBudget, 2>& losses) {
  for (const auto& s : sources) s.validate();
  for (const auto& l : losses) l.validate();

  QuadratureState st;
  st.config = config;
  switch (config) {
    case Injection::Coherent:
      break;
    case Injection::ISS:
      st.var1 = apply_loss(sources[0].variance(), losses[0].efficiency());
      st.var2 = apply_loss(sources[1].variance(), losses[1].efficiency());
      break;
    case Injection::TWB: {
      const double deficit = 1.0 - sources[0].variance();
      const double eta1 = losses[0].efficiency();
      const double eta2 = losses[1].efficiency();
      st.var1 = 1.0 - 0.5 * eta1 * deficit;
      st.var2 = 1.0 - 0.5 * eta2 * deficit;
      st.cov12 = 0.5 * std::sqrt(eta1 * eta2) * deficit;
      break;
    }
  }
  st.validate();
  return st;
}

// TWB-like state with prescribed per-channel variances (each <= 1). The
// matching cross-covariance is sqrt((1 - var1)(1 - var2)), independent of
// how the squeezing and losses are shared out.
inline QuadratureState twb_from_channel_variances(double var1, double var2) {
  if (!(var1 > 0.0 && var1 <= 1.0) || !(var2 > 0.0 && var2 <= 1.0)) {
    throw ParameterError("TWB channel variances must lie in (0, 1]");
  }
  QuadratureState st{Injection::TWB, var1, var2, std::sqrt((1.0 - var1) * (1.0 - var2))};
  st.validate();
  return st;
}

// Post-split channel efficiency that yields channel_variance from a TWB source.
inline double twb_channel_efficiency(double source_variance, double channel_variance) {
  if (!(source_variance > 0.0 && source_variance < 1.0)) {
    throw ParameterError("source variance must lie in (0, 1) for a squeezed source");
  }
  const double eta = 2.0 * (1.0 - channel_variance) / (1.0 - source_variance);
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw ParameterError("channel variance not reachable from this source");
  }
  return eta;
}

// Conjugate-quadrature variance of a lossy squeezed mode (diagnostic only;
// the detected quadrature never carries it).
inline double antisqueezed_readout_variance(const SqueezingSpec& s, double efficiency) {
  s.validate();
  return apply_loss(s.antisqueezed_variance(), efficiency);
}

}  // namespace qcorr
