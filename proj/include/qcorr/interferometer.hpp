#pragma once

// Static optical model of a power-recycled Michelson interferometer.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "qcorr/errors.hpp"

namespace qcorr {

struct InterferometerParams {
  double wavelength = 1064e-9;          // m
  double arm_length = 0.92;             // m
  double input_power = 1.5e-3;          // W
  double prm_reflectivity = 0.91;
  double end_mirror_reflectivity = 0.999;
  double internal_loss = 0.26;
  double darm_offset = 0.1;             // rad, near the dark fringe
  double output_power = 500e-6;         // W, nominal read-out power

  void validate() const {
    if (!(wavelength > 0.0) || !(arm_length > 0.0)) {
      throw ParameterError("wavelength and arm_length must be > 0");
    }
    if (!(input_power > 0.0) || !(output_power > 0.0)) {
      throw ParameterError("input_power and output_power must be > 0");
    }
    if (!(prm_reflectivity > 0.0 && prm_reflectivity <= 1.0) ||
        !(end_mirror_reflectivity > 0.0 && end_mirror_reflectivity <= 1.0)) {
      throw ParameterError("mirror reflectivities must lie in (0, 1]");
    }
    if (!(internal_loss >= 0.0 && internal_loss < 1.0)) {
      throw ParameterError("internal_loss must lie in [0, 1)");
    }
    if (!std::isfinite(darm_offset)) throw ParameterError("darm_offset must be finite");
  }
};

// Compound power reflectivity of the Michelson seen from the recycling mirror.
inline double michelson_reflectivity(double darm_phase, const InterferometerParams& p) {
  const double c = std::cos(0.5 * darm_phase);
  return (1.0 - p.internal_loss) * p.end_mirror_reflectivity * c * c;
}

// Circulating-to-input power ratio of the recycling cavity.
inline double recycling_gain(double darm_phase, const InterferometerParams& p) {
  const double rt = 1.0 - std::sqrt(p.prm_reflectivity * michelson_reflectivity(darm_phase, p));
  return (1.0 - p.prm_reflectivity) / (rt * rt);
}

inline double antisym_power(double darm_phase, const InterferometerParams& p) {
  const double s = std::sin(0.5 * darm_phase);
  return p.input_power * recycling_gain(darm_phase, p) * (1.0 - p.internal_loss) *
         p.end_mirror_reflectivity * s * s;
}

inline double circulating_power(const InterferometerParams& p) {
  return recycling_gain(p.darm_offset, p) * p.input_power;
}

// Displacement-equivalent shot-noise ASD of one interferometer at the reference
// configuration (InterferometerParams{}).
inline constexpr double kReferenceShotNoiseAsd = 6e-16;  // m / sqrt(Hz)

// Single-interferometer shot-noise-limited displacement ASD, m/sqrt(Hz).
// Anchored at kReferenceShotNoiseAsd and scaled as 1/sqrt(circulating power).
inline double shot_noise_displacement_asd(const InterferometerParams& p) {
  p.validate();
  const double power = circulating_power(p);
  if (!(power > 0.0)) throw ParameterError("circulating power must be > 0");
  static const double reference_power = circulating_power(InterferometerParams{});
  return kReferenceShotNoiseAsd * std::sqrt(reference_power / power);
}

// Location and value of the largest antisymmetric-port power on (0, pi].
inline std::pair<double, double> antisym_power_peak(const InterferometerParams& p) {
  auto neg = [&](double phi) { return -antisym_power(phi, p); };
  auto [phi, val] = boost::math::tools::brent_find_minima(neg, 0.0, std::numbers::pi, 52);
  return {phi, -val};
}

// Smallest DARM offset on the dark-fringe side of the peak giving target_power.
inline double darm_offset_for_power(const InterferometerParams& p, double target_power) {
  p.validate();
  if (!(target_power > 0.0)) throw ParameterError("target power must be > 0");
  const auto [phi_peak, p_peak] = antisym_power_peak(p);
  if (target_power > p_peak) {
    throw ParameterError("target antisymmetric power exceeds the fringe maximum " +
                         std::to_string(p_peak) + " W");
  }
  auto f = [&](double phi) { return antisym_power(phi, p) - target_power; };
  std::uintmax_t iters = 200;
  auto [lo, hi] = boost::math::tools::toms748_solve(
      f, 0.0, phi_peak, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (lo + hi);
}

struct CalibrationInput {
  double v_rms = 0.0;      // V
  double v_pi = 1.0;       // V
  double bandwidth = 1.0;  // Hz

  void validate() const {
    if (!(v_rms >= 0.0)) throw ParameterError("V_rms must be >= 0");
    if (!(v_pi > 0.0)) throw ParameterError("V_pi must be > 0");
    if (!(bandwidth > 0.0)) throw ParameterError("measurement bandwidth must be > 0");
  }
};

// Displacement produced by the phase modulator: (lambda/2)(V_rms/V_pi)/sqrt(BW).
inline double strain_calibration(const CalibrationInput& c, double wavelength) {
  c.validate();
  if (!(wavelength > 0.0)) throw ParameterError("wavelength must be > 0");
  return 0.5 * wavelength * (c.v_rms / c.v_pi) / std::sqrt(c.bandwidth);
}

}  // namespace qcorr
