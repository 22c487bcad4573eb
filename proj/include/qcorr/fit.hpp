#pragma once

// Power-law fits y = prefactor * x^exponent by weighted least squares in log space.

#include <array>
#include <cmath>
#include <set>
#include <span>

#include "qcorr/errors.hpp"

namespace qcorr {

struct ScalingFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  // Covariance of (ln prefactor, exponent).
  std::array<std::array<double, 2>, 2> covariance{};
  double chi2 = 0.0;
  int dof = 0;

  double exponent_sigma() const { return std::sqrt(covariance[1][1]); }
  double prefactor_sigma() const { return prefactor * std::sqrt(covariance[0][0]); }
  double operator()(double x) const { return prefactor * std::pow(x, exponent); }
};

// sigma_y are 1-sigma uncertainties of y (propagated to sigma_y / y in log space).
// When the weighted residuals scatter more than the stated errors, the
// covariance is inflated by the reduced chi-square.
inline ScalingFit fit_power_law(std::span<const double> x, std::span<const double> y,
                                std::span<const double> sigma_y) {
  if (x.size() != y.size() || x.size() != sigma_y.size()) {
    throw ParameterError("fit_power_law: input lengths differ");
  }
  if (std::set<double>(x.begin(), x.end()).size() < 2) {
    throw FitError("fit_power_law: need at least two distinct abscissae");
  }
  double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !(sigma_y[i] > 0.0)) {
      throw ParameterError("fit_power_law: x, y and sigma_y must all be > 0");
    }
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    const double sl = sigma_y[i] / y[i];
    const double w = 1.0 / (sl * sl);
    s += w;
    sx += w * lx;
    sy += w * ly;
    sxx += w * lx * lx;
    sxy += w * lx * ly;
  }
  const double det = s * sxx - sx * sx;
  ScalingFit f;
  f.exponent = (s * sxy - sx * sy) / det;
  const double intercept = (sxx * sy - sx * sxy) / det;
  f.prefactor = std::exp(intercept);
  f.dof = static_cast<int>(x.size()) - 2;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (std::log(y[i]) - intercept - f.exponent * std::log(x[i])) / (sigma_y[i] / y[i]);
    f.chi2 += r * r;
  }
  const double scale = f.dof > 0 ? std::max(1.0, f.chi2 / f.dof) : 1.0;
  f.covariance = {{{scale * sxx / det, -scale * sx / det}, {-scale * sx / det, scale * s / det}}};
  return f;
}

// Prefactor-only fit with the exponent held fixed.
inline ScalingFit fit_power_law_fixed(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> sigma_y, double exponent) {
  if (x.size() != y.size() || x.size() != sigma_y.size() || x.empty()) {
    throw ParameterError("fit_power_law_fixed: bad input lengths");
  }
  double s = 0, sr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !(sigma_y[i] > 0.0)) {
      throw ParameterError("fit_power_law_fixed: x, y and sigma_y must all be > 0");
    }
    const double sl = sigma_y[i] / y[i];
    const double w = 1.0 / (sl * sl);
    s += w;
    sr += w * (std::log(y[i]) - exponent * std::log(x[i]));
  }
  ScalingFit f;
  f.exponent = exponent;
  const double intercept = sr / s;
  f.prefactor = std::exp(intercept);
  f.dof = static_cast<int>(x.size()) - 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (std::log(y[i]) - intercept - exponent * std::log(x[i])) / (sigma_y[i] / y[i]);
    f.chi2 += r * r;
  }
  const double scale = f.dof > 0 ? std::max(1.0, f.chi2 / f.dof) : 1.0;
  f.covariance = {{{scale / s, 0.0}, {0.0, 0.0}}};
  return f;
}

}  // namespace qcorr
