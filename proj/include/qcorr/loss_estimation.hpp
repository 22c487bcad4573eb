#pragma once

// Extraction of the recycling-mirror reflectivity and the internal loss from
// fringe scans, and the efficiency / squeezing-degradation bookkeeping.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "qcorr/errors.hpp"
#include "qcorr/interferometer.hpp"
#include "qcorr/noise_model.hpp"
#include "qcorr/philox.hpp"

namespace qcorr {

struct FringeDataset {
  std::vector<double> phases;  // rad
  std::vector<double> gains;
  std::vector<double> gain_sigma;
  std::vector<double> p_as;  // W
  std::vector<double> p_as_sigma;

  std::size_t size() const { return phases.size(); }

  void validate() const {
    const std::size_t n = phases.size();
    if (gains.size() != n || gain_sigma.size() != n || p_as.size() != n || p_as_sigma.size() != n) {
      throw ParameterError("fringe dataset columns have different lengths");
    }
    if (n < 3) throw ParameterError("fringe dataset needs at least 3 points for a 2-parameter fit");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(gain_sigma[i] > 0.0) || !(p_as_sigma[i] > 0.0)) {
        throw ParameterError("fringe dataset uncertainties must be > 0");
      }
    }
  }
};

struct LossFitOptions {
  double start_prm_reflectivity = 0.9;
  double start_internal_loss = 0.2;
  int max_iterations = 200;
  double relative_step_tolerance = 1e-10;
};

struct LossFit {
  double prm_reflectivity = 0.0;
  double prm_reflectivity_sigma = 0.0;
  double internal_loss = 0.0;
  double internal_loss_sigma = 0.0;
  double correlation = 0.0;
  double chi2 = 0.0;
  int dof = 0;
  int iterations = 0;
};

namespace detail {

inline constexpr double kBoundEps = 1e-9;

inline std::array<double, 2> clamp_loss_params(std::array<double, 2> t) {
  t[0] = std::clamp(t[0], kBoundEps, 1.0);
  t[1] = std::clamp(t[1], 0.0, 1.0 - kBoundEps);
  return t;
}

inline void fringe_residuals(const FringeDataset& d, InterferometerParams p, std::array<double, 2> t,
                             std::vector<double>& r) {
  p.prm_reflectivity = t[0];
  p.internal_loss = t[1];
  const std::size_t n = d.size();
  r.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = (recycling_gain(d.phases[i], p) - d.gains[i]) / d.gain_sigma[i];
    r[n + i] = (antisym_power(d.phases[i], p) - d.p_as[i]) / d.p_as_sigma[i];
  }
}

inline double sum_sq(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

}  // namespace detail

// Joint weighted least squares of G(phi) and P_AS(phi) over (R_prm, L_d).
// Levenberg-Marquardt with the parameters projected onto R_prm in (0, 1],
// L_d in [0, 1). `fixed` supplies input power and end-mirror reflectivity.
inline LossFit fit_losses(const FringeDataset& data, const InterferometerParams& fixed,
                          const LossFitOptions& opt = {}) {
  data.validate();
  const auto [mn, mx] = std::minmax_element(data.phases.begin(), data.phases.end());
  if (*mx - *mn < 1e-9) throw FitError("degenerate fringe dataset: all DARM phases are equal");

  std::array<double, 2> theta = detail::clamp_loss_params({opt.start_prm_reflectivity, opt.start_internal_loss});
  std::vector<double> r, r_try, r_plus, r_minus;
  const std::size_t m = 2 * data.size();
  std::vector<std::array<double, 2>> jac(m);

  auto jacobian = [&](const std::array<double, 2>& t) {
    for (int j = 0; j < 2; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(t[j]));
      auto tp = t, tm = t;
      tp[j] += h;
      tm[j] -= h;
      tp = detail::clamp_loss_params(tp);
      tm = detail::clamp_loss_params(tm);
      detail::fringe_residuals(data, fixed, tp, r_plus);
      detail::fringe_residuals(data, fixed, tm, r_minus);
      const double step = tp[j] - tm[j];
      for (std::size_t i = 0; i < m; ++i) jac[i][j] = (r_plus[i] - r_minus[i]) / step;
    }
  };
  auto normal_matrix = [&](std::array<double, 3>& a, std::array<double, 2>& g) {
    a = {0, 0, 0};
    g = {0, 0};
    for (std::size_t i = 0; i < m; ++i) {
      a[0] += jac[i][0] * jac[i][0];
      a[1] += jac[i][0] * jac[i][1];
      a[2] += jac[i][1] * jac[i][1];
      g[0] += jac[i][0] * r[i];
      g[1] += jac[i][1] * r[i];
    }
  };

  detail::fringe_residuals(data, fixed, theta, r);
  double chi2 = detail::sum_sq(r);
  double lambda = 1e-3;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iterations && !converged; ++it) {
    jacobian(theta);
    std::array<double, 3> a;
    std::array<double, 2> g;
    normal_matrix(a, g);
    bool improved = false;
    while (!improved) {
      const double a00 = a[0] * (1.0 + lambda), a11 = a[2] * (1.0 + lambda), a01 = a[1];
      const double det = a00 * a11 - a01 * a01;
      if (!(det > 0.0)) throw FitError("fringe fit: singular normal matrix (parameters not identifiable)");
      const std::array<double, 2> step{-(a11 * g[0] - a01 * g[1]) / det, -(a00 * g[1] - a01 * g[0]) / det};
      const auto trial = detail::clamp_loss_params({theta[0] + step[0], theta[1] + step[1]});
      detail::fringe_residuals(data, fixed, trial, r_try);
      const double chi2_try = detail::sum_sq(r_try);
      const double rel = std::max(std::abs(trial[0] - theta[0]) / std::max(std::abs(theta[0]), 1e-12),
                                  std::abs(trial[1] - theta[1]) / std::max(std::abs(theta[1]), 1e-12));
      if (chi2_try <= chi2) {
        theta = trial;
        r.swap(r_try);
        chi2 = chi2_try;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (rel < opt.relative_step_tolerance) converged = true;
      } else {
        lambda *= 10.0;
        // No downhill step exists at machine precision: we are at the minimum.
        if (lambda > 1e16 || rel < opt.relative_step_tolerance) {
          converged = true;
          break;
        }
      }
    }
  }
  if (!converged) throw FitError("fringe fit did not converge within " + std::to_string(opt.max_iterations) + " iterations");

  jacobian(theta);
  std::array<double, 3> a;
  std::array<double, 2> g;
  normal_matrix(a, g);
  const double det = a[0] * a[2] - a[1] * a[1];
  if (!(det > 0.0)) throw FitError("fringe fit: singular covariance at the solution");
  LossFit f;
  f.prm_reflectivity = theta[0];
  f.internal_loss = theta[1];
  f.prm_reflectivity_sigma = std::sqrt(a[2] / det);
  f.internal_loss_sigma = std::sqrt(a[0] / det);
  f.correlation = (-a[1] / det) / (f.prm_reflectivity_sigma * f.internal_loss_sigma);
  f.chi2 = chi2;
  f.dof = static_cast<int>(m) - 2;
  f.iterations = it;
  return f;
}

// Synthetic fringe scan with Gaussian relative noise (rel_noise = 0 gives exact data).
inline FringeDataset synthesize_fringe_data(const InterferometerParams& truth, std::span<const double> phases,
                                            double rel_noise, std::uint64_t seed) {
  truth.validate();
  if (!(rel_noise >= 0.0)) throw ParameterError("relative noise must be >= 0");
  const CounterRng rng(seed);
  const double sigma_rel = rel_noise > 0.0 ? rel_noise : 0.01;
  FringeDataset d;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const double g = recycling_gain(phases[i], truth);
    const double p = antisym_power(phases[i], truth);
    d.phases.push_back(phases[i]);
    d.gains.push_back(g * (1.0 + rel_noise * rng.normal(0, i)));
    d.gain_sigma.push_back(sigma_rel * g);
    d.p_as.push_back(p * (1.0 + rel_noise * rng.normal(1, i)));
    d.p_as_sigma.push_back(sigma_rel * std::max(p, 1e-12 * truth.input_power));
  }
  return d;
}

struct EfficiencyBudget {
  double efficiency = 1.0;
  double loss() const { return 1.0 - efficiency; }
};

// eta = R_prm (1 - L_d) prod(1 - extra_i).
inline EfficiencyBudget efficiency_budget(double prm_reflectivity, double internal_loss,
                                          std::span<const double> extra_losses = {}) {
  if (!(prm_reflectivity > 0.0 && prm_reflectivity <= 1.0)) {
    throw ParameterError("prm_reflectivity must lie in (0, 1]");
  }
  if (!(internal_loss >= 0.0 && internal_loss < 1.0)) throw ParameterError("internal_loss must lie in [0, 1)");
  double eta = prm_reflectivity * (1.0 - internal_loss);
  for (double e : extra_losses) {
    if (!(e >= 0.0 && e < 1.0)) throw ParameterError("extra losses must lie in [0, 1)");
    eta *= 1.0 - e;
  }
  return {eta};
}

// Loss fraction 1 - eta that degrades db_in of squeezing to db_out.
inline double squeezing_implied_loss(double db_in, double db_out) {
  if (!(db_out >= 0.0)) throw ParameterError("db_out must be >= 0");
  if (db_out > db_in) throw ParameterError("db_out > db_in would require a gain of squeezing");
  if (db_in == 0.0) return 0.0;
  const double eta = (1.0 - db_to_variance(db_out)) / (1.0 - db_to_variance(db_in));
  return 1.0 - eta;
}

}  // namespace qcorr
