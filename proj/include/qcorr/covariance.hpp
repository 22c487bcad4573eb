#pragma once

// Time-domain estimators on a channel pair: lagged covariance, the
// normalised covariance rho(tau), the variance of the lagged difference and
// the variance-subtraction covariance extractor.
//
// Every lagged statistic is taken over the overlap of x1(t) and x2(t+k),
// with that overlap's own means and the unbiased (n - 1) normalisation, so
// Var(a - b) = Var(a) + Var(b) - 2 Cov(a, b) holds exactly per lag.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "qcorr/errors.hpp"
#include "qcorr/fit.hpp"
#include "qcorr/generator.hpp"

namespace qcorr {

struct LaggedMoments {
  double var1 = 0.0;  // of x1 over the overlap
  double var2 = 0.0;  // of x2 shifted by the lag
  double cov = 0.0;   // Cov(x1(t), x2(t + lag))
  std::size_t n = 0;
};

inline LaggedMoments lagged_moments(std::span<const double> x1, std::span<const double> x2,
                                    std::ptrdiff_t lag) {
  const auto len = static_cast<std::ptrdiff_t>(std::min(x1.size(), x2.size()));
  const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -lag);
  const std::ptrdiff_t t1 = std::min(len, len - lag);
  if (t1 - t0 < 2) throw ParameterError("lag leaves fewer than two overlapping samples");
  const auto n = static_cast<double>(t1 - t0);
  double m1 = 0, m2 = 0;
  for (auto t = t0; t < t1; ++t) {
    m1 += x1[t];
    m2 += x2[t + lag];
  }
  m1 /= n;
  m2 /= n;
  double s11 = 0, s22 = 0, s12 = 0;
  for (auto t = t0; t < t1; ++t) {
    const double a = x1[t] - m1;
    const double b = x2[t + lag] - m2;
    s11 += a * a;
    s22 += b * b;
    s12 += a * b;
  }
  return {s11 / (n - 1.0), s22 / (n - 1.0), s12 / (n - 1.0), static_cast<std::size_t>(t1 - t0)};
}

struct CovarianceTrace {
  std::vector<double> lags;              // s, symmetric about 0
  std::vector<std::ptrdiff_t> lag_samples;
  std::vector<double> rho;
  std::size_t n_samples = 0;

  std::size_t zero_index() const { return lag_samples.size() / 2; }
  double peak() const { return rho[zero_index()]; }

  // Mean |rho| over lags with |k| > exclude samples.
  double floor(std::ptrdiff_t exclude = 3) const {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      if (std::abs(lag_samples[i]) <= exclude) continue;
      sum += rho[i];
      ++count;
    }
    if (count == 0) throw ParameterError("covariance floor: lag grid too narrow");
    return sum / static_cast<double>(count);
  }
};

inline std::ptrdiff_t lag_count(double max_lag, double sample_rate) {
  return static_cast<std::ptrdiff_t>(std::floor(max_lag * sample_rate + 1e-9));
}

// rho(tau) = |Cov(x1(t), x2(t + tau))| / sqrt(snl_var1 snl_var2) on the
// lag grid -max_lag..max_lag, using the first `samples` samples (0 = all).
inline CovarianceTrace normalized_covariance(const ChannelPair& pair, double max_lag, double snl_var1 = 1.0,
                                             double snl_var2 = 1.0, std::size_t samples = 0) {
  pair.validate();
  if (!(snl_var1 > 0.0) || !(snl_var2 > 0.0)) throw ParameterError("SNL variances must be > 0");
  const std::size_t n = samples == 0 ? pair.size() : samples;
  if (n > pair.size()) throw ParameterError("subset size exceeds the run length");
  const std::ptrdiff_t k_max = lag_count(max_lag, pair.sample_rate);
  if (!(max_lag >= 0.0) || 2 * k_max >= static_cast<std::ptrdiff_t>(n)) {
    throw ParameterError("max_lag must be >= 0 and below half the series duration");
  }
  const std::span<const double> a(pair.x1.data(), n);
  const std::span<const double> b(pair.x2.data(), n);
  const double norm = 1.0 / std::sqrt(snl_var1 * snl_var2);
  CovarianceTrace tr;
  tr.n_samples = n;
  for (std::ptrdiff_t k = -k_max; k <= k_max; ++k) {
    tr.lag_samples.push_back(k);
    tr.lags.push_back(static_cast<double>(k) / pair.sample_rate);
    tr.rho.push_back(std::abs(lagged_moments(a, b, k).cov) * norm);
  }
  return tr;
}

struct SnrCurve {
  std::vector<double> n_samples;
  std::vector<double> snr;             // mean over runs
  std::vector<double> standard_error;  // of that mean
  ScalingFit fit;       // free exponent
  ScalingFit sqrt_fit;  // exponent fixed at 1/2
};

// Peak-to-floor ratio of rho on prefix subsets of each run, averaged over runs.
inline SnrCurve covariance_peak_snr(const std::vector<ChannelPair>& runs,
                                    const std::vector<std::size_t>& subset_sizes, double max_lag,
                                    double snl_var1 = 1.0, double snl_var2 = 1.0,
                                    std::ptrdiff_t floor_exclude = 3) {
  if (runs.size() < 2) throw ParameterError("covariance_peak_snr needs at least two runs");
  if (subset_sizes.empty()) throw ParameterError("no subset sizes given");
  SnrCurve c;
  for (std::size_t n : subset_sizes) {
    std::vector<double> per_run;
    for (const auto& run : runs) {
      if (n > run.size()) throw ParameterError("subset size exceeds run length");
      const auto tr = normalized_covariance(run, max_lag, snl_var1, snl_var2, n);
      per_run.push_back(tr.peak() / tr.floor(floor_exclude));
    }
    const double r = static_cast<double>(per_run.size());
    const double mean = std::accumulate(per_run.begin(), per_run.end(), 0.0) / r;
    double var = 0.0;
    for (double v : per_run) var += (v - mean) * (v - mean);
    var /= (r - 1.0);
    c.n_samples.push_back(static_cast<double>(n));
    c.snr.push_back(mean);
    c.standard_error.push_back(std::max(std::sqrt(var / r), 1e-12 * std::abs(mean)));
  }
  if (subset_sizes.size() >= 2) c.fit = fit_power_law(c.n_samples, c.snr, c.standard_error);
  c.sqrt_fit = fit_power_law_fixed(c.n_samples, c.snr, c.standard_error, 0.5);
  return c;
}

struct DifferenceTrace {
  std::vector<double> lags;  // s
  std::vector<std::ptrdiff_t> lag_samples;
  std::vector<double> variance;  // Var(x1(t) - x2(t + tau)), computed directly
  std::vector<double> var1;
  std::vector<double> var2;
  std::vector<double> cov;

  // Largest |direct - (var1 + var2 - 2 cov)| / direct over the trace.
  double identity_residual() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < variance.size(); ++i) {
      const double parts = var1[i] + var2[i] - 2.0 * cov[i];
      worst = std::max(worst, std::abs(variance[i] - parts) / std::abs(variance[i]));
    }
    return worst;
  }
};

inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw ParameterError("variance needs at least two samples");
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / (n - 1.0);
}

inline DifferenceTrace variance_of_difference(const ChannelPair& pair,
                                              const std::vector<std::ptrdiff_t>& lag_samples) {
  pair.validate();
  const auto len = static_cast<std::ptrdiff_t>(pair.size());
  DifferenceTrace tr;
  std::vector<double> d;
  for (std::ptrdiff_t k : lag_samples) {
    if (std::abs(k) >= len - 1) throw ParameterError("lag exceeds the data length");
    const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -k);
    const std::ptrdiff_t t1 = std::min(len, len - k);
    d.resize(static_cast<std::size_t>(t1 - t0));
    for (auto t = t0; t < t1; ++t) d[t - t0] = pair.x1[t] - pair.x2[t + k];
    const auto m = lagged_moments(pair.x1, pair.x2, k);
    tr.lag_samples.push_back(k);
    tr.lags.push_back(static_cast<double>(k) / pair.sample_rate);
    tr.variance.push_back(sample_variance(d));
    tr.var1.push_back(m.var1);
    tr.var2.push_back(m.var2);
    tr.cov.push_back(m.cov);
  }
  return tr;
}

// Symmetric integer lag grid -max_lag..max_lag.
inline std::vector<std::ptrdiff_t> symmetric_lags(std::ptrdiff_t max_lag) {
  std::vector<std::ptrdiff_t> lags;
  for (std::ptrdiff_t k = -max_lag; k <= max_lag; ++k) lags.push_back(k);
  return lags;
}

struct TwbEstimate {
  double estimate = 0.0;  // (Var_uncorr - Var_corr) / 2 over the full records
  std::vector<double> subset_estimates;
  double mean = 0.0;
  double stddev = 0.0;
  double snr = 0.0;  // mean / stddev across subsets
};

// Signal covariance from two records that differ only in whether the
// injected noise is correlated. Expanding Var(X1 - X2) gives
// Var_corr - Var_uncorr = -2 Cov(signal), so the estimate is
// (Var_uncorr - Var_corr) / 2, positive for positively correlated signals.
inline TwbEstimate twb_covariance_estimate(const ChannelPair& corr, const ChannelPair& uncorr,
                                           std::size_t subset_size) {
  corr.validate();
  uncorr.validate();
  if (corr.size() != uncorr.size() || corr.sample_rate != uncorr.sample_rate) {
    throw ParameterError("correlated and uncorrelated records must share length and sample rate");
  }
  if (subset_size < 2 || subset_size > corr.size()) throw ParameterError("invalid subset size");
  const auto dc = difference(corr);
  const auto du = difference(uncorr);
  TwbEstimate r;
  r.estimate = 0.5 * (sample_variance(du) - sample_variance(dc));
  const std::size_t k = corr.size() / subset_size;
  for (std::size_t s = 0; s < k; ++s) {
    const std::span<const double> a(dc.data() + s * subset_size, subset_size);
    const std::span<const double> b(du.data() + s * subset_size, subset_size);
    r.subset_estimates.push_back(0.5 * (sample_variance(b) - sample_variance(a)));
  }
  const double n = static_cast<double>(k);
  r.mean = std::accumulate(r.subset_estimates.begin(), r.subset_estimates.end(), 0.0) / n;
  if (k >= 2) {
    double var = 0.0;
    for (double v : r.subset_estimates) var += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(var / (n - 1.0));
    r.snr = r.stddev > 0.0 ? r.mean / r.stddev : 0.0;
  }
  return r;
}

// SNR of the variance-subtraction estimate against subset size, pooling the
// subsets of all paired runs.
inline SnrCurve twb_snr_curve(const std::vector<ChannelPair>& corr_runs,
                              const std::vector<ChannelPair>& uncorr_runs,
                              const std::vector<std::size_t>& subset_sizes) {
  if (corr_runs.size() != uncorr_runs.size() || corr_runs.empty()) {
    throw ParameterError("twb_snr_curve: need equally many correlated and uncorrelated runs");
  }
  SnrCurve c;
  for (std::size_t n : subset_sizes) {
    std::vector<double> all;
    for (std::size_t r = 0; r < corr_runs.size(); ++r) {
      auto e = twb_covariance_estimate(corr_runs[r], uncorr_runs[r], n);
      all.insert(all.end(), e.subset_estimates.begin(), e.subset_estimates.end());
    }
    if (all.size() < 2) throw ParameterError("subset size leaves fewer than two subsets");
    const double k = static_cast<double>(all.size());
    const double mean = std::accumulate(all.begin(), all.end(), 0.0) / k;
    double var = 0.0;
    for (double v : all) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / (k - 1.0));
    const double snr = mean / sd;
    c.n_samples.push_back(static_cast<double>(n));
    c.snr.push_back(snr);
    // Standard error of mean/sd for roughly normal subsets.
    c.standard_error.push_back(std::sqrt((1.0 + 0.5 * snr * snr) / k));
  }
  if (subset_sizes.size() >= 2) c.fit = fit_power_law(c.n_samples, c.snr, c.standard_error);
  c.sqrt_fit = fit_power_law_fixed(c.n_samples, c.snr, c.standard_error, 0.5);
  return c;
}

}  // namespace qcorr
