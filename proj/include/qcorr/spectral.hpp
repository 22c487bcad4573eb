#pragma once

// Segment-averaged auto and cross spectra.
//
// A series of N samples is cut into n_spectra non-overlapping rectangular
// segments of L = N / n_spectra samples (the remainder is dropped). Each
// segment contributes the one-sided periodogram
//   P_k = c_k * X1_k * conj(X2_k) / L,   c_0 = c_{L/2} = 1/2, otherwise 1,
// which is the density normalised so that unit-variance white noise reads 1
// (the SNL) at every interior bin. Bins are spaced sample_rate / L apart.

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include <fftw3.h>

#include "qcorr/errors.hpp"
#include "qcorr/fit.hpp"
#include "qcorr/generator.hpp"

namespace qcorr {

namespace detail {

// FFTW planning is not re-entrant; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(fftw_alloc_real(n), fftw_free),
        out_(fftw_alloc_complex(n / 2 + 1), fftw_free) {
    std::scoped_lock lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE);
    if (plan_ == nullptr) throw ParameterError("FFTW could not plan a transform");
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::scoped_lock lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }

  std::size_t bins() const { return n_ / 2 + 1; }

  // Transforms `x` (length n); returns a view over the bins() outputs.
  std::span<const std::complex<double>> operator()(std::span<const double> x) {
    std::copy(x.begin(), x.end(), in_.get());
    fftw_execute(plan_);
    return {reinterpret_cast<const std::complex<double>*>(out_.get()), bins()};
  }

 private:
  std::size_t n_;
  std::unique_ptr<double, decltype(&fftw_free)> in_;
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out_;
  fftw_plan plan_ = nullptr;
};

inline double bin_weight(std::size_t k, std::size_t length) {
  return (k == 0 || (length % 2 == 0 && k == length / 2)) ? 0.5 : 1.0;
}

}  // namespace detail

enum class SpectrumKind { PSD, CPSD, CLSD, LSD };

struct SpectralEstimate {
  SpectrumKind kind = SpectrumKind::PSD;
  std::vector<double> frequencies;  // Hz, uniform grid starting at 0
  // PSD / CPSD: SNL-normalised power (|average| for CPSD).
  // CLSD / LSD: m/sqrt(Hz) through `calibration`.
  std::vector<double> values;
  std::vector<double> standard_error;  // per-bin 1-sigma, same units as values
  std::vector<std::complex<double>> cross;  // complex average, CPSD/CLSD only
  std::size_t n_spectra = 1;
  std::size_t segment_length = 0;
  double sample_rate = 0.0;
  double calibration = 1.0;

  double resolution() const { return sample_rate / static_cast<double>(segment_length); }
};

namespace detail {

struct Averaged {
  std::vector<std::complex<double>> mean;
  std::vector<double> standard_error;  // of the complex mean
  std::size_t length;
};

// Mean over segments of c_k X_k conj(Y_k) / L and its standard error.
inline Averaged averaged_periodogram(std::span<const double> x, std::span<const double> y,
                                     std::size_t n_spectra) {
  if (x.empty()) throw ParameterError("spectral estimate of an empty series");
  if (n_spectra < 1) throw ParameterError("n_spectra must be >= 1");
  if (n_spectra > x.size() / 2) throw ParameterError("n_spectra exceeds half the sample count");
  const std::size_t len = x.size() / n_spectra;
  const bool same = x.data() == y.data();
  RealFft fx(len);
  std::unique_ptr<RealFft> fy = same ? nullptr : std::make_unique<RealFft>(len);
  const std::size_t nb = fx.bins();
  std::vector<std::complex<double>> sum(nb);
  std::vector<double> sum_sq(nb, 0.0);
  std::vector<std::complex<double>> xs(nb);
  for (std::size_t s = 0; s < n_spectra; ++s) {
    auto sx = fx(x.subspan(s * len, len));
    std::copy(sx.begin(), sx.end(), xs.begin());
    auto sy = same ? std::span<const std::complex<double>>(xs) : (*fy)(y.subspan(s * len, len));
    for (std::size_t k = 0; k < nb; ++k) {
      const auto p = detail::bin_weight(k, len) * xs[k] * std::conj(sy[k]) / static_cast<double>(len);
      sum[k] += p;
      sum_sq[k] += std::norm(p);
    }
  }
  Averaged out{std::vector<std::complex<double>>(nb), std::vector<double>(nb), len};
  const double m = static_cast<double>(n_spectra);
  for (std::size_t k = 0; k < nb; ++k) {
    out.mean[k] = sum[k] / m;
    if (n_spectra > 1) {
      const double var = std::max(0.0, (sum_sq[k] - m * std::norm(out.mean[k])) / (m - 1.0));
      out.standard_error[k] = std::sqrt(var / m);
    } else {
      out.standard_error[k] = std::abs(out.mean[k]);
    }
  }
  return out;
}

inline std::vector<double> frequency_grid(std::size_t bins, std::size_t length, double fs) {
  std::vector<double> f(bins);
  for (std::size_t k = 0; k < bins; ++k) f[k] = static_cast<double>(k) * fs / static_cast<double>(length);
  return f;
}

}  // namespace detail

// Averaged periodogram of one series, SNL-normalised.
inline SpectralEstimate psd(std::span<const double> series, double sample_rate, std::size_t n_spectra) {
  if (!(sample_rate > 0.0)) throw ParameterError("sample_rate must be > 0");
  auto avg = detail::averaged_periodogram(series, series, n_spectra);
  SpectralEstimate e;
  e.kind = SpectrumKind::PSD;
  e.n_spectra = n_spectra;
  e.segment_length = avg.length;
  e.sample_rate = sample_rate;
  e.frequencies = detail::frequency_grid(avg.mean.size(), avg.length, sample_rate);
  e.values.resize(avg.mean.size());
  for (std::size_t k = 0; k < avg.mean.size(); ++k) e.values[k] = avg.mean[k].real();
  e.standard_error = std::move(avg.standard_error);
  return e;
}

// Linear spectral density sqrt(PSD) * calibration.
inline SpectralEstimate lsd(std::span<const double> series, double sample_rate, std::size_t n_spectra,
                            double calibration) {
  if (!(calibration > 0.0)) throw ParameterError("calibration must be > 0");
  SpectralEstimate e = psd(series, sample_rate, n_spectra);
  e.kind = SpectrumKind::LSD;
  e.calibration = calibration;
  for (std::size_t k = 0; k < e.values.size(); ++k) {
    const double root = std::sqrt(e.values[k]);
    e.standard_error[k] = root > 0.0 ? calibration * e.standard_error[k] / (2.0 * root) : 0.0;
    e.values[k] = calibration * root;
  }
  return e;
}

// Cross-power spectral density of the pair; values hold |average|.
inline SpectralEstimate cpsd(const ChannelPair& pair, std::size_t n_spectra) {
  pair.validate();
  auto avg = detail::averaged_periodogram(pair.x1, pair.x2, n_spectra);
  SpectralEstimate e;
  e.kind = SpectrumKind::CPSD;
  e.n_spectra = n_spectra;
  e.segment_length = avg.length;
  e.sample_rate = pair.sample_rate;
  e.calibration = 1.0;
  e.frequencies = detail::frequency_grid(avg.mean.size(), avg.length, pair.sample_rate);
  e.values.resize(avg.mean.size());
  for (std::size_t k = 0; k < avg.mean.size(); ++k) e.values[k] = std::abs(avg.mean[k]);
  e.standard_error = std::move(avg.standard_error);
  e.cross = std::move(avg.mean);
  return e;
}

// Cross-linear spectral density sqrt(|CPSD|), in m/sqrt(Hz) via the pair's calibration.
// The uncorrelated floor falls as n_spectra^(-1/4); a correlated component does not.
inline SpectralEstimate clsd(const ChannelPair& pair, std::size_t n_spectra) {
  SpectralEstimate e = cpsd(pair, n_spectra);
  e.kind = SpectrumKind::CLSD;
  e.calibration = pair.calibration;
  for (std::size_t k = 0; k < e.values.size(); ++k) {
    const double root = std::sqrt(e.values[k]);
    e.standard_error[k] = root > 0.0 ? pair.calibration * e.standard_error[k] / (2.0 * root) : 0.0;
    e.values[k] = pair.calibration * root;
  }
  return e;
}

struct Band {
  double low = 0.0;   // Hz, inclusive; the DC bin is always excluded
  double high = 0.0;  // Hz, inclusive
};

inline Band full_band(const SpectralEstimate& e) { return {0.0, 0.5 * e.sample_rate}; }

struct BandFloor {
  double level = 0.0;      // in the estimate's units
  double sigma_log = 0.0;  // 1-sigma relative uncertainty of level
  std::size_t bins = 0;
};

// Band level of a spectral estimate.
//   PSD:  mean power.            LSD:  sqrt of mean power (in LSD units).
//   CPSD: RMS of |average|.      CLSD: sqrt of that RMS (in CLSD units).
// For cross spectra the RMS magnitude is used because E|average|^2 of two
// independent channels is exactly var1 var2 / n_spectra, so the floor
// follows n_spectra^(-1/2) (CPSD) and n_spectra^(-1/4) (CLSD) without bias.
inline BandFloor band_floor(const SpectralEstimate& e, Band band) {
  std::vector<double> p;
  const bool linear = e.kind == SpectrumKind::CLSD || e.kind == SpectrumKind::LSD;
  const double cal = linear ? e.calibration : 1.0;
  for (std::size_t k = 1; k < e.values.size(); ++k) {
    if (e.frequencies[k] < band.low || e.frequencies[k] > band.high) continue;
    const double v = linear ? (e.values[k] / cal) * (e.values[k] / cal) : e.values[k];
    p.push_back(v);
  }
  if (p.size() < 2) throw ParameterError("band_floor: fewer than two bins in band");
  const double n = static_cast<double>(p.size());
  const bool cross = e.kind == SpectrumKind::CPSD || e.kind == SpectrumKind::CLSD;
  BandFloor f;
  f.bins = p.size();
  if (cross) {
    for (double& v : p) v *= v;
  }
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / n;
  double var = 0.0;
  for (double v : p) var += (v - mean) * (v - mean);
  var /= (n - 1.0);
  const double rel = std::sqrt(var / n) / mean;
  // Power-domain value and the exponent that maps it back to the estimate's units.
  double power = cross ? std::sqrt(mean) : mean;
  double rel_power = cross ? 0.5 * rel : rel;
  if (linear) {
    f.level = cal * std::sqrt(power);
    f.sigma_log = 0.5 * rel_power;
  } else {
    f.level = power;
    f.sigma_log = rel_power;
  }
  return f;
}

// Log-log fit of band floor against n_spectra.
inline ScalingFit floor_scaling_fit(const std::vector<SpectralEstimate>& estimates, Band band) {
  std::set<std::size_t> distinct;
  for (const auto& e : estimates) distinct.insert(e.n_spectra);
  if (distinct.size() < 4) throw FitError("floor_scaling_fit: need at least 4 distinct n_spectra");
  std::vector<double> x, y, s;
  for (const auto& e : estimates) {
    const BandFloor f = band_floor(e, band);
    x.push_back(static_cast<double>(e.n_spectra));
    y.push_back(f.level);
    s.push_back(f.level * f.sigma_log);
  }
  return fit_power_law(x, y, s);
}

// Integrated power of a PSD over a band as a fraction of the sample variance
// scale: the full band returns the mean square of the series.
inline double band_power(const SpectralEstimate& e, Band band) {
  if (e.kind != SpectrumKind::PSD) throw ParameterError("band_power needs a PSD estimate");
  double sum = 0.0;
  for (std::size_t k = 0; k < e.values.size(); ++k) {
    if (e.frequencies[k] < band.low || e.frequencies[k] > band.high) continue;
    sum += e.values[k];
  }
  return 2.0 * sum / static_cast<double>(e.segment_length);
}

struct ToneReport {
  double frequency = 0.0;  // Hz, of the peak bin
  double peak = 0.0;
  double floor = 0.0;      // median of the band with the peak region excluded
  double excess() const { return (peak - floor) / floor; }
};

// Peak bin nearest `frequency` (within +-2 bins) against the surrounding floor.
inline ToneReport tone_to_floor(const SpectralEstimate& e, double frequency, Band band) {
  const double df = e.resolution();
  const auto centre = static_cast<std::size_t>(std::llround(frequency / df));
  if (centre >= e.values.size()) throw ParameterError("tone frequency beyond the spectrum");
  std::size_t best = centre;
  for (std::size_t k = centre > 2 ? centre - 2 : 1; k <= std::min(centre + 2, e.values.size() - 1); ++k) {
    if (e.values[k] > e.values[best]) best = k;
  }
  std::vector<double> rest;
  for (std::size_t k = 1; k < e.values.size(); ++k) {
    if (e.frequencies[k] < band.low || e.frequencies[k] > band.high) continue;
    if (k + 3 >= best && k <= best + 3) continue;
    rest.push_back(e.values[k]);
  }
  if (rest.empty()) throw ParameterError("tone_to_floor: no floor bins in band");
  std::nth_element(rest.begin(), rest.begin() + rest.size() / 2, rest.end());
  return {e.frequencies[best], e.values[best], rest[rest.size() / 2]};
}

}  // namespace qcorr
