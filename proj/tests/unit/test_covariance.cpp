#include "qcorr/covariance.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

using Catch::Approx;
using namespace qcorr;

namespace {

SignalSpec white(double amplitude, Correlation c) {
  SignalSpec s;
  s.amplitude = amplitude;
  s.correlation = c;
  return s;
}

AcquisitionSpec short_acq(double duration, std::uint64_t seed) {
  AcquisitionSpec a;
  a.duration = duration;
  a.seed = seed;
  return a;
}

std::vector<ChannelPair> runs_of(const QuadratureState& st, const std::vector<SignalSpec>& sig,
                                 const AcquisitionSpec& acq, std::size_t n) {
  std::vector<ChannelPair> out;
  for (const auto& a : split_runs(acq, n)) out.push_back(generate(st, sig, a));
  return out;
}

const QuadratureState kCoherent{};

}  // namespace

TEST_CASE("self-covariance peaks at zero lag", "[covariance]") {
  auto p = generate(kCoherent, {}, short_acq(0.02, 4));
  p.x2 = p.x1;
  const double v = sample_variance(p.x1);
  const auto tr = normalized_covariance(p, 10.0 / p.sample_rate, v, v);
  REQUIRE(tr.rho.size() == 21);
  CHECK(tr.lag_samples[tr.zero_index()] == 0);
  CHECK(tr.peak() == Approx(1.0).epsilon(1e-12));
  CHECK(tr.floor() < 0.05);
}

TEST_CASE("uncorrelated background matches a brute-force oracle", "[covariance][oracle]") {
  // Oracle: independent mt19937 Gaussian pairs, |sample covariance| averaged
  // over many trials. Implementation: generator + lagged estimator.
  constexpr std::size_t n = 4000;
  constexpr int trials = 400;
  std::mt19937_64 eng(17);
  std::normal_distribution<double> g;
  double oracle = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = g(eng);
    for (auto& v : y) v = g(eng);
    oracle += std::abs(lagged_moments(x, y, 0).cov);
  }
  oracle /= trials;

  AcquisitionSpec acq = short_acq(0.2, 99);
  const auto p = generate(kCoherent, {}, acq);
  std::vector<double> impl;
  for (std::size_t s = 0; s + n <= p.size(); s += n) {
    ChannelPair sub;
    sub.sample_rate = p.sample_rate;
    sub.x1.assign(p.x1.begin() + static_cast<std::ptrdiff_t>(s), p.x1.begin() + static_cast<std::ptrdiff_t>(s + n));
    sub.x2.assign(p.x2.begin() + static_cast<std::ptrdiff_t>(s), p.x2.begin() + static_cast<std::ptrdiff_t>(s + n));
    const auto tr = normalized_covariance(sub, 10.0 / p.sample_rate);
    impl.push_back(tr.floor());
  }
  const double mean = std::accumulate(impl.begin(), impl.end(), 0.0) / static_cast<double>(impl.size());
  // Each trace floor averages 14 lags; the spread of |cov| is about 0.6 of its mean.
  const double sigma = std::hypot(0.76 * oracle / std::sqrt(trials),
                                  0.76 * oracle / std::sqrt(14.0 * static_cast<double>(impl.size())));
  INFO("oracle " << oracle << " impl " << mean);
  CHECK(std::abs(mean - oracle) < 3.0 * sigma);
}

TEST_CASE("correlated injection produces a zero-lag plateau", "[covariance]") {
  const auto p = generate(kCoherent, {white(0.2, Correlation::Correlated)}, AcquisitionSpec{});
  const auto tr = normalized_covariance(p, 50.0 / p.sample_rate);
  const double n = static_cast<double>(p.size());
  CHECK(std::abs(tr.peak() - 0.04) < 5.0 * 1.04 / std::sqrt(n));
  CHECK(tr.floor() < 0.01);
  CHECK(tr.lags.front() == Approx(-1e-4));
}

TEST_CASE("SNL normalisation cancels a common rescaling", "[covariance][property]") {
  const auto p = generate(kCoherent, {white(0.3, Correlation::Correlated)}, short_acq(0.05, 6));
  auto q = p;
  for (auto& v : q.x1) v *= 3.0;
  for (auto& v : q.x2) v *= 0.5;
  const auto a = normalized_covariance(p, 20.0 / p.sample_rate);
  const auto b = normalized_covariance(q, 20.0 / q.sample_rate, 9.0, 0.25);
  for (std::size_t i = 0; i < a.rho.size(); ++i) CHECK(b.rho[i] == Approx(a.rho[i]).epsilon(1e-10));
}

TEST_CASE("peak SNR grows as sqrt(N)", "[covariance]") {
  const std::vector<std::size_t> sizes{6250, 12500, 25000, 50000, 100000};
  const auto acq = short_acq(0.2, 11);
  const double max_lag = 20.0 / acq.sample_rate;
  const auto coh = runs_of(kCoherent, {white(0.2, Correlation::Correlated)}, acq, 6);
  const auto c = covariance_peak_snr(coh, sizes, max_lag);
  CHECK(c.fit.exponent == Approx(0.5).margin(0.1));
  CHECK(c.snr.back() > c.snr.front());

  SECTION("squeezed read-out improves the SNR by the variance ratio") {
    const double v = db_to_variance(2.6);
    const QuadratureState iss{Injection::ISS, v, v, 0.0};
    const auto sq = runs_of(iss, {white(0.2, Correlation::Correlated)}, acq, 6);
    const auto s = covariance_peak_snr(sq, sizes, max_lag);
    const double expected = (1.0 + 0.04) / (v + 0.04);
    CHECK(s.sqrt_fit.prefactor / c.sqrt_fit.prefactor == Approx(expected).epsilon(0.12));
  }
  SECTION("no signal gives a ratio near one at every size") {
    const auto bare = runs_of(kCoherent, {}, acq, 6);
    const auto z = covariance_peak_snr(bare, sizes, max_lag);
    for (double r : z.snr) CHECK(r == Approx(1.0).margin(0.8));
  }
}

TEST_CASE("variance of the difference satisfies the moment identity", "[covariance][property]") {
  std::mt19937_64 eng(2);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 5; ++trial) {
    const double v1 = u(eng), v2 = u(eng);
    const double c = 0.9 * std::sqrt(v1 * v2) * (2.0 * u(eng) / 3.0 - 1.0);
    const auto p = generate(QuadratureState{Injection::TWB, v1, v2, c}, {}, short_acq(0.02, 50 + trial));
    const auto tr = variance_of_difference(p, symmetric_lags(15));
    CHECK(tr.identity_residual() < 1e-10);
  }
}

TEST_CASE("difference variance levels", "[covariance]") {
  SECTION("coherent read-out sits at twice the SNL") {
    const auto p = generate(kCoherent, {}, AcquisitionSpec{});
    const auto tr = variance_of_difference(p, symmetric_lags(5));
    for (double v : tr.variance) CHECK(v == Approx(2.0).margin(0.02));
  }
  SECTION("TWB dips at zero lag only") {
    const auto st = build_readout_covariance(Injection::TWB, {SqueezingSpec{2.5}, SqueezingSpec{}}, {});
    const auto p = generate(st, {}, AcquisitionSpec{});
    const auto tr = variance_of_difference(p, symmetric_lags(5));
    CHECK(tr.variance[5] == Approx(2.0 * db_to_variance(2.5)).margin(0.015));
    CHECK(tr.variance[5] == Approx(1.124).margin(0.015));
    for (std::size_t i : {0u, 4u, 6u, 10u}) CHECK(tr.variance[i] == Approx(1.562).margin(0.015));
  }
}

TEST_CASE("variance subtraction recovers the injected covariance", "[covariance]") {
  const auto st = build_readout_covariance(Injection::TWB, {SqueezingSpec{2.5}, SqueezingSpec{}}, {});
  const auto acq = short_acq(0.5, 123);
  const auto corr = generate(st, {white(0.5, Correlation::Correlated)}, acq);
  const auto unc = generate(st, {white(0.5, Correlation::Uncorrelated)}, acq);
  const auto e = twb_covariance_estimate(corr, unc, 5000);
  const double n = static_cast<double>(corr.size());
  CHECK(e.estimate == Approx(0.25).margin(5.0 * 2.0 / std::sqrt(n)));
  CHECK(e.subset_estimates.size() == 50);
  CHECK(e.snr > 1.0);
  CHECK(e.mean == Approx(e.estimate).margin(1e-3));

  SECTION("zero signal gives zero") {
    const auto a = generate(st, {white(0.0, Correlation::Correlated)}, acq);
    const auto b = generate(st, {white(0.0, Correlation::Uncorrelated)}, acq);
    CHECK(twb_covariance_estimate(a, b, 5000).estimate == Approx(0.0).margin(1e-12));
  }
  SECTION("SNR curve follows sqrt(N)") {
    const auto ca = runs_of(st, {white(0.5, Correlation::Correlated)}, short_acq(0.2, 5), 4);
    const auto ua = runs_of(st, {white(0.5, Correlation::Uncorrelated)}, short_acq(0.2, 5), 4);
    const auto c = twb_snr_curve(ca, ua, {500, 1000, 2000, 5000, 10000});
    CHECK(c.fit.exponent == Approx(0.5).margin(0.1));
  }
}

TEST_CASE("covariance estimators reject invalid input", "[covariance]") {
  const auto p = generate(kCoherent, {}, short_acq(0.001, 1));
  CHECK_THROWS_AS(normalized_covariance(p, 1.0), ParameterError);
  CHECK_THROWS_AS(normalized_covariance(p, 1e-5, 0.0), ParameterError);
  CHECK_THROWS_AS(normalized_covariance(p, 1e-5, 1.0, 1.0, p.size() + 1), ParameterError);
  CHECK_THROWS_AS(covariance_peak_snr({p}, {100}, 1e-5), ParameterError);
  const auto longer = generate(kCoherent, {}, short_acq(0.002, 1));
  CHECK_THROWS_AS(twb_covariance_estimate(p, longer, 10), ParameterError);
  CHECK_THROWS_AS(twb_covariance_estimate(p, p, 1), ParameterError);
  CHECK_THROWS_AS(variance_of_difference(p, {static_cast<std::ptrdiff_t>(p.size())}), ParameterError);
}
