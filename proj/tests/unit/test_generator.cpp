#include "qcorr/generator.hpp"
#include "qcorr/spectral.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <set>

using Catch::Approx;
using namespace qcorr;

namespace {

struct Stats {
  double v1, v2, c;
};

Stats moments(const ChannelPair& p) {
  const double n = static_cast<double>(p.size());
  const double m1 = std::accumulate(p.x1.begin(), p.x1.end(), 0.0) / n;
  const double m2 = std::accumulate(p.x2.begin(), p.x2.end(), 0.0) / n;
  double s11 = 0, s22 = 0, s12 = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s11 += (p.x1[i] - m1) * (p.x1[i] - m1);
    s22 += (p.x2[i] - m2) * (p.x2[i] - m2);
    s12 += (p.x1[i] - m1) * (p.x2[i] - m2);
  }
  return {s11 / (n - 1), s22 / (n - 1), s12 / (n - 1)};
}

SignalSpec white(double amplitude, Correlation c) {
  SignalSpec s;
  s.kind = SignalKind::WhiteNoise;
  s.amplitude = amplitude;
  s.correlation = c;
  return s;
}

const QuadratureState kCoherent{};

}  // namespace

TEST_CASE("coherent read-out is SNL-normalised and uncorrelated", "[generator]") {
  const auto p = generate(kCoherent, {}, AcquisitionSpec{});
  REQUIRE(p.size() == 500000);
  const auto s = moments(p);
  CHECK(s.v1 == Approx(1.0).margin(0.005));
  CHECK(s.v2 == Approx(1.0).margin(0.005));
  CHECK(s.c / std::sqrt(s.v1 * s.v2) == Approx(0.0).margin(0.003));
  CHECK(p.calibration == kReferenceShotNoiseAsd);
  CHECK(p.provenance.rfind("coherent;seed=42", 0) == 0);
}

TEST_CASE("TWB read-out carries the squeezed difference", "[generator]") {
  const auto st = build_readout_covariance(Injection::TWB, {SqueezingSpec{2.5}, SqueezingSpec{}}, {});
  const auto p = generate(st, {}, AcquisitionSpec{});
  const auto s = moments(p);
  const double diff = 0.5 * (s.v1 + s.v2 - 2 * s.c);
  CHECK(diff == Approx(0.562).margin(0.01));
  const double n = static_cast<double>(p.size());
  CHECK(std::abs(s.v1 - st.var1) < 5 * st.var1 * std::sqrt(2 / n));
  CHECK(std::abs(s.c - st.cov12) < 5 * std::sqrt((st.var1 * st.var2 + st.cov12 * st.cov12) / n));
}

TEST_CASE("asymmetric and anti-correlated states are reproduced", "[generator]") {
  for (const QuadratureState st : {QuadratureState{Injection::TWB, 0.1, 10.0, 0.9},
                                   QuadratureState{Injection::TWB, 0.7, 0.9, -0.5}}) {
    AcquisitionSpec acq;
    acq.seed = 8;
    const auto s = moments(generate(st, {}, acq));
    const double n = 500000.0;
    CHECK(std::abs(s.v1 - st.var1) < 5 * st.var1 * std::sqrt(2 / n));
    CHECK(std::abs(s.v2 - st.var2) < 5 * st.var2 * std::sqrt(2 / n));
    CHECK(std::abs(s.c - st.cov12) < 5 * std::sqrt((st.var1 * st.var2 + st.cov12 * st.cov12) / n));
  }
}

TEST_CASE("correlated and uncorrelated injection", "[generator]") {
  const double n = 500000.0;
  const double a = 0.2;
  const double sigma = std::sqrt(((1 + a * a) * (1 + a * a) + a * a * a * a) / n);

  const auto corr = moments(generate(kCoherent, {white(a, Correlation::Correlated)}, AcquisitionSpec{}));
  CHECK(std::abs(corr.c - 0.04) < 5 * sigma);

  const auto unc = moments(generate(kCoherent, {white(a, Correlation::Uncorrelated)}, AcquisitionSpec{}));
  CHECK(std::abs(unc.c) < 5 * sigma);
  CHECK(unc.v1 == Approx(1.04).margin(5 * 1.04 * std::sqrt(2 / n)));
}

TEST_CASE("generation is deterministic and independent of the worker count", "[generator][property]") {
  const auto st = build_readout_covariance(Injection::TWB, {SqueezingSpec{3.0}, SqueezingSpec{}}, {});
  SignalSpec tone;
  tone.kind = SignalKind::Tone;
  tone.amplitude = 0.7;
  tone.correlation = Correlation::Uncorrelated;
  const std::vector<SignalSpec> sig{white(0.3, Correlation::Correlated), tone};
  AcquisitionSpec acq;
  acq.duration = 0.2;
  const auto a = generate(st, sig, acq);
  const auto b = generate(st, sig, acq);
  const auto c = generate(st, sig, acq, kReferenceShotNoiseAsd, 7);
  CHECK(a.x1 == b.x1);
  CHECK(a.x2 == b.x2);
  CHECK(a.x1 == c.x1);
  CHECK(a.x2 == c.x2);
  acq.seed += 1;
  CHECK(generate(st, sig, acq).x1 != a.x1);
}

TEST_CASE("toggling one source leaves the others' draws untouched", "[generator][property]") {
  AcquisitionSpec acq;
  acq.duration = 0.05;
  const auto st = build_readout_covariance(Injection::ISS, {SqueezingSpec{3.0}, SqueezingSpec{3.0}}, {});
  const auto bare = generate(st, {}, acq);
  const auto with = generate(st, {white(0.5, Correlation::Correlated)}, acq);
  const auto extra = generate(st, {white(0.5, Correlation::Correlated), white(0.1, Correlation::Uncorrelated)}, acq);
  for (std::size_t i = 0; i < bare.size(); ++i) {
    // The injected term is shared, so both channels shift by the same amount.
    REQUIRE((with.x1[i] - bare.x1[i]) == Approx(with.x2[i] - bare.x2[i]).margin(1e-12));
  }
  // Adding a second signal must not change the first signal's stream.
  const auto only_second = generate(st, {white(0.0, Correlation::Correlated), white(0.1, Correlation::Uncorrelated)}, acq);
  for (std::size_t i = 0; i < bare.size(); ++i) {
    REQUIRE(extra.x1[i] - only_second.x1[i] == Approx(with.x1[i] - bare.x1[i]).margin(1e-12));
  }
}

TEST_CASE("channel roles are exchangeable in a symmetric configuration", "[generator][property]") {
  const auto st = build_readout_covariance(Injection::ISS, {SqueezingSpec{3.0}, SqueezingSpec{3.0}}, {});
  AcquisitionSpec acq;
  acq.seed = 77;
  const auto one = moments(generate(st, {white(0.6, Correlation::Channel1Only)}, acq));
  const auto two = moments(generate(st, {white(0.6, Correlation::Channel2Only)}, acq));
  const double n = 500000.0;
  const double v_sig = st.var1 + 0.36;
  CHECK(std::abs(one.v1 - two.v2) < 5 * v_sig * std::sqrt(4 / n));
  CHECK(std::abs(one.v2 - two.v1) < 5 * st.var1 * std::sqrt(4 / n));
  CHECK(std::abs(one.c - two.c) < 5 * std::sqrt(2 * v_sig * st.var1 / n));
}

TEST_CASE("tone lands at the down-mixed frequency", "[generator]") {
  SignalSpec tone;
  tone.kind = SignalKind::Tone;
  tone.amplitude = 1.0;
  tone.tone_frequency = 13.55e6;
  tone.correlation = Correlation::Channel1Only;
  const auto p = generate(kCoherent, {tone}, AcquisitionSpec{});
  const auto s1 = psd(p.x1, p.sample_rate, 1000);
  const auto s2 = psd(p.x2, p.sample_rate, 1000);
  const Band band{0.0, 100e3};
  const auto r1 = tone_to_floor(s1, 50e3, band);
  CHECK(std::abs(r1.frequency - 50e3) <= s1.resolution());
  CHECK(r1.excess() > 50.0);
  const auto r2 = tone_to_floor(s2, 50e3, band);
  CHECK(r2.excess() < 0.3);

  SECTION("phase override") {
    tone.phase = 0.0;
    tone.correlation = Correlation::Correlated;
    AcquisitionSpec acq;
    acq.duration = 0.001;
    const auto q = generate(QuadratureState{Injection::Coherent, 1.0, 1.0, 0.0}, {tone}, acq);
    const auto bare = generate(kCoherent, {}, acq);
    const double t = 3.0 / acq.sample_rate;
    CHECK(q.x1[3] - bare.x1[3] == Approx(std::sin(2 * std::numbers::pi * 50e3 * t)).margin(1e-12));
    CHECK(q.x2[3] - bare.x2[3] == Approx(std::sin(2 * std::numbers::pi * 50e3 * t)).margin(1e-12));
  }
}

TEST_CASE("generator rejects invalid inputs", "[generator]") {
  SignalSpec tone;
  tone.kind = SignalKind::Tone;
  tone.amplitude = 1.0;
  tone.tone_frequency = 13.7e6;
  CHECK_THROWS_AS(generate(kCoherent, {tone}, AcquisitionSpec{}), ParameterError);

  CHECK_THROWS_AS(generate(QuadratureState{Injection::TWB, 0.5, 0.5, 0.9}, {}, AcquisitionSpec{}), StateError);

  auto narrow = white(0.2, Correlation::Correlated);
  narrow.band_low = 13.45e6;
  CHECK_THROWS_AS(generate(kCoherent, {narrow}, AcquisitionSpec{}), ParameterError);

  AcquisitionSpec acq;
  acq.duration = 1.5e-6;
  CHECK_THROWS_AS(generate(kCoherent, {}, acq), ParameterError);
  acq = AcquisitionSpec{};
  acq.lowpass_cutoff = 300e3;
  CHECK_THROWS_AS(generate(kCoherent, {}, acq), ParameterError);
}

TEST_CASE("split_runs derives distinct reproducible seeds", "[generator]") {
  AcquisitionSpec acq;
  acq.seed = 42;
  const auto one = split_runs(acq, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].seed == derive_seed(42, 0));
  CHECK(one[0].seed != 42);

  const auto runs = split_runs(acq, 19);
  std::set<std::uint64_t> seeds;
  for (const auto& r : runs) {
    seeds.insert(r.seed);
    CHECK(r.sample_rate == acq.sample_rate);
    CHECK(r.duration == acq.duration);
  }
  CHECK(seeds.size() == 19);

  const auto again = split_runs(acq, 19);
  for (std::size_t i = 0; i < 19; ++i) CHECK(again[i].seed == runs[i].seed);
  CHECK_THROWS_AS(split_runs(acq, 0), ParameterError);
}
