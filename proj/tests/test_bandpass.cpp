#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "ecgkit/bandpass.hpp"
#include "ecgkit/errors.hpp"

using namespace ecg;

namespace {

// Independent oracle: analytic Butterworth magnitude |H_lp(jx)|^2 =
// 1 / (1 + x^(2n)) pushed through the pre-warped low-pass-to-bandpass
// frequency mapping. Evaluates the design target without touching the
// filter code.
double analytic_bandpass_mag(double f_hz, double low_hz, double high_hz, int order, double fs) {
  constexpr double pi = std::numbers::pi;
  const double wl = 4.0 * std::tan(pi * low_hz / fs);
  const double wh = 4.0 * std::tan(pi * high_hz / fs);
  const double bw = wh - wl;
  const double wo_sq = wl * wh;
  const double w = 4.0 * std::tan(pi * f_hz / fs);
  const double x = (w * w - wo_sq) / (bw * w);
  return 1.0 / std::sqrt(1.0 + std::pow(x * x, order));
}

double mag_db(const IirCoefficients& c, double f_hz, double fs) {
  const double omega = 2.0 * std::numbers::pi * f_hz / fs;
  return 20.0 * std::log10(std::abs(frequency_response(c, omega)));
}

double passband_peak_db(const IirCoefficients& c, double fs) {
  double peak = -1e30;
  for (double f = 1.0; f <= 30.0; f += 0.01) peak = std::max(peak, mag_db(c, f, fs));
  return peak;
}

const BandpassSpec kDefault{5.0, 15.0, 2, 500.0};

}  // namespace

TEST_CASE("normalized cutoffs of the default spec") {
  const double nyquist = 0.5 * kDefault.sampling_hz;
  CHECK(kDefault.lowcut_hz / nyquist == doctest::Approx(0.02));
  CHECK(kDefault.highcut_hz / nyquist == doctest::Approx(0.06));
}

TEST_CASE("design matches the analytic magnitude oracle across the spectrum") {
  const IirCoefficients c = design_bandpass(kDefault);
  for (double f = 0.5; f < 250.0; f += 3.7) {
    const double expected = analytic_bandpass_mag(f, 5.0, 15.0, 2, 500.0);
    const double omega = 2.0 * std::numbers::pi * f / 500.0;
    const double got = std::abs(frequency_response(c, omega));
    CHECK(got == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("-3 dB at both cutoffs relative to the passband peak") {
  const IirCoefficients c = design_bandpass(kDefault);
  const double peak = passband_peak_db(c, 500.0);
  CHECK(std::abs(mag_db(c, 5.0, 500.0) - peak - (-3.0)) <= 0.1);
  CHECK(std::abs(mag_db(c, 15.0, 500.0) - peak - (-3.0)) <= 0.1);
  // the oracle pins the exact cutoff value: 20*log10(1/sqrt(2))
  CHECK(20.0 * std::log10(analytic_bandpass_mag(5.0, 5, 15, 2, 500)) ==
        doctest::Approx(-3.0102999566));
}

TEST_CASE("baseline wander and mains hum are attenuated by at least 20 dB") {
  const IirCoefficients c = design_bandpass(kDefault);
  const double peak = passband_peak_db(c, 500.0);
  CHECK(peak - mag_db(c, 0.5, 500.0) >= 20.0);
  CHECK(peak - mag_db(c, 60.0, 500.0) >= 20.0);
}

TEST_CASE("coefficients reproduce an external reference design") {
  // butter(2, [0.02, 0.06], btype="band") computed with SciPy 1.x.
  const IirCoefficients c = design_bandpass(kDefault);
  const double b_ref[] = {0.003621681514928638, 0.0, -0.007243363029857276, 0.0,
                          0.003621681514928638};
  const double a_ref[] = {1.0, -3.8000503652844575, 5.439339787793407, -3.4763426471814802,
                          0.8371816512560225};
  REQUIRE(c.b.size() == 5);
  REQUIRE(c.a.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(c.b[static_cast<std::size_t>(i)] == doctest::Approx(b_ref[i]).epsilon(1e-12));
    CHECK(c.a[static_cast<std::size_t>(i)] == doctest::Approx(a_ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("design is deterministic bit for bit") {
  const IirCoefficients c1 = design_bandpass(kDefault);
  const IirCoefficients c2 = design_bandpass(kDefault);
  CHECK(c1.b == c2.b);
  CHECK(c1.a == c2.a);
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(design_bandpass({20.0, 15.0, 2, 500.0}), DomainError);
  CHECK_THROWS_AS(design_bandpass({5.0, 260.0, 2, 500.0}), DomainError);  // above Nyquist
  CHECK_THROWS_AS(design_bandpass({5.0, 15.0, 0, 500.0}), DomainError);
  CHECK_THROWS_AS(design_bandpass({0.0, 15.0, 2, 500.0}), DomainError);
}

TEST_CASE("zero input stays zero") {
  const IirCoefficients c = design_bandpass(kDefault);
  const std::vector<double> x(1000, 0.0);
  const auto y = apply_filter(c, x);
  REQUIRE(y.size() == x.size());
  for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("impulse response transform matches H(e^jw) from the coefficients") {
  const IirCoefficients c = design_bandpass(kDefault);
  std::vector<double> impulse(8192, 0.0);
  impulse[0] = 1.0;
  const auto h = apply_filter(c, impulse);

  const double omega = 2.0 * std::numbers::pi * 10.0 / 500.0;
  std::complex<double> dtft(0.0, 0.0);
  for (std::size_t n = 0; n < h.size(); ++n)
    dtft += h[n] * std::exp(std::complex<double>(0.0, -omega * static_cast<double>(n)));
  const double direct = std::abs(frequency_response(c, omega));
  CHECK(std::abs(dtft) == doctest::Approx(direct).epsilon(1e-9));
  CHECK(direct > 0.99);  // 10 Hz sits mid-passband
}

TEST_CASE("leading zeros delay the output exactly") {
  const IirCoefficients c = design_bandpass(kDefault);
  std::vector<double> x(300);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.13 * static_cast<double>(i));
  const auto y = apply_filter(c, x);

  const int k = 17;
  std::vector<double> delayed(x.size() + k, 0.0);
  std::copy(x.begin(), x.end(), delayed.begin() + k);
  const auto yd = apply_filter(c, delayed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) CHECK(yd[i] == 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(yd[i + k] == y[i]);
}

TEST_CASE("filtering is linear") {
  const IirCoefficients c = design_bandpass(kDefault);
  std::vector<double> x(500), y(500);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::sin(0.05 * static_cast<double>(i));
    y[i] = std::cos(0.21 * static_cast<double>(i)) * 0.7;
  }
  const double alpha = 2.25, beta = -0.75;
  std::vector<double> combo(500);
  for (std::size_t i = 0; i < x.size(); ++i) combo[i] = alpha * x[i] + beta * y[i];

  const auto fx = apply_filter(c, x);
  const auto fy = apply_filter(c, y);
  const auto fc = apply_filter(c, combo);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double expected = alpha * fx[i] + beta * fy[i];
    CHECK(fc[i] == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("default design is stable: impulse response dies out within 10 s") {
  const IirCoefficients c = design_bandpass(kDefault);
  std::vector<double> impulse(6000, 0.0);
  impulse[0] = 1.0;
  const auto h = apply_filter(c, impulse);
  for (std::size_t n = 5000; n < h.size(); ++n) CHECK(std::abs(h[n]) < 1e-12);
}

TEST_CASE("non-finite samples are rejected") {
  const IirCoefficients c = design_bandpass(kDefault);
  std::vector<double> x(10, 0.0);
  x[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(apply_filter(c, x), DataError);
}
