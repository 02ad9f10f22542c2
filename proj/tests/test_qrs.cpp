#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ecgkit/errors.hpp"
#include "ecgkit/qrs.hpp"
#include "ecgkit/rng.hpp"
#include "support/peak_reference.hpp"
#include "support/synthetic.hpp"

using namespace ecg;
using testsupport::brute_force_peaks;

namespace {

DetectorConfig resolved_default() { return DetectorConfig{}.resolved(500.0); }

// brute-force evaluation of the enhancement pipeline, used as the oracle
// for the unit-step example
std::vector<double> bf_enhance(const std::vector<double>& sig, int w) {
  const int n = static_cast<int>(sig.size());
  std::vector<double> sq;
  for (int i = 0; i + 1 < n; ++i) {
    const double d = sig[static_cast<std::size_t>(i + 1)] - sig[static_cast<std::size_t>(i)];
    sq.push_back(d * d);
  }
  const int m = static_cast<int>(sq.size());
  std::vector<double> full(static_cast<std::size_t>(m + w - 1), 0.0);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < w; ++k) full[static_cast<std::size_t>(i + k)] += sq[static_cast<std::size_t>(i)];
  std::vector<double> same(sq.size());
  for (int i = 0; i < m; ++i) same[static_cast<std::size_t>(i)] = full[static_cast<std::size_t>(i + (w - 1) / 2)];
  const double mn = *std::min_element(same.begin(), same.end());
  const double mx = *std::max_element(same.begin(), same.end());
  if (mx == mn) return std::vector<double>(same.size(), 0.0);
  for (double& v : same) v = (v - mn) / (mx - mn);
  return same;
}

}  // namespace

TEST_CASE("enhance: constant signal collapses to zeros") {
  DetectorConfig cfg;
  const std::vector<double> sig(100, 3.25);
  const auto out = enhance(sig, cfg);
  REQUIRE(out.size() == sig.size() - 1);
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("enhance: output is the brute-force pipeline, bounded in [0,1]") {
  DetectorConfig cfg;
  SplitMix64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> sig(40 + rng.bounded(60));
    for (double& v : sig) v = rng.next_double() * 4.0 - 2.0;
    const auto got = enhance(sig, cfg);
    const auto expected = bf_enhance(sig, cfg.integration_window);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
      CHECK(got[i] >= 0.0);
      CHECK(got[i] <= 1.0);
    }
  }
}

TEST_CASE("enhance: a unit step concentrates energy at the step") {
  DetectorConfig cfg;
  const int k = 50;
  std::vector<double> sig(120, 0.0);
  for (std::size_t i = k; i < sig.size(); ++i) sig[i] = 1.0;
  const auto out = enhance(sig, cfg);
  // the global maximum is attained inside [k - w/2, k + w/2]
  const double global_max = *std::max_element(out.begin(), out.end());
  const int halfw = cfg.integration_window / 2;
  double window_max = 0.0;
  for (int i = k - halfw; i <= k + halfw; ++i)
    window_max = std::max(window_max, out[static_cast<std::size_t>(i)]);
  CHECK(window_max == global_max);
  CHECK(global_max == 1.0);
}

TEST_CASE("enhance: too-short input is a domain error") {
  DetectorConfig cfg;
  CHECK_THROWS_AS(enhance(std::vector<double>(cfg.integration_window + 1, 0.0), cfg), DomainError);
}

TEST_CASE("find_peaks: all-zero input yields nothing") {
  const auto cfg = resolved_default();
  CHECK(find_peaks(std::vector<double>(500, 0.0), cfg).empty());
}

TEST_CASE("find_peaks: equal spikes closer than min distance keep the earlier one") {
  auto cfg = resolved_default();
  cfg.peak_min_distance = 100;
  std::vector<double> x(200, 0.0);
  x[50] = 1.0;
  x[100] = 1.0;
  const auto got = find_peaks(x, cfg);
  const auto expected = brute_force_peaks(x, cfg);
  CHECK(got == expected);
  REQUIRE(got.size() == 1);
  CHECK(got[0] == 50);
}

TEST_CASE("find_peaks: triangular peak detected at its apex") {
  const auto cfg = resolved_default();
  std::vector<double> x(60, 0.0);
  for (int i = 0; i <= 5; ++i) {
    x[static_cast<std::size_t>(25 + i)] = 1.0 - 0.2 * i;
    x[static_cast<std::size_t>(25 - i)] = 1.0 - 0.2 * i;
  }
  const auto got = find_peaks(x, cfg);
  CHECK(got == brute_force_peaks(x, cfg));
  REQUIRE(got.size() == 1);
  CHECK(got[0] == 25);
}

TEST_CASE("find_peaks: exhaustive equivalence on random sequences") {
  SplitMix64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = testsupport::random_peak_sequence(rng, 200);
    const DetectorConfig cfg = testsupport::random_peak_config(rng);

    const auto got = find_peaks(x, cfg);
    const auto expected = brute_force_peaks(x, cfg);
    REQUIRE(got == expected);

    for (std::size_t i = 1; i < got.size(); ++i) {
      CHECK(got[i] - got[i - 1] >= cfg.peak_min_distance);
    }
  }
}

TEST_CASE("detect_qrs: flat lead gives zero beats") {
  const EcgRecord rec = testsupport::flat_record(2000);
  const QrsAnnotation ann = detect_qrs(rec, 0);
  CHECK(ann.beat_count() == 0);
}

TEST_CASE("detect_qrs: synthetic pulses are all found within 20 ms") {
  std::vector<int> centers;
  const EcgRecord rec = testsupport::pulse_record(75.0, 10.0, 500.0, 1.0, 0.010, &centers);
  for (int lead : {0, 1, 11}) {
    const QrsAnnotation ann = detect_qrs(rec, lead);
    REQUIRE(ann.beat_count() == static_cast<int>(centers.size()));
    for (std::size_t i = 0; i < centers.size(); ++i) {
      CHECK(std::abs(ann.r_peaks[i] - centers[i]) <= 10);  // 20 ms at 500 Hz
      CHECK(ann.q_peaks[i] < ann.r_peaks[i]);
      CHECK(ann.r_peaks[i] < ann.s_peaks[i]);
    }
  }
}

TEST_CASE("detect_qrs: indices are invariant to positive amplitude scaling") {
  std::vector<int> centers;
  EcgRecord rec = testsupport::pulse_record(60.0, 8.0, 500.0, 1.0, 0.010, &centers);
  testsupport::add_uniform_noise(rec, 0.02, 99);
  const QrsAnnotation base = detect_qrs(rec, 1);
  for (double alpha : {0.25, 3.0, 117.0}) {
    EcgRecord scaled = rec;
    for (auto& lead : scaled.leads) {
      for (double& v : lead) v *= alpha;
    }
    const QrsAnnotation got = detect_qrs(scaled, 1);
    CHECK(got.r_peaks == base.r_peaks);
    CHECK(got.q_peaks == base.q_peaks);
    CHECK(got.s_peaks == base.s_peaks);
  }
}

TEST_CASE("detect_qrs: Q and S stay inside their search windows") {
  std::vector<int> centers;
  EcgRecord rec = testsupport::pulse_record(100.0, 12.0, 500.0, 0.8, 0.012, &centers);
  testsupport::add_uniform_noise(rec, 0.05, 5);
  const auto cfg = DetectorConfig{}.resolved(rec.sampling_hz);
  const QrsAnnotation ann = detect_qrs(rec, 2);
  REQUIRE(ann.beat_count() > 0);
  for (int i = 0; i < ann.beat_count(); ++i) {
    const int r = ann.r_peaks[static_cast<std::size_t>(i)];
    CHECK(ann.q_peaks[static_cast<std::size_t>(i)] >= std::max(0, r - cfg.qs_window));
    CHECK(ann.q_peaks[static_cast<std::size_t>(i)] < r);
    CHECK(ann.s_peaks[static_cast<std::size_t>(i)] > r);
    CHECK(ann.s_peaks[static_cast<std::size_t>(i)] <= std::min(rec.n_samples() - 1, r + cfg.qs_window));
  }
}

TEST_CASE("detect_qrs: deterministic across runs") {
  EcgRecord rec = testsupport::pulse_record(90.0, 6.0);
  testsupport::add_uniform_noise(rec, 0.08, 1234);
  const QrsAnnotation a = detect_qrs(rec, 0);
  const QrsAnnotation b = detect_qrs(rec, 0);
  CHECK(a.r_peaks == b.r_peaks);
  CHECK(a.q_peaks == b.q_peaks);
  CHECK(a.s_peaks == b.s_peaks);
}

TEST_CASE("detect_qrs: record too short for the pipeline") {
  EcgRecord rec = testsupport::flat_record(4);
  CHECK_THROWS_AS(detect_qrs(rec, 0), DomainError);
}

TEST_CASE("qrs_features: interval arithmetic") {
  QrsAnnotation ann;
  ann.lead = 1;
  ann.r_peaks = {400, 800, 1200};
  ann.q_peaks = {390, 790, 1190};
  ann.s_peaks = {410, 810, 1210};
  const QrsFeatures f = qrs_features(ann, 500.0);
  CHECK(f.beat_count == 3.0);
  CHECK(f.mean_rr_s == doctest::Approx(0.8));
  CHECK(f.std_rr_s == doctest::Approx(0.0));
  CHECK(f.heart_rate_bpm == doctest::Approx(75.0));
  CHECK(f.mean_qrs_width_s == doctest::Approx(0.04));
  CHECK(f.std_qrs_width_s == doctest::Approx(0.0));
}

TEST_CASE("qrs_features: fewer than two beats gives the zero vector") {
  QrsAnnotation ann;
  ann.lead = 0;
  ann.r_peaks = {500};
  ann.q_peaks = {490};
  ann.s_peaks = {510};
  const auto vec = qrs_features(ann, 500.0).to_array();
  for (double v : vec) CHECK(v == 0.0);
  QrsAnnotation empty;
  for (double v : qrs_features(empty, 500.0).to_array()) CHECK(v == 0.0);
}
