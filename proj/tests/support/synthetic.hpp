#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "ecgkit/record.hpp"
#include "ecgkit/rng.hpp"

namespace testsupport {

inline ecg::EcgRecord flat_record(int n = 1000, double fs = 500.0) {
  ecg::EcgRecord rec;
  rec.record_id = "flat";
  rec.sampling_hz = fs;
  for (auto& lead : rec.leads) lead.assign(static_cast<std::size_t>(n), 0.0);
  return rec;
}

// Per-lead sinusoids with distinct frequency, phase and amplitude.
inline ecg::EcgRecord sine_record(int n = 2500, double fs = 500.0) {
  ecg::EcgRecord rec;
  rec.record_id = "sines";
  rec.sampling_hz = fs;
  for (int l = 0; l < ecg::kNumLeads; ++l) {
    auto& lead = rec.leads[static_cast<std::size_t>(l)];
    lead.resize(static_cast<std::size_t>(n));
    const double f = 1.0 + 0.5 * l;
    const double phase = 0.3 * l;
    const double amp = 1.0 + 0.05 * l;
    for (int i = 0; i < n; ++i) {
      lead[static_cast<std::size_t>(i)] =
          amp * std::sin(2.0 * std::numbers::pi * f * i / fs + phase);
    }
  }
  return rec;
}

// Gaussian pulses on a zero baseline, evenly spaced at the given heart
// rate. The pulse centres are the ground-truth R locations.
inline ecg::EcgRecord pulse_record(double bpm, double seconds, double fs = 500.0,
                                   double amplitude_mv = 1.0, double sigma_s = 0.010,
                                   std::vector<int>* centers_out = nullptr) {
  ecg::EcgRecord rec;
  rec.record_id = "pulses";
  rec.sampling_hz = fs;
  const int n = static_cast<int>(seconds * fs);
  const int period = static_cast<int>(std::lround(fs * 60.0 / bpm));
  const int margin = static_cast<int>(0.4 * fs);
  std::vector<int> centers;
  for (int c = margin; c + margin < n; c += period) centers.push_back(c);

  const double sigma = sigma_s * fs;
  for (int l = 0; l < ecg::kNumLeads; ++l) {
    auto& lead = rec.leads[static_cast<std::size_t>(l)];
    lead.assign(static_cast<std::size_t>(n), 0.0);
    const double amp = amplitude_mv * (0.6 + 0.05 * l);
    for (int c : centers) {
      const int lo = std::max(0, c - static_cast<int>(8 * sigma));
      const int hi = std::min(n - 1, c + static_cast<int>(8 * sigma));
      for (int i = lo; i <= hi; ++i) {
        const double d = (i - c) / sigma;
        lead[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * d * d);
      }
    }
  }
  if (centers_out) *centers_out = centers;
  return rec;
}

inline void add_uniform_noise(ecg::EcgRecord& rec, double peak_mv, std::uint64_t seed) {
  ecg::SplitMix64 rng(seed);
  for (auto& lead : rec.leads) {
    for (double& v : lead) v += (2.0 * rng.next_double() - 1.0) * peak_mv;
  }
}

inline ecg::EcgRecord random_record(std::uint64_t seed, int n = 400, double fs = 500.0,
                                    double amp_mv = 5.0) {
  ecg::SplitMix64 rng(seed);
  ecg::EcgRecord rec;
  rec.record_id = "rand" + std::to_string(seed);
  rec.sampling_hz = fs;
  for (auto& lead : rec.leads) {
    lead.resize(static_cast<std::size_t>(n));
    for (double& v : lead) v = (2.0 * rng.next_double() - 1.0) * amp_mv;
  }
  return rec;
}

}  // namespace testsupport
