#pragma once

#include <array>
#include <span>
#include <vector>

#include "ecgkit/bandpass.hpp"
#include "ecgkit/record.hpp"

namespace ecg {

// Window fields left at 0 are derived from the sampling rate when the
// detector runs: min peak distance and refinement half-width are
// floor(fs/5) samples, the Q/S search window is floor(fs/4).
//
// integration_window is the ones-kernel length of the moving-window
// integrator. The default of 5 samples is deliberately literal; classical
// Pan-Tompkins integrates over ~150 ms (75 samples at 500 Hz), so raise it
// via --window / this field if that behaviour is wanted.
struct DetectorConfig {
  BandpassSpec bandpass{};
  int integration_window = 5;
  double peak_min_height = 0.5;
  double peak_min_width = 0.5;
  int peak_min_distance = 0;
  int refine_halfwidth = 0;
  int qs_window = 0;

  DetectorConfig resolved(double sampling_hz) const;
  void validate() const;
};

// QRS energy envelope: first difference -> square -> moving-window
// integration ("same" alignment) -> min-max normalisation to [0,1].
// Output length is input length - 1. A constant input yields all zeros.
std::vector<double> enhance(std::span<const double> signal, const DetectorConfig& cfg);

// Strict local maxima (plateaus resolve to their leftmost sample) with
// x[i] >= peak_min_height and width at half prominence >= peak_min_width.
// Minimum spacing is enforced greedily: candidates sorted by height
// descending (ties to the lower index) and accepted unless an already
// accepted peak lies closer than peak_min_distance. Requires a resolved
// config. Result is ascending.
std::vector<int> find_peaks(std::span<const double> x, const DetectorConfig& cfg);

// Full detector: bandpass -> enhance -> find_peaks -> refine each candidate
// to the raw-signal argmax within +-refine_halfwidth -> Q/S troughs in the
// windows before/after each R. Ties always break to the lowest index.
QrsAnnotation detect_qrs(const EcgRecord& record, int lead, const DetectorConfig& cfg = {});

struct QrsFeatures {
  double beat_count = 0.0;
  double mean_rr_s = 0.0;
  double std_rr_s = 0.0;
  double mean_qrs_width_s = 0.0;
  double std_qrs_width_s = 0.0;
  double heart_rate_bpm = 0.0;

  std::array<double, 6> to_array() const {
    return {beat_count, mean_rr_s, std_rr_s, mean_qrs_width_s, std_qrs_width_s, heart_rate_bpm};
  }
};

// Interval statistics over an annotation. Fewer than 2 beats gives the
// all-zero vector (no RR interval exists). Standard deviations are
// population deviations.
QrsFeatures qrs_features(const QrsAnnotation& ann, double sampling_hz);

}  // namespace ecg
