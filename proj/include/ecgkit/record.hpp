#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ecg {

inline constexpr int kNumLeads = 12;

// Canonical lead order: I, II, III, aVR, aVL, aVF, V1..V6.
const std::array<std::string_view, kNumLeads>& lead_names();

// Index <-> name bijection. Name lookup is exact (case-sensitive).
std::string_view lead_name(int index);
std::optional<int> lead_index(std::string_view name);

// The five classes the pipeline recognises, in fixed order.
enum class ArrhythmiaClass : int { AF = 0, IAVB = 1, SB = 2, SNR = 3, STach = 4 };

inline constexpr int kNumClasses = 5;

// Case-insensitive; accepts "NSR" as an alias for SNR.
std::optional<ArrhythmiaClass> parse_class(std::string_view code);
std::string_view class_code(ArrhythmiaClass c);

// One labelled 12-lead recording. Samples are millivolts.
struct EcgRecord {
  std::string record_id;
  double sampling_hz = 0.0;
  std::optional<ArrhythmiaClass> label;
  std::array<std::vector<double>, kNumLeads> leads;

  int n_samples() const { return static_cast<int>(leads[0].size()); }

  // Throws DomainError/DataError if any invariant is broken: 12 equal-length
  // leads with >= 2 samples, positive rate, finite values.
  void validate() const;
};

// Per-lead R/Q/S sample indices. For every beat i: q[i] < r[i] < s[i].
struct QrsAnnotation {
  int lead = 0;
  std::vector<int> r_peaks;
  std::vector<int> q_peaks;
  std::vector<int> s_peaks;

  int beat_count() const { return static_cast<int>(r_peaks.size()); }
  void validate(int n_samples) const;
};

}  // namespace ecg
