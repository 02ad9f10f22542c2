#include "ecgkit/record.hpp"

#include <cctype>
#include <cmath>

#include "ecgkit/errors.hpp"

namespace ecg {

const std::array<std::string_view, kNumLeads>& lead_names() {
  static const std::array<std::string_view, kNumLeads> names = {
      "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"};
  return names;
}

std::string_view lead_name(int index) {
  if (index < 0 || index >= kNumLeads)
    throw DomainError("lead index out of range: " + std::to_string(index));
  return lead_names()[static_cast<std::size_t>(index)];
}

std::optional<int> lead_index(std::string_view name) {
  const auto& names = lead_names();
  for (int i = 0; i < kNumLeads; ++i) {
    if (names[static_cast<std::size_t>(i)] == name) return i;
  }
  return std::nullopt;
}

namespace {
std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}
}  // namespace

std::optional<ArrhythmiaClass> parse_class(std::string_view code) {
  const std::string u = upper(code);
  if (u == "AF") return ArrhythmiaClass::AF;
  if (u == "IAVB") return ArrhythmiaClass::IAVB;
  if (u == "SB") return ArrhythmiaClass::SB;
  if (u == "SNR" || u == "NSR") return ArrhythmiaClass::SNR;
  if (u == "STACH") return ArrhythmiaClass::STach;
  return std::nullopt;
}

std::string_view class_code(ArrhythmiaClass c) {
  switch (c) {
    case ArrhythmiaClass::AF: return "AF";
    case ArrhythmiaClass::IAVB: return "IAVB";
    case ArrhythmiaClass::SB: return "SB";
    case ArrhythmiaClass::SNR: return "SNR";
    case ArrhythmiaClass::STach: return "STach";
  }
  throw DomainError("invalid arrhythmia class value");
}

void EcgRecord::validate() const {
  if (!(sampling_hz > 0.0))
    throw DomainError("record '" + record_id + "': sampling_hz must be positive");
  const std::size_t n = leads[0].size();
  if (n < 2)
    throw DomainError("record '" + record_id + "': needs at least 2 samples per lead");
  for (int l = 0; l < kNumLeads; ++l) {
    const auto& lead = leads[static_cast<std::size_t>(l)];
    if (lead.size() != n)
      throw DomainError("record '" + record_id + "': lead " + std::string(lead_name(l)) +
                        " length differs from lead I");
    for (double v : lead) {
      if (!std::isfinite(v))
        throw DataError("record '" + record_id + "': non-finite sample in lead " +
                        std::string(lead_name(l)));
    }
  }
}

void QrsAnnotation::validate(int n_samples) const {
  const std::size_t n = r_peaks.size();
  if (q_peaks.size() != n || s_peaks.size() != n)
    throw DomainError("annotation: R/Q/S lists must have equal length");
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && r_peaks[i] <= r_peaks[i - 1])
      throw DomainError("annotation: r_peaks must be strictly increasing");
    if (!(q_peaks[i] < r_peaks[i] && r_peaks[i] < s_peaks[i]))
      throw DomainError("annotation: expected q < r < s at beat " + std::to_string(i));
    if (q_peaks[i] < 0 || s_peaks[i] >= n_samples)
      throw DomainError("annotation: index out of record bounds at beat " + std::to_string(i));
  }
}

}  // namespace ecg
