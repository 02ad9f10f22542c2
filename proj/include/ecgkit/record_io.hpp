#pragma once

#include <filesystem>
#include <optional>

#include "ecgkit/record.hpp"

namespace ecg {

// Native record = `<id>.json` header + `<id>.raw` payload of 12 x n_samples
// int16 little-endian values, lead-major. Header fields: record_id,
// sampling_hz, n_samples, gain (integer units per millivolt), lead_names[12]
// in canonical order, and an optional label.
//
// `path` may name the .json header, the .raw payload, or the common stem.
EcgRecord read_record(const std::filesystem::path& path);

// Writes `<stem>.json` + `<stem>.raw`. Samples are quantised to int16 at the
// given gain with round-half-even; a sample that would overflow int16 is a
// DataError (nothing is written in that case).
void write_record(const EcgRecord& record, const std::filesystem::path& path,
                  double gain = 1000.0);

// CSV with a header row naming all 12 leads (any order) and >= 2 data rows.
// Values are taken as millivolts.
EcgRecord import_csv(const std::filesystem::path& path, double sampling_hz,
                     std::optional<ArrhythmiaClass> label = std::nullopt);

// Round half to even, the quantisation rule used by write_record.
long long round_half_even(double x);

}  // namespace ecg
