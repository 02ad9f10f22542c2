#include "ecgkit/record_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ecgkit/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ecg {

long long round_half_even(double x) {
  const double f = std::floor(x);
  const double frac = x - f;
  auto lo = static_cast<long long>(f);
  if (frac > 0.5) return lo + 1;
  if (frac < 0.5) return lo;
  return (lo % 2 == 0) ? lo : lo + 1;
}

namespace {

fs::path header_path(const fs::path& path) {
  fs::path p = path;
  if (p.extension() == ".json") return p;
  if (p.extension() == ".raw") return p.replace_extension(".json");
  p += ".json";
  return p;
}

std::vector<std::uint8_t> read_all_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

EcgRecord read_record(const fs::path& path) {
  const fs::path hdr = header_path(path);
  std::ifstream in(hdr);
  if (!in) throw IoError("cannot open record header '" + hdr.string() + "'");

  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("malformed header '" + hdr.string() + "': " + e.what());
  }

  EcgRecord rec;
  long long n_samples = 0;
  double gain = 0.0;
  try {
    rec.record_id = j.at("record_id").get<std::string>();
    rec.sampling_hz = j.at("sampling_hz").get<double>();
    n_samples = j.at("n_samples").get<long long>();
    gain = j.at("gain").get<double>();
    const auto names = j.at("lead_names").get<std::vector<std::string>>();
    if (names.size() != kNumLeads)
      throw FormatError("header '" + hdr.string() + "': expected 12 lead names, got " +
                        std::to_string(names.size()));
    for (int l = 0; l < kNumLeads; ++l) {
      if (names[static_cast<std::size_t>(l)] != lead_name(l))
        throw FormatError("header '" + hdr.string() + "': lead " + std::to_string(l) +
                          " must be '" + std::string(lead_name(l)) + "', got '" +
                          names[static_cast<std::size_t>(l)] + "'");
    }
    if (j.contains("label") && !j.at("label").is_null()) {
      const auto code = j.at("label").get<std::string>();
      const auto cls = parse_class(code);
      if (!cls) throw FormatError("header '" + hdr.string() + "': unknown class '" + code + "'");
      rec.label = *cls;
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed header '" + hdr.string() + "': " + e.what());
  }
  if (!(rec.sampling_hz > 0.0))
    throw FormatError("header '" + hdr.string() + "': sampling_hz must be positive");
  if (n_samples < 2)
    throw FormatError("header '" + hdr.string() + "': n_samples must be >= 2");
  if (!(gain > 0.0))
    throw FormatError("header '" + hdr.string() + "': gain must be positive");

  fs::path raw = hdr;
  raw.replace_extension(".raw");
  const auto bytes = read_all_bytes(raw);
  const std::size_t expected = static_cast<std::size_t>(n_samples) * kNumLeads * 2;
  if (bytes.size() != expected)
    throw TruncationError("payload '" + raw.string() + "': expected " +
                          std::to_string(expected) + " bytes (12 x " +
                          std::to_string(n_samples) + " int16), got " +
                          std::to_string(bytes.size()));

  std::size_t pos = 0;
  for (int l = 0; l < kNumLeads; ++l) {
    auto& lead = rec.leads[static_cast<std::size_t>(l)];
    lead.resize(static_cast<std::size_t>(n_samples));
    for (long long i = 0; i < n_samples; ++i) {
      const std::uint16_t u =
          static_cast<std::uint16_t>(bytes[pos] | (static_cast<std::uint16_t>(bytes[pos + 1]) << 8));
      pos += 2;
      lead[static_cast<std::size_t>(i)] = static_cast<double>(static_cast<std::int16_t>(u)) / gain;
    }
  }
  rec.validate();
  return rec;
}

void write_record(const EcgRecord& record, const fs::path& path, double gain) {
  record.validate();
  if (!(gain > 0.0)) throw DomainError("write_record: gain must be positive");

  // Quantise everything first so a failure leaves no partial files behind.
  std::vector<std::uint8_t> payload;
  payload.reserve(static_cast<std::size_t>(record.n_samples()) * kNumLeads * 2);
  for (int l = 0; l < kNumLeads; ++l) {
    for (double mv : record.leads[static_cast<std::size_t>(l)]) {
      const long long q = round_half_even(mv * gain);
      if (q < -32768 || q > 32767)
        throw DataError("record '" + record.record_id + "': sample " + std::to_string(mv) +
                        " mV overflows int16 at gain " + std::to_string(gain));
      const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
      payload.push_back(static_cast<std::uint8_t>(u & 0xFF));
      payload.push_back(static_cast<std::uint8_t>(u >> 8));
    }
  }

  json j;
  j["record_id"] = record.record_id;
  j["sampling_hz"] = record.sampling_hz;
  j["n_samples"] = record.n_samples();
  j["gain"] = gain;
  std::vector<std::string> names;
  for (int l = 0; l < kNumLeads; ++l) names.emplace_back(lead_name(l));
  j["lead_names"] = names;
  if (record.label) j["label"] = std::string(class_code(*record.label));

  fs::path hdr = header_path(path);
  fs::path raw = hdr;
  raw.replace_extension(".raw");

  std::ofstream hout(hdr);
  if (!hout) throw IoError("cannot write '" + hdr.string() + "'");
  hout << j.dump(2) << "\n";
  if (!hout) throw IoError("write failed for '" + hdr.string() + "'");

  std::ofstream rout(raw, std::ios::binary);
  if (!rout) throw IoError("cannot write '" + raw.string() + "'");
  rout.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size()));
  if (!rout) throw IoError("write failed for '" + raw.string() + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

}  // namespace

EcgRecord import_csv(const fs::path& path, double sampling_hz,
                     std::optional<ArrhythmiaClass> label) {
  if (!(sampling_hz > 0.0)) throw DomainError("import_csv: sampling_hz must be positive");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw FormatError("'" + path.string() + "': empty file or missing header row");

  const auto header = split_csv_line(line);
  if (header.size() != kNumLeads)
    throw FormatError("'" + path.string() + "': expected 12 lead columns, got " +
                      std::to_string(header.size()));
  std::array<int, kNumLeads> column_lead{};  // column -> lead index
  std::array<bool, kNumLeads> seen{};
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto idx = lead_index(header[c]);
    if (!idx)
      throw FormatError("'" + path.string() + "': unknown lead column '" + header[c] + "'");
    if (seen[static_cast<std::size_t>(*idx)])
      throw FormatError("'" + path.string() + "': duplicate lead column '" + header[c] + "'");
    seen[static_cast<std::size_t>(*idx)] = true;
    column_lead[c] = *idx;
  }

  EcgRecord rec;
  rec.record_id = path.stem().string();
  rec.sampling_hz = sampling_hz;
  rec.label = label;

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != kNumLeads)
      throw FormatError("'" + path.string() + "' row " + std::to_string(row) + ": expected 12 values, got " +
                        std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      const auto& s = fields[c];
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError("'" + path.string() + "' row " + std::to_string(row) + ": non-numeric cell '" + s + "'");
      if (!std::isfinite(v))
        throw DataError("'" + path.string() + "' row " + std::to_string(row) + ": non-finite value");
      rec.leads[static_cast<std::size_t>(column_lead[c])].push_back(v);
    }
  }
  if (rec.leads[0].size() < 2)
    throw FormatError("'" + path.string() + "': need at least 2 data rows");
  rec.validate();
  return rec;
}

}  // namespace ecg
