#include "ecgkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ecgkit/errors.hpp"
#include "ecgkit/record_io.hpp"
#include "ecgkit/rng.hpp"

using nlohmann::json;

namespace ecg {

void SplitSpec::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DomainError("split: test_fraction must lie in (0,1)");
  if (n_folds < 2) throw DomainError("split: n_folds must be >= 2");
}

std::array<int, kNumClasses> DatasetManifest::class_counts() const {
  std::array<int, kNumClasses> counts{};
  for (const auto& e : entries) {
    if (!e.excluded) counts[static_cast<std::size_t>(e.label)]++;
  }
  return counts;
}

namespace {

// Canonical order makes every seeded operation a pure function of the entry
// SET, independent of how the caller enumerated files.
void canonical_sort(std::vector<ManifestEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    if (a.label != b.label) return static_cast<int>(a.label) < static_cast<int>(b.label);
    return a.record_id < b.record_id;
  });
}

}  // namespace

std::vector<ManifestEntry> exclude_noisy(std::vector<ManifestEntry> entries,
                                         const std::vector<std::string>& record_ids) {
  std::set<std::string> wanted(record_ids.begin(), record_ids.end());
  for (auto& e : entries) {
    if (wanted.erase(e.record_id) > 0) e.excluded = true;
  }
  if (!wanted.empty()) {
    std::string msg = "exclude: unknown record ids:";
    for (const auto& id : wanted) msg += " " + id;
    throw DomainError(msg);
  }
  return entries;
}

DatasetManifest balance(const std::vector<ManifestEntry>& entries, std::uint64_t seed) {
  std::array<std::vector<ManifestEntry>, kNumClasses> by_class;
  DatasetManifest out;
  out.seed = seed;
  for (const auto& e : entries) {
    if (e.excluded) continue;
    by_class[static_cast<std::size_t>(e.label)].push_back(e);
    out.counts_before[static_cast<std::size_t>(e.label)]++;
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (by_class[static_cast<std::size_t>(c)].empty())
      throw DomainError("balance: class " +
                        std::string(class_code(static_cast<ArrhythmiaClass>(c))) +
                        " has no non-excluded entries");
  }

  int m = static_cast<int>(by_class[0].size());
  for (const auto& v : by_class) m = std::min(m, static_cast<int>(v.size()));

  for (int c = 0; c < kNumClasses; ++c) {
    auto& v = by_class[static_cast<std::size_t>(c)];
    canonical_sort(v);
    SplitMix64 rng(SplitMix64::derive(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(v);
    v.resize(static_cast<std::size_t>(m));  // the extras are discarded
    canonical_sort(v);
    out.entries.insert(out.entries.end(), v.begin(), v.end());
    out.counts_after[static_cast<std::size_t>(c)] = m;
  }
  return out;
}

DatasetManifest split(const DatasetManifest& balanced, const SplitSpec& spec) {
  spec.validate();
  DatasetManifest out = balanced;

  std::array<std::vector<ManifestEntry*>, kNumClasses> by_class;
  for (auto& e : out.entries) {
    if (e.excluded) continue;
    e.split = SplitAssignment::none;
    e.fold = -1;
    by_class[static_cast<std::size_t>(e.label)].push_back(&e);
  }
  // seeded choices must not depend on the file order of the manifest
  for (auto& v : by_class) {
    std::sort(v.begin(), v.end(),
              [](const ManifestEntry* a, const ManifestEntry* b) { return a->record_id < b->record_id; });
  }
  const int m = static_cast<int>(by_class[0].size());
  for (const auto& v : by_class) {
    if (static_cast<int>(v.size()) != m)
      throw DomainError("split: manifest is not balanced; run balance first");
  }
  if (m < spec.n_folds)
    throw DomainError("split: " + std::to_string(m) + " entries per class but " +
                      std::to_string(spec.n_folds) + " folds requested");

  // Total test size honours the global fraction; the largest-remainder step
  // spreads it across classes so per-class counts differ by at most one.
  const long long total = static_cast<long long>(m) * kNumClasses;
  const long long test_total =
      round_half_even(spec.test_fraction * static_cast<double>(total));
  const int base = static_cast<int>(std::floor(spec.test_fraction * static_cast<double>(m)));
  int leftover = static_cast<int>(test_total - static_cast<long long>(base) * kNumClasses);
  std::array<int, kNumClasses> test_count{};
  for (int c = 0; c < kNumClasses; ++c) test_count[static_cast<std::size_t>(c)] = base;
  for (int c = 0; c < kNumClasses && leftover > 0; ++c, --leftover)
    test_count[static_cast<std::size_t>(c)]++;

  std::vector<ManifestEntry*> train_val_order;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& v = by_class[static_cast<std::size_t>(c)];
    std::vector<int> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    SplitMix64 rng(SplitMix64::derive(spec.seed, 0x5917ULL + static_cast<std::uint64_t>(c)));
    rng.shuffle(idx);
    for (int i = 0; i < m; ++i) {
      ManifestEntry* e = v[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      if (i < test_count[static_cast<std::size_t>(c)]) {
        e->split = SplitAssignment::test;
        e->fold = -1;
      } else {
        e->split = SplitAssignment::train_val;
        train_val_order.push_back(e);
      }
    }
  }

  // One continuous round-robin deal across the class-ordered list.
  for (std::size_t i = 0; i < train_val_order.size(); ++i) {
    train_val_order[i]->fold = static_cast<int>(i % static_cast<std::size_t>(spec.n_folds));
  }
  return out;
}

namespace {

std::string split_name(SplitAssignment s) {
  switch (s) {
    case SplitAssignment::none: return "none";
    case SplitAssignment::train_val: return "train_val";
    case SplitAssignment::test: return "test";
  }
  return "none";
}

SplitAssignment parse_split(const std::string& s) {
  if (s == "train_val") return SplitAssignment::train_val;
  if (s == "test") return SplitAssignment::test;
  if (s == "none") return SplitAssignment::none;
  throw FormatError("manifest: unknown split value '" + s + "'");
}

}  // namespace

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  json j;
  j["seed"] = manifest.seed;
  json before = json::object(), after = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto code = std::string(class_code(static_cast<ArrhythmiaClass>(c)));
    before[code] = manifest.counts_before[static_cast<std::size_t>(c)];
    after[code] = manifest.counts_after[static_cast<std::size_t>(c)];
  }
  j["counts"] = {{"before", before}, {"after", after}};
  j["entries"] = json::array();
  for (const auto& e : manifest.entries) {
    json je;
    je["record_id"] = e.record_id;
    je["class"] = std::string(class_code(e.label));
    je["source_corpus"] = e.source_corpus;
    je["excluded"] = e.excluded;
    je["split"] = split_name(e.split);
    if (e.fold >= 0)
      je["fold"] = e.fold;
    else
      je["fold"] = nullptr;
    j["entries"].push_back(je);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what());
  }
  DatasetManifest m;
  try {
    m.seed = j.value("seed", 0ULL);
    if (j.contains("counts")) {
      for (int c = 0; c < kNumClasses; ++c) {
        const auto code = std::string(class_code(static_cast<ArrhythmiaClass>(c)));
        m.counts_before[static_cast<std::size_t>(c)] = j["counts"]["before"].value(code, 0);
        m.counts_after[static_cast<std::size_t>(c)] = j["counts"]["after"].value(code, 0);
      }
    }
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.record_id = je.at("record_id").get<std::string>();
      const auto cls = parse_class(je.at("class").get<std::string>());
      if (!cls) throw FormatError("manifest: unknown class for record " + e.record_id);
      e.label = *cls;
      e.source_corpus = je.value("source_corpus", std::string());
      e.excluded = je.value("excluded", false);
      e.split = parse_split(je.value("split", std::string("none")));
      if (je.contains("fold") && !je.at("fold").is_null()) e.fold = je.at("fold").get<int>();
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what());
  }
  return m;
}

}  // namespace ecg
