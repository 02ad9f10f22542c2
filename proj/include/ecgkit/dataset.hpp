#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ecgkit/record.hpp"

namespace ecg {

enum class SplitAssignment { none, train_val, test };

struct ManifestEntry {
  std::string record_id;
  ArrhythmiaClass label = ArrhythmiaClass::AF;
  std::string source_corpus;
  bool excluded = false;
  SplitAssignment split = SplitAssignment::none;
  int fold = -1;  // 0..n_folds-1 for train_val entries, -1 otherwise
};

struct SplitSpec {
  double test_fraction = 0.20;
  int n_folds = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  std::array<int, kNumClasses> counts_before{};
  std::array<int, kNumClasses> counts_after{};

  std::array<int, kNumClasses> class_counts() const;
};

// Marks the named records excluded. Unknown ids raise a DomainError listing
// them; excluding an already-excluded id is a no-op.
std::vector<ManifestEntry> exclude_noisy(std::vector<ManifestEntry> entries,
                                         const std::vector<std::string>& record_ids);

// Downsamples every class to the smallest per-class count among non-excluded
// entries: entries are canonically ordered, shuffled within class with a
// seed-derived stream, and truncated. The surplus is discarded. Pure
// function of (entry set, seed).
DatasetManifest balance(const std::vector<ManifestEntry>& entries, std::uint64_t seed);

// Stratified 80/20-style split plus fold assignment on a balanced manifest.
// The test set size is round-half-even(test_fraction * total), allocated
// across classes by largest remainder so per-class test counts differ by at
// most one. The remaining train_val entries, ordered by class, are dealt
// round-robin into n_folds folds (the deal continues across class
// boundaries, keeping both fold totals and per-class fold sizes within one
// of each other).
DatasetManifest split(const DatasetManifest& balanced, const SplitSpec& spec);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace ecg
