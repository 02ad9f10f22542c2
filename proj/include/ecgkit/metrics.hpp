#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ecgkit/dataset.hpp"

namespace ecg {

// Rows are true classes, columns predicted, in the fixed class order
// (AF, IAVB, SB, SNR, STach) when n_classes == 5.
struct ConfusionMatrix {
  int n_classes = kNumClasses;
  std::vector<std::int64_t> counts;  // row-major n_classes x n_classes

  explicit ConfusionMatrix(int n = kNumClasses)
      : n_classes(n), counts(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0) {}

  std::int64_t& at(int true_class, int predicted) {
    return counts[static_cast<std::size_t>(true_class) * static_cast<std::size_t>(n_classes) +
                  static_cast<std::size_t>(predicted)];
  }
  std::int64_t at(int true_class, int predicted) const {
    return counts[static_cast<std::size_t>(true_class) * static_cast<std::size_t>(n_classes) +
                  static_cast<std::size_t>(predicted)];
  }
  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t row_sum(int c) const;
  std::int64_t col_sum(int c) const;
};

ConfusionMatrix confusion(std::span<const int> true_labels, std::span<const int> predicted_labels,
                          int n_classes = kNumClasses);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  bool degenerate = false;  // some ratio was 0/0 and was defined as 0
};

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double macro_f1 = 0.0;  // unweighted mean of per-class F1 (headline number)
  double micro_f1 = 0.0;  // equals accuracy for single-label classification
  bool degenerate = false;
};

// All ratios are single divisions of exact integer counts; F1 is computed
// as 2*tp / (2*tp + fp + fn), algebraically the harmonic mean of precision
// and recall. Any 0/0 is defined as 0 and flags the report as degenerate.
MetricsReport metrics(const ConfusionMatrix& cm);

// Per-fold evaluation. The runner receives train and validation entries and
// returns one predicted class index per validation entry, in order.
using FoldRunner = std::function<std::vector<int>(const std::vector<ManifestEntry>& train,
                                                  const std::vector<ManifestEntry>& val)>;

struct FoldReport {
  int fold = 0;
  ConfusionMatrix cm{kNumClasses};
  MetricsReport report;
};

struct CvAggregate {
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double macro_f1_mean = 0.0, macro_f1_std = 0.0;
};

struct CvResult {
  std::vector<FoldReport> folds;
  CvAggregate aggregate;
};

// Runs every fold k: train on train_val folds != k, validate on fold k.
// Entries marked test or excluded are never touched. Aggregate is the mean
// and sample standard deviation across folds.
CvResult cross_validate(const DatasetManifest& manifest, int n_folds, const FoldRunner& runner);

}  // namespace ecg
