#include "ecgkit/metrics.hpp"

#include <cmath>

#include "ecgkit/errors.hpp"

namespace ecg {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (std::int64_t v : counts) t += v;
  return t;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int c = 0; c < n_classes; ++c) t += at(c, c);
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int c) const {
  std::int64_t t = 0;
  for (int p = 0; p < n_classes; ++p) t += at(c, p);
  return t;
}

std::int64_t ConfusionMatrix::col_sum(int c) const {
  std::int64_t t = 0;
  for (int r = 0; r < n_classes; ++r) t += at(r, c);
  return t;
}

ConfusionMatrix confusion(std::span<const int> true_labels,
                          std::span<const int> predicted_labels, int n_classes) {
  if (true_labels.size() != predicted_labels.size())
    throw DomainError("confusion: label lists differ in length (" +
                      std::to_string(true_labels.size()) + " vs " +
                      std::to_string(predicted_labels.size()) + ")");
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i], p = predicted_labels[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes)
      throw DomainError("confusion: label out of range at position " + std::to_string(i));
    cm.at(t, p)++;
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  MetricsReport rep;
  const std::int64_t total = cm.total();
  if (total == 0) {
    rep.per_class.assign(static_cast<std::size_t>(cm.n_classes), ClassMetrics{0, 0, 0, 0, true});
    rep.degenerate = true;
    return rep;
  }
  rep.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  rep.micro_f1 = rep.accuracy;

  double f1_sum = 0.0;
  for (int c = 0; c < cm.n_classes; ++c) {
    ClassMetrics m;
    const std::int64_t tp = cm.at(c, c);
    const std::int64_t row = cm.row_sum(c);
    const std::int64_t col = cm.col_sum(c);
    m.support = row;
    if (col > 0) {
      m.precision = static_cast<double>(tp) / static_cast<double>(col);
    } else {
      m.degenerate = true;
    }
    if (row > 0) {
      m.recall = static_cast<double>(tp) / static_cast<double>(row);
    } else {
      m.degenerate = true;
    }
    const std::int64_t f1_den = 2 * tp + (col - tp) + (row - tp);
    if (f1_den > 0) {
      m.f1 = static_cast<double>(2 * tp) / static_cast<double>(f1_den);
    } else {
      m.degenerate = true;
    }
    rep.degenerate = rep.degenerate || m.degenerate;
    f1_sum += m.f1;
    rep.per_class.push_back(m);
  }
  rep.macro_f1 = f1_sum / static_cast<double>(cm.n_classes);
  return rep;
}

namespace {

std::pair<double, double> mean_sample_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size() - 1);
  return {mean, std::sqrt(var)};
}

}  // namespace

CvResult cross_validate(const DatasetManifest& manifest, int n_folds, const FoldRunner& runner) {
  CvResult result;
  std::vector<double> accs, f1s;
  for (int k = 0; k < n_folds; ++k) {
    std::vector<ManifestEntry> train, val;
    for (const auto& e : manifest.entries) {
      if (e.excluded || e.split != SplitAssignment::train_val) continue;
      if (e.fold == k)
        val.push_back(e);
      else
        train.push_back(e);
    }
    if (val.empty()) throw DomainError("cross_validate: fold " + std::to_string(k) + " is empty");

    const std::vector<int> predictions = runner(train, val);
    if (predictions.size() != val.size())
      throw DomainError("cross_validate: runner returned " + std::to_string(predictions.size()) +
                        " predictions for " + std::to_string(val.size()) + " entries");
    std::vector<int> truth;
    truth.reserve(val.size());
    for (const auto& e : val) truth.push_back(static_cast<int>(e.label));

    FoldReport fr;
    fr.fold = k;
    fr.cm = confusion(truth, predictions);
    fr.report = metrics(fr.cm);
    accs.push_back(fr.report.accuracy);
    f1s.push_back(fr.report.macro_f1);
    result.folds.push_back(std::move(fr));
  }
  std::tie(result.aggregate.accuracy_mean, result.aggregate.accuracy_std) = mean_sample_std(accs);
  std::tie(result.aggregate.macro_f1_mean, result.aggregate.macro_f1_std) = mean_sample_std(f1s);
  return result;
}

}  // namespace ecg
