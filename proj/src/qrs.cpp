#include "ecgkit/qrs.hpp"

#include <algorithm>
#include <cmath>

#include "ecgkit/errors.hpp"

namespace ecg {

DetectorConfig DetectorConfig::resolved(double sampling_hz) const {
  DetectorConfig out = *this;
  out.bandpass.sampling_hz = sampling_hz;
  const int fifth = static_cast<int>(std::floor(sampling_hz / 5.0));
  const int quarter = static_cast<int>(std::floor(sampling_hz / 4.0));
  if (out.peak_min_distance == 0) out.peak_min_distance = fifth;
  if (out.refine_halfwidth == 0) out.refine_halfwidth = fifth;
  if (out.qs_window == 0) out.qs_window = quarter;
  out.validate();
  return out;
}

void DetectorConfig::validate() const {
  if (integration_window < 1) throw DomainError("detector: integration_window must be >= 1");
  if (!(peak_min_height >= 0.0 && peak_min_height <= 1.0))
    throw DomainError("detector: peak_min_height must lie in [0,1]");
  if (peak_min_distance < 1 || refine_halfwidth < 1 || qs_window < 1)
    throw DomainError("detector: all window sizes must be >= 1");
}

std::vector<double> enhance(std::span<const double> signal, const DetectorConfig& cfg) {
  const int w = cfg.integration_window;
  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  if (n < w + 2)
    throw DomainError("enhance: signal length " + std::to_string(n) +
                      " too short for integration window " + std::to_string(w));

  std::vector<double> sq(static_cast<std::size_t>(n - 1));
  for (std::ptrdiff_t i = 0; i + 1 < n; ++i) {
    const double d = signal[static_cast<std::size_t>(i + 1)] - signal[static_cast<std::size_t>(i)];
    sq[static_cast<std::size_t>(i)] = d * d;
  }

  // "same"-aligned convolution with a ones kernel, centred like the full
  // convolution's middle slice: out[i] = sum of sq over [i+off-w+1, i+off].
  const std::ptrdiff_t m = n - 1;
  const std::ptrdiff_t off = (w - 1) / 2;
  std::vector<double> integrated(static_cast<std::size_t>(m));
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i + off - w + 1);
    const std::ptrdiff_t hi = std::min(m - 1, i + off);
    double acc = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) acc += sq[static_cast<std::size_t>(j)];
    integrated[static_cast<std::size_t>(i)] = acc;
  }

  const auto [mn_it, mx_it] = std::minmax_element(integrated.begin(), integrated.end());
  const double mn = *mn_it, mx = *mx_it;
  if (mx == mn) {
    std::fill(integrated.begin(), integrated.end(), 0.0);
    return integrated;
  }
  for (double& v : integrated) v = (v - mn) / (mx - mn);
  return integrated;
}

namespace {

struct PeakShape {
  double prominence = 0.0;
  int left_base = 0;
  int right_base = 0;
};

PeakShape peak_prominence(std::span<const double> x, int peak) {
  const int n = static_cast<int>(x.size());
  PeakShape shape;
  const double h = x[static_cast<std::size_t>(peak)];

  double left_min = h;
  shape.left_base = peak;
  for (int i = peak; i >= 0 && x[static_cast<std::size_t>(i)] <= h; --i) {
    if (x[static_cast<std::size_t>(i)] < left_min) {
      left_min = x[static_cast<std::size_t>(i)];
      shape.left_base = i;
    }
  }
  double right_min = h;
  shape.right_base = peak;
  for (int i = peak; i < n && x[static_cast<std::size_t>(i)] <= h; ++i) {
    if (x[static_cast<std::size_t>(i)] < right_min) {
      right_min = x[static_cast<std::size_t>(i)];
      shape.right_base = i;
    }
  }
  shape.prominence = h - std::max(left_min, right_min);
  return shape;
}

// Width of the peak at half its prominence, in (fractional) samples, with
// linear interpolation at the crossings.
double peak_width(std::span<const double> x, int peak, const PeakShape& shape) {
  const double height = x[static_cast<std::size_t>(peak)] - 0.5 * shape.prominence;

  int i = peak;
  while (shape.left_base < i && height < x[static_cast<std::size_t>(i)]) --i;
  double left_ip = i;
  if (x[static_cast<std::size_t>(i)] < height) {
    left_ip += (height - x[static_cast<std::size_t>(i)]) /
               (x[static_cast<std::size_t>(i + 1)] - x[static_cast<std::size_t>(i)]);
  }

  i = peak;
  while (i < shape.right_base && height < x[static_cast<std::size_t>(i)]) ++i;
  double right_ip = i;
  if (x[static_cast<std::size_t>(i)] < height) {
    right_ip -= (height - x[static_cast<std::size_t>(i)]) /
                (x[static_cast<std::size_t>(i - 1)] - x[static_cast<std::size_t>(i)]);
  }
  return right_ip - left_ip;
}

}  // namespace

std::vector<int> find_peaks(std::span<const double> x, const DetectorConfig& cfg) {
  const int n = static_cast<int>(x.size());
  std::vector<int> candidates;

  int i = 1;
  while (i < n) {
    if (x[static_cast<std::size_t>(i)] > x[static_cast<std::size_t>(i - 1)]) {
      int j = i;
      while (j + 1 < n && x[static_cast<std::size_t>(j + 1)] == x[static_cast<std::size_t>(i)]) ++j;
      if (j + 1 < n && x[static_cast<std::size_t>(j + 1)] < x[static_cast<std::size_t>(i)]) {
        candidates.push_back(i);  // leftmost sample of the plateau
      }
      i = j + 1;
    } else {
      ++i;
    }
  }

  std::vector<int> filtered;
  for (int c : candidates) {
    if (x[static_cast<std::size_t>(c)] < cfg.peak_min_height) continue;
    const PeakShape shape = peak_prominence(x, c);
    if (peak_width(x, c, shape) < cfg.peak_min_width) continue;
    filtered.push_back(c);
  }

  // Greedy highest-first acceptance; ties in height go to the lower index.
  std::vector<int> order(filtered.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ha = x[static_cast<std::size_t>(filtered[static_cast<std::size_t>(a)])];
    const double hb = x[static_cast<std::size_t>(filtered[static_cast<std::size_t>(b)])];
    if (ha != hb) return ha > hb;
    return filtered[static_cast<std::size_t>(a)] < filtered[static_cast<std::size_t>(b)];
  });

  std::vector<int> accepted;
  for (int k : order) {
    const int cand = filtered[static_cast<std::size_t>(k)];
    bool ok = true;
    for (int a : accepted) {
      if (std::abs(a - cand) < cfg.peak_min_distance) {
        ok = false;
        break;
      }
    }
    if (ok) accepted.push_back(cand);
  }
  std::sort(accepted.begin(), accepted.end());
  return accepted;
}

namespace {

// Argmax over [lo, hi] inclusive, lowest index on ties.
int argmax_range(std::span<const double> x, int lo, int hi) {
  int best = lo;
  for (int i = lo + 1; i <= hi; ++i) {
    if (x[static_cast<std::size_t>(i)] > x[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

int argmin_range(std::span<const double> x, int lo, int hi) {
  int best = lo;
  for (int i = lo + 1; i <= hi; ++i) {
    if (x[static_cast<std::size_t>(i)] < x[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

}  // namespace

QrsAnnotation detect_qrs(const EcgRecord& record, int lead, const DetectorConfig& cfg) {
  record.validate();
  if (lead < 0 || lead >= kNumLeads)
    throw DomainError("detect_qrs: lead index out of range: " + std::to_string(lead));
  const DetectorConfig rc = cfg.resolved(record.sampling_hz);

  const auto& signal = record.leads[static_cast<std::size_t>(lead)];
  const int n = static_cast<int>(signal.size());
  if (n < rc.integration_window + 2)
    throw DomainError("detect_qrs: record '" + record.record_id + "' too short (" +
                      std::to_string(n) + " samples)");

  const IirCoefficients coeffs = design_bandpass(rc.bandpass);
  const std::vector<double> filtered = apply_filter(coeffs, signal);
  const std::vector<double> envelope = enhance(filtered, rc);
  const std::vector<int> candidates = find_peaks(envelope, rc);

  std::vector<int> r_peaks;
  for (int c : candidates) {
    const int lo = std::max(0, c - rc.refine_halfwidth);
    const int hi = std::min(n - 1, c + rc.refine_halfwidth);
    r_peaks.push_back(argmax_range(signal, lo, hi));
  }
  std::sort(r_peaks.begin(), r_peaks.end());
  r_peaks.erase(std::unique(r_peaks.begin(), r_peaks.end()), r_peaks.end());

  QrsAnnotation ann;
  ann.lead = lead;
  for (int r : r_peaks) {
    // Q in [r - qs_window, r), S in (r, r + qs_window]; a beat at the very
    // edge of the record has no trough window and is dropped.
    if (r == 0 || r == n - 1) continue;
    const int qlo = std::max(0, r - rc.qs_window);
    const int shi = std::min(n - 1, r + rc.qs_window);
    ann.r_peaks.push_back(r);
    ann.q_peaks.push_back(argmin_range(signal, qlo, r - 1));
    ann.s_peaks.push_back(argmin_range(signal, r + 1, shi));
  }
  ann.validate(n);
  return ann;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

}  // namespace

QrsFeatures qrs_features(const QrsAnnotation& ann, double sampling_hz) {
  QrsFeatures f;
  const int beats = ann.beat_count();
  if (beats < 2) return f;  // no interval exists; report the zero vector

  std::vector<double> rr, widths;
  for (int i = 0; i + 1 < beats; ++i) {
    rr.push_back((ann.r_peaks[static_cast<std::size_t>(i + 1)] -
                  ann.r_peaks[static_cast<std::size_t>(i)]) /
                 sampling_hz);
  }
  for (int i = 0; i < beats; ++i) {
    widths.push_back((ann.s_peaks[static_cast<std::size_t>(i)] -
                      ann.q_peaks[static_cast<std::size_t>(i)]) /
                     sampling_hz);
  }
  const auto [rr_mean, rr_std] = mean_std(rr);
  const auto [w_mean, w_std] = mean_std(widths);
  f.beat_count = beats;
  f.mean_rr_s = rr_mean;
  f.std_rr_s = rr_std;
  f.mean_qrs_width_s = w_mean;
  f.std_qrs_width_s = w_std;
  f.heart_rate_bpm = 60.0 / rr_mean;
  return f;
}

}  // namespace ecg
