#include "ecgkit/features.hpp"

#include <cmath>

namespace ecg {

namespace {

void fill_signal_tensor(const EcgRecord& record, int input_len, nn::Tensor& t) {
  const int n = record.n_samples();
  for (int l = 0; l < kNumLeads; ++l) {
    const auto& lead = record.leads[static_cast<std::size_t>(l)];
    double* row = t.v.data() + static_cast<std::size_t>(l) * static_cast<std::size_t>(input_len);
    const int keep = std::min(n, input_len);
    for (int i = 0; i < keep; ++i) row[i] = lead[static_cast<std::size_t>(i)];
    // z-score over the window
    double mean = 0.0;
    for (int i = 0; i < input_len; ++i) mean += row[i];
    mean /= static_cast<double>(input_len);
    double var = 0.0;
    for (int i = 0; i < input_len; ++i) var += (row[i] - mean) * (row[i] - mean);
    var /= static_cast<double>(input_len);
    const double sd = std::sqrt(var);
    if (sd == 0.0) {
      for (int i = 0; i < input_len; ++i) row[i] = 0.0;
    } else {
      for (int i = 0; i < input_len; ++i) row[i] = (row[i] - mean) / sd;
    }
  }
}

}  // namespace

nn::Example make_example(const EcgRecord& record, const nn::ArchSpec& arch) {
  record.validate();
  nn::Example ex;
  if (record.label) ex.label = static_cast<int>(*record.label);

  if (arch.kind == nn::ArchKind::cnn2d) {
    RasterConfig rc;
    rc.width = arch.image_w;
    rc.height = arch.image_h;
    const RasterImage img = rasterize(record, rc);
    ex.input = nn::Tensor({1, arch.image_h, arch.image_w});
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      ex.input.v[i] = static_cast<double>(img.pixels[i]) / 255.0;
  } else {
    ex.input = nn::Tensor({arch.input_channels, arch.input_len});
    fill_signal_tensor(record, arch.input_len, ex.input);
  }

  if (arch.with_qrs_features) {
    const int lead_ii = 1;
    const QrsAnnotation ann = detect_qrs(record, lead_ii);
    ex.aux = qrs_features(ann, record.sampling_hz).to_array();
  }
  return ex;
}

}  // namespace ecg
