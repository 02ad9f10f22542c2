#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ecgkit/bandpass.hpp"
#include "ecgkit/errors.hpp"
#include "ecgkit/features.hpp"
#include "ecgkit/metrics.hpp"
#include "ecgkit/nn.hpp"
#include "ecgkit/qrs.hpp"
#include "ecgkit/raster.hpp"
#include "ecgkit/record_io.hpp"

namespace py = pybind11;
using namespace ecg;

namespace {

EcgRecord record_from_array(const py::array_t<double>& signals, double sampling_hz,
                            const std::string& record_id, const std::string& label) {
  if (signals.ndim() != 2 || signals.shape(0) != kNumLeads)
    throw DomainError("signals must have shape (12, n_samples)");
  EcgRecord rec;
  rec.record_id = record_id;
  rec.sampling_hz = sampling_hz;
  if (!label.empty()) {
    const auto cls = parse_class(label);
    if (!cls) throw DomainError("unknown class '" + label + "'");
    rec.label = *cls;
  }
  const auto view = signals.unchecked<2>();
  const auto n = static_cast<std::size_t>(signals.shape(1));
  for (int l = 0; l < kNumLeads; ++l) {
    auto& lead = rec.leads[static_cast<std::size_t>(l)];
    lead.resize(n);
    for (std::size_t i = 0; i < n; ++i) lead[i] = view(l, static_cast<py::ssize_t>(i));
  }
  rec.validate();
  return rec;
}

py::array_t<double> record_to_array(const EcgRecord& rec) {
  const auto n = static_cast<py::ssize_t>(rec.n_samples());
  py::array_t<double> out({static_cast<py::ssize_t>(kNumLeads), n});
  auto view = out.mutable_unchecked<2>();
  for (int l = 0; l < kNumLeads; ++l)
    for (py::ssize_t i = 0; i < n; ++i)
      view(l, i) = rec.leads[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
  return out;
}

py::dict annotation_to_dict(const QrsAnnotation& ann, double sampling_hz) {
  py::dict d;
  d["lead"] = std::string(lead_name(ann.lead));
  d["r_peaks"] = ann.r_peaks;
  d["q_peaks"] = ann.q_peaks;
  d["s_peaks"] = ann.s_peaks;
  const QrsFeatures f = qrs_features(ann, sampling_hz);
  py::dict feats;
  feats["beat_count"] = f.beat_count;
  feats["mean_rr_s"] = f.mean_rr_s;
  feats["std_rr_s"] = f.std_rr_s;
  feats["mean_qrs_width_s"] = f.mean_qrs_width_s;
  feats["std_qrs_width_s"] = f.std_qrs_width_s;
  feats["heart_rate_bpm"] = f.heart_rate_bpm;
  d["features"] = feats;
  return d;
}

nn::Example example_from_row(const py::array_t<double>& x, py::ssize_t row,
                             const nn::ArchSpec& arch, int label) {
  nn::Example ex;
  ex.label = label;
  ex.input = nn::Tensor({arch.input_channels, arch.input_len});
  const auto view = x.unchecked<3>();
  for (int c = 0; c < arch.input_channels; ++c)
    for (int t = 0; t < arch.input_len; ++t)
      ex.input.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(arch.input_len) +
                 static_cast<std::size_t>(t)] = view(row, c, t);
  return ex;
}

// Thin training wrapper over raw (N, 12, L) float arrays; the C++ side owns
// all the numerics so results match the CLI exactly.
class Classifier {
 public:
  Classifier(const std::string& arch, std::uint64_t seed, int input_len, bool with_qrs_features) {
    const auto kind = nn::parse_arch(arch);
    if (!kind) throw DomainError("unknown arch '" + arch + "'");
    if (*kind == nn::ArchKind::cnn2d)
      throw DomainError("Classifier takes (n, 12, len) signal arrays; cnn2d runs via the CLI");
    arch_.kind = *kind;
    arch_.input_len = input_len;
    arch_.with_qrs_features = with_qrs_features;
    state_ = nn::build(arch_, seed);
  }

  std::size_t param_count() const { return state_.params.size(); }

  py::dict train(const py::array_t<double>& x, const std::vector<int>& y,
                 const py::array_t<double>& val_x, const std::vector<int>& val_y, int max_epochs,
                 int batch_size, double lr, std::uint64_t seed) {
    nn::TrainConfig cfg;
    cfg.max_epochs = max_epochs;
    cfg.batch_size = batch_size;
    cfg.lr_initial = lr;
    cfg.seed = seed;
    cfg.early_stopping_patience = max_epochs;  // callers cap via max_epochs
    const auto train_set = to_examples(x, &y);
    const auto val_set = to_examples(val_x, &val_y);
    const nn::TrainResult res = nn::train(state_, train_set, val_set, cfg);
    py::dict out;
    out["best_epoch"] = res.best_epoch;
    out["best_val_loss"] = res.best_val_loss;
    out["epochs"] = res.history.size();
    std::vector<double> train_loss, val_loss, train_acc, val_acc;
    for (const auto& row : res.history) {
      train_loss.push_back(row.train_loss);
      val_loss.push_back(row.val_loss);
      train_acc.push_back(row.train_acc);
      val_acc.push_back(row.val_acc);
    }
    out["train_loss"] = train_loss;
    out["val_loss"] = val_loss;
    out["train_acc"] = train_acc;
    out["val_acc"] = val_acc;
    return out;
  }

  std::vector<int> predict(const py::array_t<double>& x) const {
    const auto batch = to_examples(x, nullptr);
    return nn::predict(state_, batch);
  }

 private:
  std::vector<nn::Example> to_examples(const py::array_t<double>& x,
                                       const std::vector<int>* labels) const {
    if (x.ndim() != 3 || x.shape(1) != arch_.input_channels || x.shape(2) != arch_.input_len)
      throw DomainError("expected shape (n, " + std::to_string(arch_.input_channels) + ", " +
                        std::to_string(arch_.input_len) + ")");
    if (labels && static_cast<py::ssize_t>(labels->size()) != x.shape(0))
      throw DomainError("labels length does not match batch size");
    std::vector<nn::Example> out;
    out.reserve(static_cast<std::size_t>(x.shape(0)));
    for (py::ssize_t i = 0; i < x.shape(0); ++i)
      out.push_back(example_from_row(x, i, arch_, labels ? (*labels)[static_cast<std::size_t>(i)] : -1));
    return out;
  }

  nn::ArchSpec arch_;
  nn::ModelState state_;
};

}  // namespace

PYBIND11_MODULE(_ecgkit, m) {
  m.doc() = "ECG arrhythmia pipeline: QRS detection, rasterisation, metrics, classifiers";

  py::register_exception<Error>(m, "EcgError");

  m.def(
      "design_bandpass",
      [](double lowcut, double highcut, int order, double fs) {
        BandpassSpec spec{lowcut, highcut, order, fs};
        const IirCoefficients c = design_bandpass(spec);
        return py::make_tuple(c.b, c.a);
      },
      py::arg("lowcut_hz") = 5.0, py::arg("highcut_hz") = 15.0, py::arg("order") = 2,
      py::arg("sampling_hz") = 500.0,
      "Digital Butterworth bandpass (b, a), normalised so a[0] = 1.");

  m.def(
      "apply_filter",
      [](const std::vector<double>& b, const std::vector<double>& a,
         const std::vector<double>& x) {
        IirCoefficients c{b, a};
        return apply_filter(c, x);
      },
      py::arg("b"), py::arg("a"), py::arg("x"),
      "Causal direct-form IIR filtering with zero initial state.");

  m.def(
      "detect_qrs",
      [](const py::array_t<double>& signal, double sampling_hz, int integration_window) {
        if (signal.ndim() != 1) throw DomainError("signal must be 1-D");
        // Single-lead path: replicate the lead across the record container.
        EcgRecord rec;
        rec.record_id = "py";
        rec.sampling_hz = sampling_hz;
        const auto view = signal.unchecked<1>();
        std::vector<double> lead(static_cast<std::size_t>(signal.shape(0)));
        for (py::ssize_t i = 0; i < signal.shape(0); ++i)
          lead[static_cast<std::size_t>(i)] = view(i);
        for (auto& l : rec.leads) l = lead;
        DetectorConfig cfg;
        cfg.integration_window = integration_window;
        const QrsAnnotation ann = detect_qrs(rec, 0, cfg);
        return annotation_to_dict(ann, sampling_hz);
      },
      py::arg("signal"), py::arg("sampling_hz"), py::arg("integration_window") = 5,
      "R/Q/S indices plus interval features for one lead.");

  m.def(
      "detect_record",
      [](const std::string& path, const std::string& lead) {
        const EcgRecord rec = read_record(path);
        const auto idx = lead_index(lead);
        if (!idx) throw DomainError("unknown lead '" + lead + "'");
        return annotation_to_dict(detect_qrs(rec, *idx), rec.sampling_hz);
      },
      py::arg("path"), py::arg("lead") = "II");

  m.def(
      "rasterize",
      [](const py::array_t<double>& signals, double sampling_hz) {
        const EcgRecord rec = record_from_array(signals, sampling_hz, "py", "");
        const RasterImage img = rasterize(rec);
        py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(img.height),
                                       static_cast<py::ssize_t>(img.width)});
        std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
        return out;
      },
      py::arg("signals"), py::arg("sampling_hz") = 500.0,
      "Deterministic 506x187 grayscale rendering of a 12-lead record.");

  m.def(
      "read_record",
      [](const std::string& path) {
        const EcgRecord rec = read_record(path);
        py::dict d;
        d["record_id"] = rec.record_id;
        d["sampling_hz"] = rec.sampling_hz;
        d["label"] = rec.label ? py::cast(std::string(class_code(*rec.label))) : py::none();
        d["signals"] = record_to_array(rec);
        return d;
      },
      py::arg("path"));

  m.def(
      "write_record",
      [](const py::array_t<double>& signals, double sampling_hz, const std::string& path,
         const std::string& record_id, const std::string& label, double gain) {
        EcgRecord rec = record_from_array(signals, sampling_hz, record_id, label);
        write_record(rec, path, gain);
      },
      py::arg("signals"), py::arg("sampling_hz"), py::arg("path"), py::arg("record_id") = "record",
      py::arg("label") = "", py::arg("gain") = 1000.0);

  m.def(
      "metrics",
      [](const std::vector<int>& truth, const std::vector<int>& predicted, int n_classes) {
        const ConfusionMatrix cm = confusion(truth, predicted, n_classes);
        const MetricsReport rep = metrics(cm);
        py::dict d;
        std::vector<std::vector<std::int64_t>> rows;
        for (int t = 0; t < cm.n_classes; ++t) {
          std::vector<std::int64_t> row;
          for (int p = 0; p < cm.n_classes; ++p) row.push_back(cm.at(t, p));
          rows.push_back(row);
        }
        d["confusion"] = rows;
        d["accuracy"] = rep.accuracy;
        d["macro_f1"] = rep.macro_f1;
        d["micro_f1"] = rep.micro_f1;
        std::vector<py::dict> per;
        for (const auto& c : rep.per_class) {
          py::dict pc;
          pc["precision"] = c.precision;
          pc["recall"] = c.recall;
          pc["f1"] = c.f1;
          pc["support"] = c.support;
          per.push_back(pc);
        }
        d["per_class"] = per;
        d["degenerate"] = rep.degenerate;
        return d;
      },
      py::arg("true_labels"), py::arg("predicted_labels"), py::arg("n_classes") = 5,
      "Confusion matrix with accuracy, precision, recall and F1 per class.");

  py::class_<Classifier>(m, "Classifier")
      .def(py::init<const std::string&, std::uint64_t, int, bool>(), py::arg("arch"),
           py::arg("seed") = 0, py::arg("input_len") = 5000,
           py::arg("with_qrs_features") = false)
      .def_property_readonly("param_count", &Classifier::param_count)
      .def("train", &Classifier::train, py::arg("x"), py::arg("y"), py::arg("val_x"),
           py::arg("val_y"), py::arg("max_epochs") = 50, py::arg("batch_size") = 50,
           py::arg("lr") = 1e-3, py::arg("seed") = 0)
      .def("predict", &Classifier::predict, py::arg("x"));

  m.attr("LEAD_NAMES") = std::vector<std::string>(lead_names().begin(), lead_names().end());
  m.attr("CLASS_NAMES") = std::vector<std::string>{"AF", "IAVB", "SB", "SNR", "STach"};
}
