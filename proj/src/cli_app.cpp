#include "ecgkit/cli_app.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecgkit/bandpass.hpp"
#include "ecgkit/dataset.hpp"
#include "ecgkit/errors.hpp"
#include "ecgkit/features.hpp"
#include "ecgkit/metrics.hpp"
#include "ecgkit/nn.hpp"
#include "ecgkit/qrs.hpp"
#include "ecgkit/raster.hpp"
#include "ecgkit/record_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ecg {

namespace {

// Values from --config seed the option defaults; anything given on the
// command line simply overwrites them. Global keys sit at the top level,
// per-subcommand keys under the subcommand name ("dataset split" uses
// "dataset.split").
class ConfigFile {
 public:
  void load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    try {
      in >> root_;
    } catch (const json::exception& e) {
      throw FormatError("config '" + path.string() + "': " + e.what());
    }
  }

  template <typename T>
  void apply(const std::string& scope, const std::string& key, T& var) const {
    const json* node = &root_;
    if (!scope.empty()) {
      std::size_t start = 0;
      while (start <= scope.size()) {
        const std::size_t dot = scope.find('.', start);
        const std::string part = scope.substr(start, dot - start);
        if (!node->contains(part)) return;
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
      }
    }
    if (node->contains(key)) {
      try {
        var = (*node)[key].get<T>();
      } catch (const json::exception&) {
        throw FormatError("config: key '" + (scope.empty() ? key : scope + "." + key) +
                          "' has the wrong type");
      }
    }
  }

 private:
  json root_;
};

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min<int>(jobs, static_cast<int>(n));
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

json features_to_json(const QrsFeatures& f) {
  return json{{"beat_count", f.beat_count},
              {"mean_rr_s", f.mean_rr_s},
              {"std_rr_s", f.std_rr_s},
              {"mean_qrs_width_s", f.mean_qrs_width_s},
              {"std_qrs_width_s", f.std_qrs_width_s},
              {"heart_rate_bpm", f.heart_rate_bpm}};
}

json report_to_json(const std::string& system, const ConfusionMatrix& cm,
                    const MetricsReport& rep) {
  json j;
  j["system"] = system;
  j["n"] = cm.total();
  json rows = json::array();
  for (int t = 0; t < cm.n_classes; ++t) {
    json row = json::array();
    for (int p = 0; p < cm.n_classes; ++p) row.push_back(cm.at(t, p));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  j["accuracy"] = rep.accuracy;
  j["macro_f1"] = rep.macro_f1;
  j["micro_f1"] = rep.micro_f1;
  j["degenerate"] = rep.degenerate;
  json per = json::array();
  for (int c = 0; c < cm.n_classes; ++c) {
    const auto& m = rep.per_class[static_cast<std::size_t>(c)];
    per.push_back(json{{"class", std::string(class_code(static_cast<ArrhythmiaClass>(c)))},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support},
                       {"degenerate", m.degenerate}});
  }
  j["per_class"] = per;
  return j;
}

void write_json(const json& j, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write '" + out_path + "'");
  out << j.dump(2) << "\n";
}

std::vector<EcgRecord> load_records(const fs::path& data_dir,
                                    const std::vector<ManifestEntry>& entries, int jobs) {
  std::vector<EcgRecord> records(entries.size());
  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    const fs::path p = data_dir / (entries[i].record_id + ".json");
    if (!fs::exists(p))
      throw IoError("record file missing for id '" + entries[i].record_id + "' (" + p.string() + ")");
    records[i] = read_record(p);
  });
  return records;
}

std::vector<nn::Example> make_examples(const std::vector<EcgRecord>& records,
                                       const nn::ArchSpec& arch, int jobs) {
  std::vector<nn::Example> out(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) { out[i] = make_example(records[i], arch); });
  return out;
}

// Shared flags for the model-facing subcommands.
struct ModelOptions {
  std::string arch = "cnn1d";
  int input_len = 5000;
  bool with_qrs = false;
  int max_epochs = 50;
  int batch_size = 50;
  double lr = 1e-3;
  int early_stop = 3;
  int plateau_patience = 5;

  nn::ArchSpec arch_spec() const {
    const auto kind = nn::parse_arch(arch);
    if (!kind) throw DomainError("unknown --arch '" + arch + "'");
    nn::ArchSpec spec;
    spec.kind = *kind;
    spec.input_len = input_len;
    spec.with_qrs_features = with_qrs;
    return spec;
  }
  nn::TrainConfig train_config(std::uint64_t seed) const {
    nn::TrainConfig cfg;
    cfg.max_epochs = max_epochs;
    cfg.batch_size = batch_size;
    cfg.lr_initial = lr;
    cfg.early_stopping_patience = early_stop;
    cfg.plateau_patience = plateau_patience;
    cfg.seed = seed;
    return cfg;
  }
};

void add_model_options(CLI::App* cmd, ModelOptions& opts, const ConfigFile& config,
                       const std::string& scope) {
  auto bind = [&](const std::string& key, auto& var, const std::string& help) {
    config.apply(scope, key, var);
    return cmd->add_option("--" + key, var, help);
  };
  bind("arch", opts.arch, "cnn1d|cnn1d_gru|gru|gru_lstm|lstm|cnn2d");
  bind("input-len", opts.input_len, "Samples per lead fed to 1D models (truncate/zero-pad)");
  bind("max-epochs", opts.max_epochs, "Epoch cap");
  bind("batch-size", opts.batch_size, "Mini-batch size");
  bind("lr", opts.lr, "Initial learning rate");
  bind("early-stop", opts.early_stop, "Early-stopping patience (epochs)");
  bind("plateau-patience", opts.plateau_patience, "Plateau patience before halving the lr");
  config.apply(scope, "with-qrs-features", opts.with_qrs);
  cmd->add_flag("--with-qrs-features", opts.with_qrs,
                "Concatenate lead-II QRS interval features before the head");
}

RasterImage confusion_heat_grid(const ConfusionMatrix& cm, int cell = 40) {
  RasterImage img;
  img.width = cm.n_classes * cell;
  img.height = cm.n_classes * cell;
  img.pixels.assign(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height), 255);
  std::int64_t mx = 1;
  for (std::int64_t v : cm.counts) mx = std::max(mx, v);
  for (int t = 0; t < cm.n_classes; ++t) {
    for (int p = 0; p < cm.n_classes; ++p) {
      const auto shade = static_cast<std::uint8_t>(255 - (255 * cm.at(t, p)) / mx);
      for (int y = t * cell; y < (t + 1) * cell; ++y) {
        for (int x = p * cell; x < (p + 1) * cell; ++x) {
          img.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) +
                     static_cast<std::size_t>(x)] = shade;
        }
      }
    }
  }
  return img;
}

int dispatch(int argc, const char* const* argv) {
  // The config file must be known before options are bound, so it is read
  // in a pre-pass.
  ConfigFile config;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") config.load(argv[i + 1]);
  }

  CLI::App app{"ECG arrhythmia pipeline: QRS detection, rasterisation, datasets, classifiers"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  bool verbose = false;
  int jobs = 1;
  std::string config_path;
  config.apply("", "seed", seed);
  config.apply("", "jobs", jobs);
  config.apply("", "verbose", verbose);
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--config", config_path, "JSON file supplying flag defaults");
  app.add_option("--jobs", jobs, "Worker threads for per-record work");
  app.add_flag("--verbose", verbose, "Chatty progress output");

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "Locate R/Q/S indices in one lead");
  std::string detect_in, detect_lead = "II", detect_out;
  int detect_window = 5;
  config.apply("detect", "in", detect_in);
  config.apply("detect", "lead", detect_lead);
  config.apply("detect", "out", detect_out);
  config.apply("detect", "window", detect_window);
  detect_cmd->add_option("--in", detect_in, "Record (header path or stem)")->required();
  detect_cmd->add_option("--lead", detect_lead, "Lead name (I, II, ..., V6)");
  detect_cmd->add_option("--window", detect_window, "Moving-integration window (samples)");
  detect_cmd->add_option("--out", detect_out, "Output JSON path (default: stdout)");

  // rasterize
  auto* raster_cmd = app.add_subcommand("rasterize", "Render a record to a grayscale PNG");
  std::string raster_in, raster_out;
  int supersample = 4;
  config.apply("rasterize", "in", raster_in);
  config.apply("rasterize", "out", raster_out);
  config.apply("rasterize", "supersample", supersample);
  raster_cmd->add_option("--in", raster_in, "Record (header path or stem)")->required();
  raster_cmd->add_option("--out", raster_out, "Output PNG path")->required();
  raster_cmd->add_option("--supersample", supersample, "Supersampling factor");

  // filter (coefficient dump for cross-checking against other tools)
  auto* filter_cmd = app.add_subcommand("filter", "Dump bandpass coefficients as JSON");
  BandpassSpec filter_spec;
  std::string filter_out;
  config.apply("filter", "fs", filter_spec.sampling_hz);
  config.apply("filter", "low", filter_spec.lowcut_hz);
  config.apply("filter", "high", filter_spec.highcut_hz);
  config.apply("filter", "order", filter_spec.order);
  filter_cmd->add_option("--fs", filter_spec.sampling_hz, "Sampling rate (Hz)");
  filter_cmd->add_option("--low", filter_spec.lowcut_hz, "Low cutoff (Hz)");
  filter_cmd->add_option("--high", filter_spec.highcut_hz, "High cutoff (Hz)");
  filter_cmd->add_option("--order", filter_spec.order, "Filter order");
  filter_cmd->add_option("--out", filter_out, "Output JSON path (default: stdout)");

  // dataset build|exclude|balance|split
  auto* dataset_cmd = app.add_subcommand("dataset", "Manifest construction and splitting");
  dataset_cmd->require_subcommand(1);

  auto* build_cmd = dataset_cmd->add_subcommand("build", "Scan a directory of records");
  std::string build_dir, build_out, build_corpus = "local";
  config.apply("dataset.build", "data-dir", build_dir);
  config.apply("dataset.build", "out", build_out);
  config.apply("dataset.build", "corpus", build_corpus);
  build_cmd->add_option("--data-dir", build_dir, "Directory of native records")->required();
  build_cmd->add_option("--out", build_out, "Manifest JSON path")->required();
  build_cmd->add_option("--corpus", build_corpus, "source_corpus tag for the entries");

  auto* exclude_cmd = dataset_cmd->add_subcommand("exclude", "Mark noisy records excluded");
  std::string exclude_manifest, exclude_ids, exclude_out;
  config.apply("dataset.exclude", "manifest", exclude_manifest);
  config.apply("dataset.exclude", "ids", exclude_ids);
  config.apply("dataset.exclude", "out", exclude_out);
  exclude_cmd->add_option("--manifest", exclude_manifest, "Input manifest")->required();
  exclude_cmd->add_option("--ids", exclude_ids, "Text file, one record id per line")->required();
  exclude_cmd->add_option("--out", exclude_out, "Output manifest")->required();

  auto* balance_cmd = dataset_cmd->add_subcommand("balance", "Equalise per-class counts");
  std::string balance_manifest, balance_out;
  config.apply("dataset.balance", "manifest", balance_manifest);
  config.apply("dataset.balance", "out", balance_out);
  balance_cmd->add_option("--manifest", balance_manifest, "Input manifest")->required();
  balance_cmd->add_option("--out", balance_out, "Output manifest")->required();

  auto* split_cmd = dataset_cmd->add_subcommand("split", "Assign test split and CV folds");
  std::string split_manifest, split_out;
  SplitSpec split_spec;
  config.apply("dataset.split", "manifest", split_manifest);
  config.apply("dataset.split", "out", split_out);
  config.apply("dataset.split", "test-fraction", split_spec.test_fraction);
  config.apply("dataset.split", "folds", split_spec.n_folds);
  split_cmd->add_option("--manifest", split_manifest, "Balanced input manifest")->required();
  split_cmd->add_option("--out", split_out, "Output manifest")->required();
  split_cmd->add_option("--test-fraction", split_spec.test_fraction, "Held-out fraction");
  split_cmd->add_option("--folds", split_spec.n_folds, "Cross-validation fold count");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one classifier");
  std::string train_manifest, train_dir, train_out;
  int val_fold = 0;
  ModelOptions train_opts;
  config.apply("train", "manifest", train_manifest);
  config.apply("train", "data-dir", train_dir);
  config.apply("train", "out", train_out);
  config.apply("train", "val-fold", val_fold);
  train_cmd->add_option("--manifest", train_manifest, "Split manifest JSON")->required();
  train_cmd->add_option("--data-dir", train_dir, "Directory of native records")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint stem (writes .json + .bin + history.csv)")
      ->required();
  train_cmd->add_option("--val-fold", val_fold, "Fold held out for validation");
  add_model_options(train_cmd, train_opts, config, "train");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  std::string eval_ckpt, eval_manifest, eval_dir, eval_split = "test", eval_out;
  config.apply("eval", "ckpt", eval_ckpt);
  config.apply("eval", "manifest", eval_manifest);
  config.apply("eval", "data-dir", eval_dir);
  config.apply("eval", "split", eval_split);
  config.apply("eval", "out", eval_out);
  eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint stem or .json path")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "Split manifest JSON")->required();
  eval_cmd->add_option("--data-dir", eval_dir, "Directory of native records")->required();
  eval_cmd->add_option("--split", eval_split, "test or train_val");
  eval_cmd->add_option("--out", eval_out, "Report JSON path (default: stdout)");

  // cv
  auto* cv_cmd = app.add_subcommand("cv", "Run the full cross-validation");
  std::string cv_manifest, cv_dir, cv_out;
  ModelOptions cv_opts;
  config.apply("cv", "manifest", cv_manifest);
  config.apply("cv", "data-dir", cv_dir);
  config.apply("cv", "out", cv_out);
  cv_cmd->add_option("--manifest", cv_manifest, "Split manifest JSON")->required();
  cv_cmd->add_option("--data-dir", cv_dir, "Directory of native records")->required();
  cv_cmd->add_option("--out", cv_out, "Output directory for per-fold reports")->required();
  add_model_options(cv_cmd, cv_opts, config, "cv");

  // report
  auto* report_cmd = app.add_subcommand("report", "Pretty-print or convert a report");
  std::string report_in, report_format = "table", report_out;
  config.apply("report", "in", report_in);
  config.apply("report", "format", report_format);
  config.apply("report", "out", report_out);
  report_cmd->add_option("--in", report_in, "Report JSON from eval/cv")->required();
  report_cmd->add_option("--format", report_format, "table|json|png");
  report_cmd->add_option("--out", report_out, "Output path (required for png)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help text or the usage error
    return code == 0 ? 0 : 2;
  }

  if (*detect_cmd) {
    const EcgRecord rec = read_record(detect_in);
    const auto lead = lead_index(detect_lead);
    if (!lead) throw DomainError("unknown lead '" + detect_lead + "'");
    DetectorConfig cfg;
    cfg.integration_window = detect_window;
    const QrsAnnotation ann = detect_qrs(rec, *lead, cfg);
    json j;
    j["record_id"] = rec.record_id;
    j["lead"] = detect_lead;
    j["r_peaks"] = ann.r_peaks;
    j["q_peaks"] = ann.q_peaks;
    j["s_peaks"] = ann.s_peaks;
    j["features"] = features_to_json(qrs_features(ann, rec.sampling_hz));
    write_json(j, detect_out);
    return 0;
  }

  if (*raster_cmd) {
    const EcgRecord rec = read_record(raster_in);
    RasterConfig cfg;
    cfg.supersample = supersample;
    write_png(rasterize(rec, cfg), raster_out);
    if (verbose) std::cerr << "wrote " << raster_out << "\n";
    return 0;
  }

  if (*filter_cmd) {
    const IirCoefficients coeffs = design_bandpass(filter_spec);
    json j;
    j["b"] = coeffs.b;
    j["a"] = coeffs.a;
    j["spec"] = {{"lowcut_hz", filter_spec.lowcut_hz},
                 {"highcut_hz", filter_spec.highcut_hz},
                 {"order", filter_spec.order},
                 {"sampling_hz", filter_spec.sampling_hz}};
    write_json(j, filter_out);
    return 0;
  }

  if (*build_cmd) {
    std::vector<fs::path> headers;
    for (const auto& entry : fs::directory_iterator(build_dir)) {
      if (entry.path().extension() == ".json") headers.push_back(entry.path());
    }
    std::sort(headers.begin(), headers.end());
    DatasetManifest manifest;
    manifest.seed = seed;
    for (const auto& p : headers) {
      const EcgRecord rec = read_record(p);
      if (!rec.label) {
        std::cerr << "warning: skipping unlabeled record '" << rec.record_id << "'\n";
        continue;
      }
      manifest.entries.push_back({rec.record_id, *rec.label, build_corpus, false,
                                  SplitAssignment::none, -1});
    }
    for (const auto& e : manifest.entries)
      manifest.counts_before[static_cast<std::size_t>(e.label)]++;
    manifest.counts_after = manifest.counts_before;
    save_manifest(manifest, build_out);
    if (verbose) std::cerr << "indexed " << manifest.entries.size() << " records\n";
    return 0;
  }

  if (*exclude_cmd) {
    DatasetManifest manifest = load_manifest(exclude_manifest);
    std::ifstream ids_in(exclude_ids);
    if (!ids_in) throw IoError("cannot open '" + exclude_ids + "'");
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(ids_in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty()) ids.push_back(line);
    }
    manifest.entries = exclude_noisy(std::move(manifest.entries), ids);
    save_manifest(manifest, exclude_out);
    return 0;
  }

  if (*balance_cmd) {
    const DatasetManifest input = load_manifest(balance_manifest);
    save_manifest(balance(input.entries, seed), balance_out);
    return 0;
  }

  if (*split_cmd) {
    split_spec.seed = seed;
    const DatasetManifest input = load_manifest(split_manifest);
    save_manifest(split(input, split_spec), split_out);
    return 0;
  }

  if (*train_cmd) {
    const DatasetManifest manifest = load_manifest(train_manifest);
    std::vector<ManifestEntry> train_entries, val_entries;
    for (const auto& e : manifest.entries) {
      if (e.excluded || e.split != SplitAssignment::train_val) continue;
      (e.fold == val_fold ? val_entries : train_entries).push_back(e);
    }
    if (train_entries.empty() || val_entries.empty())
      throw DomainError("train: manifest has no train_val folds; run `dataset split`");
    const nn::ArchSpec arch = train_opts.arch_spec();
    if (verbose)
      std::cerr << "loading " << train_entries.size() << "+" << val_entries.size()
                << " records\n";
    const auto train_examples = make_examples(load_records(train_dir, train_entries, jobs), arch, jobs);
    const auto val_examples = make_examples(load_records(train_dir, val_entries, jobs), arch, jobs);

    nn::ModelState state = nn::build(arch, seed);
    const nn::TrainResult result = nn::train(state, train_examples, val_examples,
                                             train_opts.train_config(seed));
    nn::save_checkpoint(state, train_out);
    nn::save_history_csv(result.history, train_out + ".history.csv");
    std::cout << "best epoch " << result.best_epoch << ", val loss " << result.best_val_loss
              << (result.stopped_early ? " (early stop)" : "") << "\n";
    return 0;
  }

  if (*eval_cmd) {
    const nn::ModelState state = nn::load_checkpoint(eval_ckpt);
    const DatasetManifest manifest = load_manifest(eval_manifest);
    const SplitAssignment wanted =
        eval_split == "train_val" ? SplitAssignment::train_val : SplitAssignment::test;
    std::vector<ManifestEntry> entries;
    for (const auto& e : manifest.entries) {
      if (!e.excluded && e.split == wanted) entries.push_back(e);
    }
    if (entries.empty()) throw DomainError("eval: no entries in split '" + eval_split + "'");
    const auto examples = make_examples(load_records(eval_dir, entries, jobs), state.arch, jobs);
    const std::vector<int> predictions = nn::predict(state, examples);
    std::vector<int> truth;
    truth.reserve(entries.size());
    for (const auto& e : entries) truth.push_back(static_cast<int>(e.label));
    const ConfusionMatrix cm = confusion(truth, predictions);
    write_json(report_to_json(std::string(nn::arch_name(state.arch.kind)), cm, metrics(cm)),
               eval_out);
    return 0;
  }

  if (*cv_cmd) {
    const DatasetManifest manifest = load_manifest(cv_manifest);
    int n_folds = 0;
    for (const auto& e : manifest.entries) n_folds = std::max(n_folds, e.fold + 1);
    if (n_folds < 2) throw DomainError("cv: manifest has no folds; run `dataset split`");
    const nn::ArchSpec arch = cv_opts.arch_spec();
    fs::create_directories(cv_out);

    const CvResult result = cross_validate(
        manifest, n_folds,
        [&](const std::vector<ManifestEntry>& train_e, const std::vector<ManifestEntry>& val_e) {
          const auto train_examples = make_examples(load_records(cv_dir, train_e, jobs), arch, jobs);
          const auto val_examples = make_examples(load_records(cv_dir, val_e, jobs), arch, jobs);
          nn::ModelState state = nn::build(arch, seed);
          nn::train(state, train_examples, val_examples, cv_opts.train_config(seed));
          return nn::predict(state, val_examples);
        });

    for (const auto& fold : result.folds) {
      write_json(report_to_json(std::string(nn::arch_name(arch.kind)), fold.cm, fold.report),
                 (fs::path(cv_out) / ("fold_" + std::to_string(fold.fold) + ".json")).string());
    }
    json agg;
    agg["system"] = std::string(nn::arch_name(arch.kind));
    agg["folds"] = result.folds.size();
    agg["accuracy_mean"] = result.aggregate.accuracy_mean;
    agg["accuracy_std"] = result.aggregate.accuracy_std;
    agg["macro_f1_mean"] = result.aggregate.macro_f1_mean;
    agg["macro_f1_std"] = result.aggregate.macro_f1_std;
    write_json(agg, (fs::path(cv_out) / "aggregate.json").string());
    std::cout << "cv accuracy " << result.aggregate.accuracy_mean << " +- "
              << result.aggregate.accuracy_std << "\n";
    return 0;
  }

  if (*report_cmd) {
    std::ifstream in(report_in);
    if (!in) throw IoError("cannot open '" + report_in + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw FormatError("report '" + report_in + "': " + e.what());
    }
    if (report_format == "json") {
      write_json(j, report_out);
    } else if (report_format == "table") {
      // Mirrors the result tables: System | Accuracy | F1 score.
      char acc_buf[32], f1_buf[32];
      std::snprintf(acc_buf, sizeof acc_buf, "%.2f%%", j.value("accuracy", 0.0) * 100.0);
      std::snprintf(f1_buf, sizeof f1_buf, "%.4f", j.value("macro_f1", 0.0));
      std::cout << "System        Accuracy    F1 score\n";
      std::cout << std::left;
      std::cout.width(14);
      std::cout << j.value("system", std::string("?"));
      std::cout.width(12);
      std::cout << acc_buf;
      std::cout << f1_buf << "\n";
    } else if (report_format == "png") {
      if (report_out.empty()) throw DomainError("report --format png needs --out");
      ConfusionMatrix cm(static_cast<int>(j.at("confusion").size()));
      for (int t = 0; t < cm.n_classes; ++t)
        for (int p = 0; p < cm.n_classes; ++p)
          cm.at(t, p) = j.at("confusion")[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]
                            .get<std::int64_t>();
      write_png(confusion_heat_grid(cm), report_out);
    } else {
      throw DomainError("report: unknown format '" + report_format + "'");
    }
    return 0;
  }

  return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  try {
    return dispatch(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ecg
