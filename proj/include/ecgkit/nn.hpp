#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecgkit/record.hpp"

namespace ecg::nn {

enum class ArchKind { cnn1d, cnn1d_gru, gru, gru_lstm, lstm, cnn2d };

std::optional<ArchKind> parse_arch(std::string_view name);
std::string_view arch_name(ArchKind kind);

// Model families: three convolution blocks with kernel sizes 8, 5, 3 (64
// filters each; 128 for the gru_lstm and lstm variants), optional recurrent
// stack, dense softmax head over the 5 classes.
//   cnn1d     conv stack -> global average pool over time
//   cnn1d_gru conv stack -> GRU(128)
//   gru       conv stack -> GRU(64) -> GRU(128)
//   gru_lstm  conv stack -> GRU(128) x2 -> LSTM(128) x2
//   lstm      conv stack -> LSTM(128) -> LSTM(256) x2
//   cnn2d     2D conv stack over the rasterised image -> global average pool
struct ArchSpec {
  ArchKind kind = ArchKind::cnn1d;
  int input_channels = 12;
  int input_len = 5000;
  int image_h = 187;
  int image_w = 506;
  bool with_qrs_features = false;
  int n_classes = kNumClasses;

  static constexpr std::array<int, 3> kKernelSizes{8, 5, 3};
  int conv_filters() const {
    return (kind == ArchKind::gru_lstm || kind == ArchKind::lstm) ? 128 : 64;
  }
};

struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    v.assign(n, 0.0);
  }
  int dim(std::size_t i) const { return shape[i]; }
  std::size_t size() const { return v.size(); }
};

// One training/evaluation example. `input` is (12, input_len) for signal
// models or (1, image_h, image_w) for cnn2d; `aux` carries the QRS feature
// vector when the arch enables it; `label` is -1 for unlabeled inputs.
struct Example {
  Tensor input;
  std::array<double, 6> aux{};
  int label = -1;
};

struct ParamView {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  int fan_in = 0;
  int fan_out = 0;
  bool is_bias = false;
};

struct LayerDesc {
  enum class Kind {
    conv1d,
    relu,
    maxpool1d,
    conv2d,
    maxpool2d,
    gru,
    lstm,
    gap_time,
    gap_2d,
    last_hidden,
    concat_aux,
    dense
  };
  Kind kind;
  int in = 0;
  int out = 0;
  int k = 0;
};

// Stateless computation graph for an ArchSpec: owns the layer plan and the
// parameter layout, never the parameters themselves.
//
// Recurrent cells follow the formulations of Cho et al. / Hochreiter &
// Schmidhuber. GRU: r and z are sigmoid gates, candidate
// n = tanh(Wn x + Un (r*h) + bn), new state h' = (1-z)*h + z*n. LSTM:
// input/forget/output sigmoid gates i, f, o and tanh cell candidate g with
// c' = f*c + i*g, h' = o*tanh(c').
class Network {
 public:
  explicit Network(const ArchSpec& arch);

  const ArchSpec& arch() const { return arch_; }
  const std::vector<LayerDesc>& layers() const { return layers_; }
  const std::vector<ParamView>& views() const { return views_; }
  const ParamView* find_view(std::string_view name) const;
  std::size_t param_count() const { return param_count_; }

  // Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases, drawn
  // from a SplitMix64 stream in parameter order. Bit-reproducible.
  void init_params(std::span<double> params, std::uint64_t seed) const;

  struct LayerState {
    Tensor input;
    Tensor output;
    std::vector<int> argmax;     // pools
    std::vector<double> gates;   // rnn per-step gate values
    std::vector<double> hidden;  // rnn hidden (and cell) sequences
  };
  struct Cache {
    std::vector<LayerState> layers;
  };

  std::vector<double> logits(std::span<const double> params, const Example& ex,
                             Cache* cache = nullptr) const;
  // Backprop from dL/dlogits; adds parameter gradients into `grad`.
  void accumulate_gradient(std::span<const double> params, const Cache& cache,
                           std::span<const double> dlogits, std::span<double> grad) const;

 private:
  ArchSpec arch_;
  std::vector<LayerDesc> layers_;
  std::vector<ParamView> views_;
  std::vector<std::size_t> layer_view_start_;  // first view index per layer
  std::size_t param_count_ = 0;
};

// Raw-buffer recurrence steps. Network's forward pass runs exactly these;
// they are exposed so cell behaviour can be checked against hand-unrolled
// references.
struct GruWeights {
  const double *wr, *wz, *wn;  // input weights, each (hidden x in)
  const double *ur, *uz, *un;  // recurrent weights, each (hidden x hidden)
  const double *br, *bz, *bn;
};
// h is updated in place. gates (optional) receives r, z, n, r*h_prev.
void gru_step(const GruWeights& w, const double* x, int in, double* h, int hidden,
              double* gates);

struct LstmWeights {
  const double *wi, *wf, *wg, *wo;
  const double *ui, *uf, *ug, *uo;
  const double *bi, *bf, *bg, *bo;
};
// h and c are updated in place. gates (optional) receives i, f, g, o, tanh(c).
void lstm_step(const LstmWeights& w, const double* x, int in, double* h, double* c, int hidden,
               double* gates);

// Reduce-on-plateau bookkeeping plus the early-stopping counter, both keyed
// on strict validation-loss improvement.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr_initial, double factor, int patience, double lr_floor)
      : lr_(lr_initial), factor_(factor), patience_(patience), floor_(lr_floor) {}

  // Feed one epoch's validation loss.
  void observe(double val_loss) {
    if (val_loss < best_) {
      best_ = val_loss;
      wait_ = 0;
      since_best_ = 0;
      improved_ = true;
      return;
    }
    improved_ = false;
    ++since_best_;
    if (++wait_ >= patience_) {
      lr_ = std::max(lr_ * factor_, floor_);
      wait_ = 0;
    }
  }

  double lr() const { return lr_; }
  bool improved() const { return improved_; }
  int epochs_since_best() const { return since_best_; }
  double best() const { return best_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double floor_;
  double best_ = std::numeric_limits<double>::infinity();
  int wait_ = 0;
  int since_best_ = 0;
  bool improved_ = false;
};

struct ModelState {
  ArchSpec arch;
  std::uint64_t seed = 0;
  std::vector<double> params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  long long adam_t = 0;
  int epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

ModelState build(const ArchSpec& arch, std::uint64_t seed);

// Row-wise softmax distributions, one row per example.
std::vector<std::array<double, 5>> forward(const ModelState& state,
                                           std::span<const Example> batch);

// Mean categorical cross-entropy over the batch.
double batch_loss(const ArchSpec& arch, std::span<const double> params,
                  std::span<const Example> batch);

// Exact gradient of the mean categorical cross-entropy.
std::vector<double> batch_gradient(const ArchSpec& arch, std::span<const double> params,
                                   std::span<const Example> batch, double* loss_out = nullptr);

std::vector<double> backward(const ModelState& state, std::span<const Example> batch);

// Argmax labels; ties go to the lowest class index.
std::vector<int> predict(const ModelState& state, std::span<const Example> batch);

struct TrainConfig {
  double lr_initial = 1e-3;
  double lr_floor = 1.6e-6;
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  int batch_size = 50;
  int max_epochs = 50;
  int early_stopping_patience = 3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

// Adam with reduce-on-plateau and early stopping, both driven by validation
// loss. Returns with the parameters of the best validation epoch restored.
// Fully deterministic for a fixed (state, data order, cfg).
TrainResult train(ModelState& state, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const TrainConfig& cfg);

void save_history_csv(const std::vector<EpochStats>& history, const std::filesystem::path& path);

// Checkpoint = `<stem>.json` metadata + `<stem>.bin` little-endian doubles.
void save_checkpoint(const ModelState& state, const std::filesystem::path& stem);
ModelState load_checkpoint(const std::filesystem::path& stem);

}  // namespace ecg::nn
