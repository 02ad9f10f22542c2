#include "ecgkit/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ecgkit/errors.hpp"
#include "ecgkit/rng.hpp"

using nlohmann::json;

namespace ecg::nn {

std::optional<ArchKind> parse_arch(std::string_view name) {
  if (name == "cnn1d") return ArchKind::cnn1d;
  if (name == "cnn1d_gru") return ArchKind::cnn1d_gru;
  if (name == "gru") return ArchKind::gru;
  if (name == "gru_lstm") return ArchKind::gru_lstm;
  if (name == "lstm") return ArchKind::lstm;
  if (name == "cnn2d") return ArchKind::cnn2d;
  return std::nullopt;
}

std::string_view arch_name(ArchKind kind) {
  switch (kind) {
    case ArchKind::cnn1d: return "cnn1d";
    case ArchKind::cnn1d_gru: return "cnn1d_gru";
    case ArchKind::gru: return "gru";
    case ArchKind::gru_lstm: return "gru_lstm";
    case ArchKind::lstm: return "lstm";
    case ArchKind::cnn2d: return "cnn2d";
  }
  throw DomainError("invalid arch kind");
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += W x for row-major W (rows x cols)
void matvec_acc(const double* w, const double* x, int rows, int cols, double* y) {
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* wr = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

// y += W^T d
void matvec_t_acc(const double* w, const double* d, int rows, int cols, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double dr = d[r];
    const double* wr = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
    for (int c = 0; c < cols; ++c) y[c] += wr[c] * dr;
  }
}

// dW += d (outer) x
void outer_acc(double* dw, const double* d, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double dr = d[r];
    double* dwr = dw + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
    for (int c = 0; c < cols; ++c) dwr[c] += dr * x[c];
  }
}

}  // namespace

void gru_step(const GruWeights& w, const double* x, int in, double* h, int hidden,
              double* gates) {
  std::vector<double> r(static_cast<std::size_t>(hidden)), z(static_cast<std::size_t>(hidden)),
      n(static_cast<std::size_t>(hidden)), rh(static_cast<std::size_t>(hidden));
  for (int j = 0; j < hidden; ++j) {
    r[static_cast<std::size_t>(j)] = w.br[j];
    z[static_cast<std::size_t>(j)] = w.bz[j];
  }
  matvec_acc(w.wr, x, hidden, in, r.data());
  matvec_acc(w.ur, h, hidden, hidden, r.data());
  matvec_acc(w.wz, x, hidden, in, z.data());
  matvec_acc(w.uz, h, hidden, hidden, z.data());
  for (int j = 0; j < hidden; ++j) {
    r[static_cast<std::size_t>(j)] = sigmoid(r[static_cast<std::size_t>(j)]);
    z[static_cast<std::size_t>(j)] = sigmoid(z[static_cast<std::size_t>(j)]);
    rh[static_cast<std::size_t>(j)] = r[static_cast<std::size_t>(j)] * h[j];
    n[static_cast<std::size_t>(j)] = w.bn[j];
  }
  matvec_acc(w.wn, x, hidden, in, n.data());
  matvec_acc(w.un, rh.data(), hidden, hidden, n.data());
  for (int j = 0; j < hidden; ++j) {
    n[static_cast<std::size_t>(j)] = std::tanh(n[static_cast<std::size_t>(j)]);
    h[j] = (1.0 - z[static_cast<std::size_t>(j)]) * h[j] +
           z[static_cast<std::size_t>(j)] * n[static_cast<std::size_t>(j)];
  }
  if (gates) {
    std::memcpy(gates, r.data(), sizeof(double) * static_cast<std::size_t>(hidden));
    std::memcpy(gates + hidden, z.data(), sizeof(double) * static_cast<std::size_t>(hidden));
    std::memcpy(gates + 2 * hidden, n.data(), sizeof(double) * static_cast<std::size_t>(hidden));
    std::memcpy(gates + 3 * hidden, rh.data(), sizeof(double) * static_cast<std::size_t>(hidden));
  }
}

void lstm_step(const LstmWeights& w, const double* x, int in, double* h, double* c, int hidden,
               double* gates) {
  std::vector<double> pre_i(static_cast<std::size_t>(hidden)), pre_f(static_cast<std::size_t>(hidden)),
      pre_g(static_cast<std::size_t>(hidden)), pre_o(static_cast<std::size_t>(hidden));
  for (int j = 0; j < hidden; ++j) {
    pre_i[static_cast<std::size_t>(j)] = w.bi[j];
    pre_f[static_cast<std::size_t>(j)] = w.bf[j];
    pre_g[static_cast<std::size_t>(j)] = w.bg[j];
    pre_o[static_cast<std::size_t>(j)] = w.bo[j];
  }
  matvec_acc(w.wi, x, hidden, in, pre_i.data());
  matvec_acc(w.ui, h, hidden, hidden, pre_i.data());
  matvec_acc(w.wf, x, hidden, in, pre_f.data());
  matvec_acc(w.uf, h, hidden, hidden, pre_f.data());
  matvec_acc(w.wg, x, hidden, in, pre_g.data());
  matvec_acc(w.ug, h, hidden, hidden, pre_g.data());
  matvec_acc(w.wo, x, hidden, in, pre_o.data());
  matvec_acc(w.uo, h, hidden, hidden, pre_o.data());
  for (int j = 0; j < hidden; ++j) {
    const double i_g = sigmoid(pre_i[static_cast<std::size_t>(j)]);
    const double f_g = sigmoid(pre_f[static_cast<std::size_t>(j)]);
    const double g_g = std::tanh(pre_g[static_cast<std::size_t>(j)]);
    const double o_g = sigmoid(pre_o[static_cast<std::size_t>(j)]);
    c[j] = f_g * c[j] + i_g * g_g;
    const double tc = std::tanh(c[j]);
    h[j] = o_g * tc;
    if (gates) {
      gates[j] = i_g;
      gates[hidden + j] = f_g;
      gates[2 * hidden + j] = g_g;
      gates[3 * hidden + j] = o_g;
      gates[4 * hidden + j] = tc;
    }
  }
}

Network::Network(const ArchSpec& arch) : arch_(arch) {
  if (arch.n_classes < 2 || arch.n_classes > kNumClasses)
    throw DomainError("network: n_classes must lie in [2," + std::to_string(kNumClasses) + "]");
  const int f = arch.conv_filters();

  auto add_view = [&](const std::string& name, std::size_t size, int fan_in, int fan_out,
                      bool bias) {
    views_.push_back({name, param_count_, size, fan_in, fan_out, bias});
    param_count_ += size;
  };
  auto add_conv1d = [&](const std::string& name, int in, int out, int k) {
    layer_view_start_.push_back(views_.size());
    layers_.push_back({LayerDesc::Kind::conv1d, in, out, k});
    add_view(name + ".W", static_cast<std::size_t>(out) * static_cast<std::size_t>(in) * static_cast<std::size_t>(k),
             in * k, out * k, false);
    add_view(name + ".b", static_cast<std::size_t>(out), 0, 0, true);
  };
  auto add_conv2d = [&](const std::string& name, int in, int out, int k) {
    layer_view_start_.push_back(views_.size());
    layers_.push_back({LayerDesc::Kind::conv2d, in, out, k});
    add_view(name + ".W",
             static_cast<std::size_t>(out) * static_cast<std::size_t>(in) * static_cast<std::size_t>(k) * static_cast<std::size_t>(k),
             in * k * k, out * k * k, false);
    add_view(name + ".b", static_cast<std::size_t>(out), 0, 0, true);
  };
  auto add_plain = [&](LayerDesc::Kind kind, int in = 0, int out = 0, int k = 0) {
    layer_view_start_.push_back(views_.size());
    layers_.push_back({kind, in, out, k});
  };
  auto add_gru = [&](const std::string& name, int in, int hidden) {
    layer_view_start_.push_back(views_.size());
    layers_.push_back({LayerDesc::Kind::gru, in, hidden, 0});
    for (const char* g : {"r", "z", "n"})
      add_view(name + ".W" + g, static_cast<std::size_t>(hidden) * static_cast<std::size_t>(in), in, hidden, false);
    for (const char* g : {"r", "z", "n"})
      add_view(name + ".U" + g, static_cast<std::size_t>(hidden) * static_cast<std::size_t>(hidden), hidden, hidden, false);
    for (const char* g : {"r", "z", "n"})
      add_view(name + ".b" + g, static_cast<std::size_t>(hidden), 0, 0, true);
  };
  auto add_lstm = [&](const std::string& name, int in, int hidden) {
    layer_view_start_.push_back(views_.size());
    layers_.push_back({LayerDesc::Kind::lstm, in, hidden, 0});
    for (const char* g : {"i", "f", "g", "o"})
      add_view(name + ".W" + g, static_cast<std::size_t>(hidden) * static_cast<std::size_t>(in), in, hidden, false);
    for (const char* g : {"i", "f", "g", "o"})
      add_view(name + ".U" + g, static_cast<std::size_t>(hidden) * static_cast<std::size_t>(hidden), hidden, hidden, false);
    for (const char* g : {"i", "f", "g", "o"})
      add_view(name + ".b" + g, static_cast<std::size_t>(hidden), 0, 0, true);
  };

  int features = 0;
  if (arch.kind == ArchKind::cnn2d) {
    if (arch.image_h < 8 || arch.image_w < 8)
      throw DomainError("network: image too small for three pooling stages");
    int c = 1;
    for (std::size_t b = 0; b < ArchSpec::kKernelSizes.size(); ++b) {
      add_conv2d("conv" + std::to_string(b + 1), c, f, ArchSpec::kKernelSizes[b]);
      add_plain(LayerDesc::Kind::relu);
      add_plain(LayerDesc::Kind::maxpool2d);
      c = f;
    }
    add_plain(LayerDesc::Kind::gap_2d);
    features = f;
  } else {
    if (arch.input_len < 8)
      throw DomainError("network: input_len must be >= 8 (three pooling stages)");
    int c = arch.input_channels;
    for (std::size_t b = 0; b < ArchSpec::kKernelSizes.size(); ++b) {
      add_conv1d("conv" + std::to_string(b + 1), c, f, ArchSpec::kKernelSizes[b]);
      add_plain(LayerDesc::Kind::relu);
      add_plain(LayerDesc::Kind::maxpool1d);
      c = f;
    }
    switch (arch.kind) {
      case ArchKind::cnn1d:
        add_plain(LayerDesc::Kind::gap_time);
        features = f;
        break;
      case ArchKind::cnn1d_gru:
        add_gru("gru1", f, 128);
        add_plain(LayerDesc::Kind::last_hidden);
        features = 128;
        break;
      case ArchKind::gru:
        add_gru("gru1", f, 64);
        add_gru("gru2", 64, 128);
        add_plain(LayerDesc::Kind::last_hidden);
        features = 128;
        break;
      case ArchKind::gru_lstm:
        add_gru("gru1", f, 128);
        add_gru("gru2", 128, 128);
        add_lstm("lstm1", 128, 128);
        add_lstm("lstm2", 128, 128);
        add_plain(LayerDesc::Kind::last_hidden);
        features = 128;
        break;
      case ArchKind::lstm:
        add_lstm("lstm1", f, 128);
        add_lstm("lstm2", 128, 256);
        add_lstm("lstm3", 256, 256);
        add_plain(LayerDesc::Kind::last_hidden);
        features = 256;
        break;
      default:
        throw DomainError("network: unhandled arch kind");
    }
  }
  if (arch.with_qrs_features) {
    add_plain(LayerDesc::Kind::concat_aux, features, features + 6);
    features += 6;
  }
  layer_view_start_.push_back(views_.size());
  layers_.push_back({LayerDesc::Kind::dense, features, arch.n_classes, 0});
  add_view("head.W", static_cast<std::size_t>(arch.n_classes) * static_cast<std::size_t>(features),
           features, arch.n_classes, false);
  add_view("head.b", static_cast<std::size_t>(arch.n_classes), 0, 0, true);
}

const ParamView* Network::find_view(std::string_view name) const {
  for (const auto& v : views_) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

void Network::init_params(std::span<double> params, std::uint64_t seed) const {
  if (params.size() != param_count_) throw DomainError("init_params: wrong buffer size");
  SplitMix64 rng(seed);
  for (const auto& view : views_) {
    if (view.is_bias) {
      for (std::size_t i = 0; i < view.size; ++i) params[view.offset + i] = 0.0;
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(view.fan_in + view.fan_out));
      for (std::size_t i = 0; i < view.size; ++i) {
        params[view.offset + i] = (2.0 * rng.next_double() - 1.0) * limit;
      }
    }
  }
}

namespace {

struct ConvPad {
  int left, right;
};
// Zero "same" padding for stride 1: total k-1, the extra sample on the right.
ConvPad same_pad(int k) { return {(k - 1) / 2, k / 2}; }

}  // namespace

std::vector<double> Network::logits(std::span<const double> params, const Example& ex,
                                    Cache* cache) const {
  if (params.size() != param_count_) throw DomainError("logits: wrong parameter buffer size");
  Tensor x = ex.input;
  if (arch_.kind == ArchKind::cnn2d) {
    if (x.shape.size() != 3 || x.dim(0) != 1 || x.dim(1) != arch_.image_h || x.dim(2) != arch_.image_w)
      throw DomainError("logits: expected input shape (1," + std::to_string(arch_.image_h) + "," +
                        std::to_string(arch_.image_w) + ")");
  } else {
    if (x.shape.size() != 2 || x.dim(0) != arch_.input_channels || x.dim(1) != arch_.input_len)
      throw DomainError("logits: expected input shape (" + std::to_string(arch_.input_channels) +
                        "," + std::to_string(arch_.input_len) + ")");
  }
  if (cache) cache->layers.assign(layers_.size(), {});

  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const LayerDesc& layer = layers_[li];
    const std::size_t vs = layer_view_start_[li];
    LayerState* st = cache ? &cache->layers[li] : nullptr;
    Tensor y;

    switch (layer.kind) {
      case LayerDesc::Kind::conv1d: {
        const int c_in = layer.in, c_out = layer.out, k = layer.k, t_len = x.dim(1);
        const ConvPad pad = same_pad(k);
        const double* w = params.data() + views_[vs].offset;
        const double* b = params.data() + views_[vs + 1].offset;
        y = Tensor({c_out, t_len});
        for (int o = 0; o < c_out; ++o) {
          for (int t = 0; t < t_len; ++t) {
            double acc = b[o];
            for (int c = 0; c < c_in; ++c) {
              const double* wrow =
                  w + (static_cast<std::size_t>(o) * static_cast<std::size_t>(c_in) + static_cast<std::size_t>(c)) * static_cast<std::size_t>(k);
              const double* xrow = x.v.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len);
              for (int kk = 0; kk < k; ++kk) {
                const int src = t + kk - pad.left;
                if (src >= 0 && src < t_len) acc += wrow[kk] * xrow[src];
              }
            }
            y.v[static_cast<std::size_t>(o) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)] = acc;
          }
        }
        break;
      }
      case LayerDesc::Kind::conv2d: {
        const int c_in = layer.in, c_out = layer.out, k = layer.k;
        const int h = x.dim(1), w_dim = x.dim(2);
        const ConvPad pad = same_pad(k);
        const double* w = params.data() + views_[vs].offset;
        const double* b = params.data() + views_[vs + 1].offset;
        y = Tensor({c_out, h, w_dim});
        for (int o = 0; o < c_out; ++o) {
          for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < w_dim; ++xx) {
              double acc = b[o];
              for (int c = 0; c < c_in; ++c) {
                for (int ky = 0; ky < k; ++ky) {
                  const int sy = yy + ky - pad.left;
                  if (sy < 0 || sy >= h) continue;
                  for (int kx = 0; kx < k; ++kx) {
                    const int sx = xx + kx - pad.left;
                    if (sx < 0 || sx >= w_dim) continue;
                    acc += w[((static_cast<std::size_t>(o) * static_cast<std::size_t>(c_in) + static_cast<std::size_t>(c)) * static_cast<std::size_t>(k) + static_cast<std::size_t>(ky)) * static_cast<std::size_t>(k) + static_cast<std::size_t>(kx)] *
                           x.v[(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) + static_cast<std::size_t>(sy)) * static_cast<std::size_t>(w_dim) + static_cast<std::size_t>(sx)];
                  }
                }
              }
              y.v[(static_cast<std::size_t>(o) * static_cast<std::size_t>(h) + static_cast<std::size_t>(yy)) * static_cast<std::size_t>(w_dim) + static_cast<std::size_t>(xx)] = acc;
            }
          }
        }
        break;
      }
      case LayerDesc::Kind::relu: {
        y = x;
        for (double& v : y.v) v = v > 0.0 ? v : 0.0;
        break;
      }
      case LayerDesc::Kind::maxpool1d: {
        const int c_n = x.dim(0), t_len = x.dim(1), t2 = t_len / 2;
        y = Tensor({c_n, t2});
        if (st) st->argmax.resize(y.size());
        for (int c = 0; c < c_n; ++c) {
          for (int t = 0; t < t2; ++t) {
            const std::size_t i0 = static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(2 * t);
            std::size_t best = i0;
            if (x.v[i0 + 1] > x.v[best]) best = i0 + 1;
            const std::size_t oi = static_cast<std::size_t>(c) * static_cast<std::size_t>(t2) + static_cast<std::size_t>(t);
            y.v[oi] = x.v[best];
            if (st) st->argmax[oi] = static_cast<int>(best);
          }
        }
        break;
      }
      case LayerDesc::Kind::maxpool2d: {
        const int c_n = x.dim(0), h = x.dim(1), w_dim = x.dim(2);
        const int h2 = h / 2, w2 = w_dim / 2;
        y = Tensor({c_n, h2, w2});
        if (st) st->argmax.resize(y.size());
        for (int c = 0; c < c_n; ++c) {
          for (int yy = 0; yy < h2; ++yy) {
            for (int xx = 0; xx < w2; ++xx) {
              std::size_t best = 0;
              double bv = -std::numeric_limits<double>::infinity();
              for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                  const std::size_t idx =
                      (static_cast<std::size_t>(c) * static_cast<std::size_t>(h) + static_cast<std::size_t>(2 * yy + dy)) * static_cast<std::size_t>(w_dim) + static_cast<std::size_t>(2 * xx + dx);
                  if (x.v[idx] > bv) {
                    bv = x.v[idx];
                    best = idx;
                  }
                }
              }
              const std::size_t oi =
                  (static_cast<std::size_t>(c) * static_cast<std::size_t>(h2) + static_cast<std::size_t>(yy)) * static_cast<std::size_t>(w2) + static_cast<std::size_t>(xx);
              y.v[oi] = bv;
              if (st) st->argmax[oi] = static_cast<int>(best);
            }
          }
        }
        break;
      }
      case LayerDesc::Kind::gru: {
        const int in = layer.in, hid = layer.out, t_len = x.dim(1);
        const GruWeights wts{params.data() + views_[vs + 0].offset,
                             params.data() + views_[vs + 1].offset,
                             params.data() + views_[vs + 2].offset,
                             params.data() + views_[vs + 3].offset,
                             params.data() + views_[vs + 4].offset,
                             params.data() + views_[vs + 5].offset,
                             params.data() + views_[vs + 6].offset,
                             params.data() + views_[vs + 7].offset,
                             params.data() + views_[vs + 8].offset};
        y = Tensor({hid, t_len});
        std::vector<double> h(static_cast<std::size_t>(hid), 0.0);
        std::vector<double> xt(static_cast<std::size_t>(in));
        std::vector<double> scratch(4 * static_cast<std::size_t>(hid));
        if (st) {
          st->hidden.assign(static_cast<std::size_t>(t_len + 1) * static_cast<std::size_t>(hid), 0.0);
          st->gates.assign(static_cast<std::size_t>(t_len) * 4 * static_cast<std::size_t>(hid), 0.0);
        }
        for (int t = 0; t < t_len; ++t) {
          for (int c = 0; c < in; ++c)
            xt[static_cast<std::size_t>(c)] = x.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)];
          double* gates = st ? st->gates.data() + static_cast<std::size_t>(t) * 4 * static_cast<std::size_t>(hid)
                             : scratch.data();
          gru_step(wts, xt.data(), in, h.data(), hid, gates);
          for (int j = 0; j < hid; ++j)
            y.v[static_cast<std::size_t>(j) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)] = h[static_cast<std::size_t>(j)];
          if (st) {
            std::memcpy(st->hidden.data() + static_cast<std::size_t>(t + 1) * static_cast<std::size_t>(hid),
                        h.data(), sizeof(double) * static_cast<std::size_t>(hid));
          }
        }
        break;
      }
      case LayerDesc::Kind::lstm: {
        const int in = layer.in, hid = layer.out, t_len = x.dim(1);
        const LstmWeights wts{params.data() + views_[vs + 0].offset,
                              params.data() + views_[vs + 1].offset,
                              params.data() + views_[vs + 2].offset,
                              params.data() + views_[vs + 3].offset,
                              params.data() + views_[vs + 4].offset,
                              params.data() + views_[vs + 5].offset,
                              params.data() + views_[vs + 6].offset,
                              params.data() + views_[vs + 7].offset,
                              params.data() + views_[vs + 8].offset,
                              params.data() + views_[vs + 9].offset,
                              params.data() + views_[vs + 10].offset,
                              params.data() + views_[vs + 11].offset};
        y = Tensor({hid, t_len});
        std::vector<double> h(static_cast<std::size_t>(hid), 0.0), cst(static_cast<std::size_t>(hid), 0.0);
        std::vector<double> xt(static_cast<std::size_t>(in));
        std::vector<double> scratch(5 * static_cast<std::size_t>(hid));
        if (st) {
          st->hidden.assign(2 * static_cast<std::size_t>(t_len + 1) * static_cast<std::size_t>(hid), 0.0);
          st->gates.assign(static_cast<std::size_t>(t_len) * 5 * static_cast<std::size_t>(hid), 0.0);
        }
        for (int t = 0; t < t_len; ++t) {
          for (int c = 0; c < in; ++c)
            xt[static_cast<std::size_t>(c)] = x.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)];
          double* gates = st ? st->gates.data() + static_cast<std::size_t>(t) * 5 * static_cast<std::size_t>(hid)
                             : scratch.data();
          lstm_step(wts, xt.data(), in, h.data(), cst.data(), hid, gates);
          for (int j = 0; j < hid; ++j)
            y.v[static_cast<std::size_t>(j) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)] = h[static_cast<std::size_t>(j)];
          if (st) {
            std::memcpy(st->hidden.data() + static_cast<std::size_t>(t + 1) * static_cast<std::size_t>(hid),
                        h.data(), sizeof(double) * static_cast<std::size_t>(hid));
            std::memcpy(st->hidden.data() + static_cast<std::size_t>(t_len + 1 + t + 1) * static_cast<std::size_t>(hid),
                        cst.data(), sizeof(double) * static_cast<std::size_t>(hid));
          }
        }
        break;
      }
      case LayerDesc::Kind::gap_time: {
        const int c_n = x.dim(0), t_len = x.dim(1);
        y = Tensor({c_n});
        for (int c = 0; c < c_n; ++c) {
          double acc = 0.0;
          for (int t = 0; t < t_len; ++t) acc += x.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)];
          y.v[static_cast<std::size_t>(c)] = acc / static_cast<double>(t_len);
        }
        break;
      }
      case LayerDesc::Kind::gap_2d: {
        const int c_n = x.dim(0);
        const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * static_cast<std::size_t>(x.dim(2));
        y = Tensor({c_n});
        for (int c = 0; c < c_n; ++c) {
          double acc = 0.0;
          const double* p = x.v.data() + static_cast<std::size_t>(c) * plane;
          for (std::size_t i = 0; i < plane; ++i) acc += p[i];
          y.v[static_cast<std::size_t>(c)] = acc / static_cast<double>(plane);
        }
        break;
      }
      case LayerDesc::Kind::last_hidden: {
        const int c_n = x.dim(0), t_len = x.dim(1);
        y = Tensor({c_n});
        for (int c = 0; c < c_n; ++c)
          y.v[static_cast<std::size_t>(c)] = x.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t_len - 1)];
        break;
      }
      case LayerDesc::Kind::concat_aux: {
        y = Tensor({layer.out});
        std::copy(x.v.begin(), x.v.end(), y.v.begin());
        for (std::size_t i = 0; i < ex.aux.size(); ++i) y.v[x.size() + i] = ex.aux[i];
        break;
      }
      case LayerDesc::Kind::dense: {
        const double* w = params.data() + views_[vs].offset;
        const double* b = params.data() + views_[vs + 1].offset;
        y = Tensor({layer.out});
        for (int o = 0; o < layer.out; ++o) y.v[static_cast<std::size_t>(o)] = b[o];
        matvec_acc(w, x.v.data(), layer.out, layer.in, y.v.data());
        break;
      }
    }
    if (st) st->input = std::move(x);
    x = std::move(y);
  }
  return x.v;
}

void Network::accumulate_gradient(std::span<const double> params, const Cache& cache,
                                  std::span<const double> dlogits, std::span<double> grad) const {
  Tensor dy;
  dy.shape = {arch_.n_classes};
  dy.v.assign(dlogits.begin(), dlogits.end());

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const LayerDesc& layer = layers_[li];
    const std::size_t vs = layer_view_start_[li];
    const LayerState& st = cache.layers[li];
    const Tensor& x = st.input;
    Tensor dx;

    switch (layer.kind) {
      case LayerDesc::Kind::conv1d: {
        const int c_in = layer.in, c_out = layer.out, k = layer.k, t_len = x.dim(1);
        const ConvPad pad = same_pad(k);
        const double* w = params.data() + views_[vs].offset;
        double* dw = grad.data() + views_[vs].offset;
        double* db = grad.data() + views_[vs + 1].offset;
        dx = Tensor(x.shape);
        for (int o = 0; o < c_out; ++o) {
          for (int t = 0; t < t_len; ++t) {
            const double g = dy.v[static_cast<std::size_t>(o) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)];
            if (g == 0.0) continue;
            db[o] += g;
            for (int c = 0; c < c_in; ++c) {
              const std::size_t wbase =
                  (static_cast<std::size_t>(o) * static_cast<std::size_t>(c_in) + static_cast<std::size_t>(c)) * static_cast<std::size_t>(k);
              const std::size_t xbase = static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len);
              for (int kk = 0; kk < k; ++kk) {
                const int src = t + kk - pad.left;
                if (src >= 0 && src < t_len) {
                  dw[wbase + static_cast<std::size_t>(kk)] += x.v[xbase + static_cast<std::size_t>(src)] * g;
                  dx.v[xbase + static_cast<std::size_t>(src)] += w[wbase + static_cast<std::size_t>(kk)] * g;
                }
              }
            }
          }
        }
        break;
      }
      case LayerDesc::Kind::conv2d: {
        const int c_in = layer.in, c_out = layer.out, k = layer.k;
        const int h = x.dim(1), w_dim = x.dim(2);
        const ConvPad pad = same_pad(k);
        const double* w = params.data() + views_[vs].offset;
        double* dw = grad.data() + views_[vs].offset;
        double* db = grad.data() + views_[vs + 1].offset;
        dx = Tensor(x.shape);
        for (int o = 0; o < c_out; ++o) {
          for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < w_dim; ++xx) {
              const double g =
                  dy.v[(static_cast<std::size_t>(o) * static_cast<std::size_t>(h) + static_cast<std::size_t>(yy)) * static_cast<std::size_t>(w_dim) + static_cast<std::size_t>(xx)];
              if (g == 0.0) continue;
              db[o] += g;
              for (int c = 0; c < c_in; ++c) {
                for (int ky = 0; ky < k; ++ky) {
                  const int sy = yy + ky - pad.left;
                  if (sy < 0 || sy >= h) continue;
                  for (int kx = 0; kx < k; ++kx) {
                    const int sx = xx + kx - pad.left;
                    if (sx < 0 || sx >= w_dim) continue;
                    const std::size_t wi =
                        ((static_cast<std::size_t>(o) * static_cast<std::size_t>(c_in) + static_cast<std::size_t>(c)) * static_cast<std::size_t>(k) + static_cast<std::size_t>(ky)) * static_cast<std::size_t>(k) + static_cast<std::size_t>(kx);
                    const std::size_t xi =
                        (static_cast<std::size_t>(c) * static_cast<std::size_t>(h) + static_cast<std::size_t>(sy)) * static_cast<std::size_t>(w_dim) + static_cast<std::size_t>(sx);
                    dw[wi] += x.v[xi] * g;
                    dx.v[xi] += w[wi] * g;
                  }
                }
              }
            }
          }
        }
        break;
      }
      case LayerDesc::Kind::relu: {
        dx = Tensor(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i) dx.v[i] = x.v[i] > 0.0 ? dy.v[i] : 0.0;
        break;
      }
      case LayerDesc::Kind::maxpool1d:
      case LayerDesc::Kind::maxpool2d: {
        dx = Tensor(x.shape);
        for (std::size_t i = 0; i < dy.size(); ++i)
          dx.v[static_cast<std::size_t>(st.argmax[i])] += dy.v[i];
        break;
      }
      case LayerDesc::Kind::gru: {
        const int in = layer.in, hid = layer.out, t_len = x.dim(1);
        const double* ur = params.data() + views_[vs + 3].offset;
        const double* uz = params.data() + views_[vs + 4].offset;
        const double* un = params.data() + views_[vs + 5].offset;
        const double* wr = params.data() + views_[vs + 0].offset;
        const double* wz = params.data() + views_[vs + 1].offset;
        const double* wn = params.data() + views_[vs + 2].offset;
        double* dwr = grad.data() + views_[vs + 0].offset;
        double* dwz = grad.data() + views_[vs + 1].offset;
        double* dwn = grad.data() + views_[vs + 2].offset;
        double* dur = grad.data() + views_[vs + 3].offset;
        double* duz = grad.data() + views_[vs + 4].offset;
        double* dun = grad.data() + views_[vs + 5].offset;
        double* dbr = grad.data() + views_[vs + 6].offset;
        double* dbz = grad.data() + views_[vs + 7].offset;
        double* dbn = grad.data() + views_[vs + 8].offset;
        dx = Tensor(x.shape);
        std::vector<double> dh(static_cast<std::size_t>(hid), 0.0);
        std::vector<double> xt(static_cast<std::size_t>(in));
        std::vector<double> dr(static_cast<std::size_t>(hid)), dz(static_cast<std::size_t>(hid)),
            dn(static_cast<std::size_t>(hid)), drh(static_cast<std::size_t>(hid)),
            dh_prev(static_cast<std::size_t>(hid));
        for (int t = t_len - 1; t >= 0; --t) {
          const double* g = st.gates.data() + static_cast<std::size_t>(t) * 4 * static_cast<std::size_t>(hid);
          const double* r = g;
          const double* z = g + hid;
          const double* n = g + 2 * hid;
          const double* rh = g + 3 * hid;
          const double* h_prev = st.hidden.data() + static_cast<std::size_t>(t) * static_cast<std::size_t>(hid);
          for (int c = 0; c < in; ++c)
            xt[static_cast<std::size_t>(c)] = x.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)];
          for (int j = 0; j < hid; ++j)
            dh[static_cast<std::size_t>(j)] += dy.v[static_cast<std::size_t>(j) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)];

          for (int j = 0; j < hid; ++j) {
            dn[static_cast<std::size_t>(j)] = dh[static_cast<std::size_t>(j)] * z[j] * (1.0 - n[j] * n[j]);
            dz[static_cast<std::size_t>(j)] = dh[static_cast<std::size_t>(j)] * (n[j] - h_prev[j]) * z[j] * (1.0 - z[j]);
            dh_prev[static_cast<std::size_t>(j)] = dh[static_cast<std::size_t>(j)] * (1.0 - z[j]);
          }
          outer_acc(dwn, dn.data(), xt.data(), hid, in);
          outer_acc(dun, dn.data(), rh, hid, hid);
          for (int j = 0; j < hid; ++j) dbn[j] += dn[static_cast<std::size_t>(j)];
          std::fill(drh.begin(), drh.end(), 0.0);
          matvec_t_acc(un, dn.data(), hid, hid, drh.data());
          for (int j = 0; j < hid; ++j) {
            dr[static_cast<std::size_t>(j)] = drh[static_cast<std::size_t>(j)] * h_prev[j] * r[j] * (1.0 - r[j]);
            dh_prev[static_cast<std::size_t>(j)] += drh[static_cast<std::size_t>(j)] * r[j];
          }
          outer_acc(dwr, dr.data(), xt.data(), hid, in);
          outer_acc(dur, dr.data(), h_prev, hid, hid);
          outer_acc(dwz, dz.data(), xt.data(), hid, in);
          outer_acc(duz, dz.data(), h_prev, hid, hid);
          for (int j = 0; j < hid; ++j) {
            dbr[j] += dr[static_cast<std::size_t>(j)];
            dbz[j] += dz[static_cast<std::size_t>(j)];
          }
          matvec_t_acc(ur, dr.data(), hid, hid, dh_prev.data());
          matvec_t_acc(uz, dz.data(), hid, hid, dh_prev.data());
          for (int c = 0; c < in; ++c) {
            double acc = 0.0;
            for (int j = 0; j < hid; ++j) {
              acc += wr[static_cast<std::size_t>(j) * static_cast<std::size_t>(in) + static_cast<std::size_t>(c)] * dr[static_cast<std::size_t>(j)] +
                     wz[static_cast<std::size_t>(j) * static_cast<std::size_t>(in) + static_cast<std::size_t>(c)] * dz[static_cast<std::size_t>(j)] +
                     wn[static_cast<std::size_t>(j) * static_cast<std::size_t>(in) + static_cast<std::size_t>(c)] * dn[static_cast<std::size_t>(j)];
            }
            dx.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)] = acc;
          }
          dh = dh_prev;
          std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        }
        break;
      }
      case LayerDesc::Kind::lstm: {
        const int in = layer.in, hid = layer.out, t_len = x.dim(1);
        const double* wgt[4], *ugt[4];
        double* dwgt[4];
        double* dugt[4];
        double* dbgt[4];
        for (int g = 0; g < 4; ++g) {
          wgt[g] = params.data() + views_[vs + static_cast<std::size_t>(g)].offset;
          ugt[g] = params.data() + views_[vs + 4 + static_cast<std::size_t>(g)].offset;
          dwgt[g] = grad.data() + views_[vs + static_cast<std::size_t>(g)].offset;
          dugt[g] = grad.data() + views_[vs + 4 + static_cast<std::size_t>(g)].offset;
          dbgt[g] = grad.data() + views_[vs + 8 + static_cast<std::size_t>(g)].offset;
        }
        dx = Tensor(x.shape);
        std::vector<double> dh(static_cast<std::size_t>(hid), 0.0), dc(static_cast<std::size_t>(hid), 0.0);
        std::vector<double> xt(static_cast<std::size_t>(in));
        std::array<std::vector<double>, 4> dpre;
        for (auto& d : dpre) d.assign(static_cast<std::size_t>(hid), 0.0);
        std::vector<double> dh_prev(static_cast<std::size_t>(hid), 0.0);
        const std::size_t c_off = static_cast<std::size_t>(t_len + 1) * static_cast<std::size_t>(hid);
        for (int t = t_len - 1; t >= 0; --t) {
          const double* gp = st.gates.data() + static_cast<std::size_t>(t) * 5 * static_cast<std::size_t>(hid);
          const double* i_g = gp;
          const double* f_g = gp + hid;
          const double* g_g = gp + 2 * hid;
          const double* o_g = gp + 3 * hid;
          const double* tc = gp + 4 * hid;
          const double* h_prev = st.hidden.data() + static_cast<std::size_t>(t) * static_cast<std::size_t>(hid);
          const double* c_prev = st.hidden.data() + c_off + static_cast<std::size_t>(t) * static_cast<std::size_t>(hid);
          for (int c = 0; c < in; ++c)
            xt[static_cast<std::size_t>(c)] = x.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)];
          for (int j = 0; j < hid; ++j)
            dh[static_cast<std::size_t>(j)] += dy.v[static_cast<std::size_t>(j) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)];

          for (int j = 0; j < hid; ++j) {
            const double do_g = dh[static_cast<std::size_t>(j)] * tc[j];
            dc[static_cast<std::size_t>(j)] += dh[static_cast<std::size_t>(j)] * o_g[j] * (1.0 - tc[j] * tc[j]);
            const double di = dc[static_cast<std::size_t>(j)] * g_g[j];
            const double dg = dc[static_cast<std::size_t>(j)] * i_g[j];
            const double df = dc[static_cast<std::size_t>(j)] * c_prev[j];
            dpre[0][static_cast<std::size_t>(j)] = di * i_g[j] * (1.0 - i_g[j]);
            dpre[1][static_cast<std::size_t>(j)] = df * f_g[j] * (1.0 - f_g[j]);
            dpre[2][static_cast<std::size_t>(j)] = dg * (1.0 - g_g[j] * g_g[j]);
            dpre[3][static_cast<std::size_t>(j)] = do_g * o_g[j] * (1.0 - o_g[j]);
            dc[static_cast<std::size_t>(j)] *= f_g[j];  // carry to step t-1
          }
          std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
          for (int g = 0; g < 4; ++g) {
            outer_acc(dwgt[g], dpre[static_cast<std::size_t>(g)].data(), xt.data(), hid, in);
            outer_acc(dugt[g], dpre[static_cast<std::size_t>(g)].data(), h_prev, hid, hid);
            for (int j = 0; j < hid; ++j) dbgt[g][j] += dpre[static_cast<std::size_t>(g)][static_cast<std::size_t>(j)];
            matvec_t_acc(ugt[g], dpre[static_cast<std::size_t>(g)].data(), hid, hid, dh_prev.data());
          }
          for (int c = 0; c < in; ++c) {
            double acc = 0.0;
            for (int g = 0; g < 4; ++g) {
              const double* w = wgt[g];
              for (int j = 0; j < hid; ++j)
                acc += w[static_cast<std::size_t>(j) * static_cast<std::size_t>(in) + static_cast<std::size_t>(c)] *
                       dpre[static_cast<std::size_t>(g)][static_cast<std::size_t>(j)];
            }
            dx.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)] = acc;
          }
          dh = dh_prev;
        }
        break;
      }
      case LayerDesc::Kind::gap_time: {
        const int c_n = x.dim(0), t_len = x.dim(1);
        dx = Tensor(x.shape);
        for (int c = 0; c < c_n; ++c) {
          const double g = dy.v[static_cast<std::size_t>(c)] / static_cast<double>(t_len);
          for (int t = 0; t < t_len; ++t)
            dx.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t)] = g;
        }
        break;
      }
      case LayerDesc::Kind::gap_2d: {
        const int c_n = x.dim(0);
        const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * static_cast<std::size_t>(x.dim(2));
        dx = Tensor(x.shape);
        for (int c = 0; c < c_n; ++c) {
          const double g = dy.v[static_cast<std::size_t>(c)] / static_cast<double>(plane);
          double* p = dx.v.data() + static_cast<std::size_t>(c) * plane;
          for (std::size_t i = 0; i < plane; ++i) p[i] = g;
        }
        break;
      }
      case LayerDesc::Kind::last_hidden: {
        const int c_n = x.dim(0), t_len = x.dim(1);
        dx = Tensor(x.shape);
        for (int c = 0; c < c_n; ++c)
          dx.v[static_cast<std::size_t>(c) * static_cast<std::size_t>(t_len) + static_cast<std::size_t>(t_len - 1)] = dy.v[static_cast<std::size_t>(c)];
        break;
      }
      case LayerDesc::Kind::concat_aux: {
        dx = Tensor(x.shape);
        std::copy(dy.v.begin(), dy.v.begin() + static_cast<std::ptrdiff_t>(x.size()), dx.v.begin());
        break;
      }
      case LayerDesc::Kind::dense: {
        const double* w = params.data() + views_[vs].offset;
        double* dw = grad.data() + views_[vs].offset;
        double* db = grad.data() + views_[vs + 1].offset;
        dx = Tensor(x.shape);
        outer_acc(dw, dy.v.data(), x.v.data(), layer.out, layer.in);
        for (int o = 0; o < layer.out; ++o) db[o] += dy.v[static_cast<std::size_t>(o)];
        matvec_t_acc(w, dy.v.data(), layer.out, layer.in, dx.v.data());
        break;
      }
    }
    dy = std::move(dx);
  }
}

ModelState build(const ArchSpec& arch, std::uint64_t seed) {
  Network net(arch);
  ModelState state;
  state.arch = arch;
  state.seed = seed;
  state.params.resize(net.param_count());
  net.init_params(state.params, seed);
  state.adam_m.assign(net.param_count(), 0.0);
  state.adam_v.assign(net.param_count(), 0.0);
  return state;
}

namespace {

std::array<double, 5> softmax5(const std::vector<double>& logits) {
  std::array<double, 5> p{};
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] /= sum;
  return p;
}

}  // namespace

std::vector<std::array<double, 5>> forward(const ModelState& state,
                                           std::span<const Example> batch) {
  Network net(state.arch);
  std::vector<std::array<double, 5>> out;
  out.reserve(batch.size());
  for (const Example& ex : batch) out.push_back(softmax5(net.logits(state.params, ex)));
  return out;
}

double batch_loss(const ArchSpec& arch, std::span<const double> params,
                  std::span<const Example> batch) {
  if (batch.empty()) throw DomainError("batch_loss: empty batch");
  Network net(arch);
  double total = 0.0;
  for (const Example& ex : batch) {
    if (ex.label < 0 || ex.label >= arch.n_classes)
      throw DomainError("batch_loss: example without a valid label");
    const auto p = softmax5(net.logits(params, ex));
    total += -std::log(p[static_cast<std::size_t>(ex.label)]);
  }
  return total / static_cast<double>(batch.size());
}

std::vector<double> batch_gradient(const ArchSpec& arch, std::span<const double> params,
                                   std::span<const Example> batch, double* loss_out) {
  if (batch.empty()) throw DomainError("batch_gradient: empty batch");
  Network net(arch);
  std::vector<double> grad(net.param_count(), 0.0);
  double total = 0.0;
  Network::Cache cache;
  for (const Example& ex : batch) {
    if (ex.label < 0 || ex.label >= arch.n_classes)
      throw DomainError("batch_gradient: example without a valid label");
    const auto logits = net.logits(params, ex, &cache);
    const auto p = softmax5(logits);
    total += -std::log(p[static_cast<std::size_t>(ex.label)]);
    std::vector<double> dlogits(static_cast<std::size_t>(arch.n_classes));
    for (int c = 0; c < arch.n_classes; ++c) {
      const double y = (c == ex.label) ? 1.0 : 0.0;
      dlogits[static_cast<std::size_t>(c)] =
          (p[static_cast<std::size_t>(c)] - y) / static_cast<double>(batch.size());
    }
    net.accumulate_gradient(params, cache, dlogits, grad);
  }
  if (loss_out) *loss_out = total / static_cast<double>(batch.size());
  return grad;
}

std::vector<double> backward(const ModelState& state, std::span<const Example> batch) {
  return batch_gradient(state.arch, state.params, batch);
}

std::vector<int> predict(const ModelState& state, std::span<const Example> batch) {
  Network net(state.arch);
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const Example& ex : batch) {
    const auto logits = net.logits(state.params, ex);
    int best = 0;
    for (int c = 1; c < state.arch.n_classes; ++c) {
      if (logits[static_cast<std::size_t>(c)] > logits[static_cast<std::size_t>(best)]) best = c;
    }
    labels.push_back(best);
  }
  return labels;
}

namespace {

struct EvalStats {
  double loss = 0.0;
  double acc = 0.0;
};

EvalStats evaluate(const Network& net, std::span<const double> params,
                   std::span<const Example> data) {
  EvalStats s;
  int correct = 0;
  for (const Example& ex : data) {
    const auto logits = net.logits(params, ex);
    const auto p = softmax5(logits);
    s.loss += -std::log(p[static_cast<std::size_t>(ex.label)]);
    int best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c) {
      if (logits[c] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    }
    if (best == ex.label) ++correct;
  }
  s.loss /= static_cast<double>(data.size());
  s.acc = static_cast<double>(correct) / static_cast<double>(data.size());
  return s;
}

}  // namespace

TrainResult train(ModelState& state, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const TrainConfig& cfg) {
  if (train_set.empty() || val_set.empty()) throw DomainError("train: empty dataset");
  if (cfg.batch_size < 1) throw DomainError("train: batch_size must be >= 1");
  if (!(cfg.lr_floor < cfg.lr_initial)) throw DomainError("train: lr_floor must be < lr_initial");
  for (const auto& ex : train_set) {
    if (ex.label < 0 || ex.label >= state.arch.n_classes)
      throw DomainError("train: example without a valid label");
  }
  for (const auto& ex : val_set) {
    if (ex.label < 0 || ex.label >= state.arch.n_classes)
      throw DomainError("train: validation example without a valid label");
  }

  Network net(state.arch);
  SplitMix64 rng(cfg.seed);
  PlateauScheduler scheduler(cfg.lr_initial, cfg.plateau_factor, cfg.plateau_patience,
                             cfg.lr_floor);
  std::vector<double> best_params = state.params;
  int best_epoch = 0;

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = scheduler.lr();
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t correct = 0;
    std::vector<double> grad(net.param_count());
    Network::Cache cache;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto bsize = static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_total = 0.0;

      for (std::size_t bi = start; bi < stop; ++bi) {
        const Example& ex = train_set[order[bi]];
        const auto logits = net.logits(state.params, ex, &cache);
        const auto p = softmax5(logits);
        batch_total += -std::log(p[static_cast<std::size_t>(ex.label)]);
        int argmax = 0;
        for (std::size_t c = 1; c < logits.size(); ++c) {
          if (logits[c] > logits[static_cast<std::size_t>(argmax)]) argmax = static_cast<int>(c);
        }
        if (argmax == ex.label) ++correct;
        std::vector<double> dlogits(logits.size());
        for (int c = 0; c < state.arch.n_classes; ++c) {
          const double y = (c == ex.label) ? 1.0 : 0.0;
          dlogits[static_cast<std::size_t>(c)] = (p[static_cast<std::size_t>(c)] - y) / bsize;
        }
        net.accumulate_gradient(state.params, cache, dlogits, grad);
      }
      const double batch_mean = batch_total / bsize;
      if (!std::isfinite(batch_mean))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += batch_total;

      // Adam update, bias-corrected.
      state.adam_t += 1;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.adam_t));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.adam_t));
      for (std::size_t i = 0; i < state.params.size(); ++i) {
        const double g = grad[i];
        state.adam_m[i] = cfg.adam_beta1 * state.adam_m[i] + (1.0 - cfg.adam_beta1) * g;
        state.adam_v[i] = cfg.adam_beta2 * state.adam_v[i] + (1.0 - cfg.adam_beta2) * g * g;
        const double mhat = state.adam_m[i] / bc1;
        const double vhat = state.adam_v[i] / bc2;
        state.params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      }
    }
    for (double p : state.params) {
      if (!std::isfinite(p))
        throw TrainingError("train: non-finite parameter after epoch " + std::to_string(epoch));
    }

    const EvalStats val = evaluate(net, state.params, val_set);
    if (!std::isfinite(val.loss))
      throw TrainingError("train: non-finite validation loss at epoch " + std::to_string(epoch));

    EpochStats row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_loss = epoch_loss / static_cast<double>(train_set.size());
    row.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    row.val_loss = val.loss;
    row.val_acc = val.acc;
    result.history.push_back(row);
    state.epoch = epoch;

    scheduler.observe(val.loss);
    if (scheduler.improved()) {
      best_epoch = epoch;
      best_params = state.params;
    } else if (scheduler.epochs_since_best() > cfg.early_stopping_patience) {
      result.stopped_early = true;
      break;
    }
  }

  state.params = best_params;
  state.best_val_loss = scheduler.best();
  result.best_epoch = best_epoch;
  result.best_val_loss = scheduler.best();
  return result;
}

void save_history_csv(const std::vector<EpochStats>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "epoch,lr,train_loss,val_loss,train_acc,val_acc\n";
  out.precision(17);
  for (const auto& row : history) {
    out << row.epoch << ',' << row.lr << ',' << row.train_loss << ',' << row.val_loss << ','
        << row.train_acc << ',' << row.val_acc << '\n';
  }
}

namespace {

json arch_to_json(const ArchSpec& a) {
  return json{{"kind", std::string(arch_name(a.kind))},
              {"input_channels", a.input_channels},
              {"input_len", a.input_len},
              {"image_h", a.image_h},
              {"image_w", a.image_w},
              {"with_qrs_features", a.with_qrs_features},
              {"n_classes", a.n_classes}};
}

ArchSpec arch_from_json(const json& j) {
  ArchSpec a;
  const auto kind = parse_arch(j.at("kind").get<std::string>());
  if (!kind) throw FormatError("checkpoint: unknown arch kind");
  a.kind = *kind;
  a.input_channels = j.at("input_channels").get<int>();
  a.input_len = j.at("input_len").get<int>();
  a.image_h = j.at("image_h").get<int>();
  a.image_w = j.at("image_w").get<int>();
  a.with_qrs_features = j.at("with_qrs_features").get<bool>();
  a.n_classes = j.at("n_classes").get<int>();
  return a;
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::filesystem::path& stem) {
  std::filesystem::path meta = stem;
  meta += ".json";
  std::filesystem::path blob = stem;
  blob += ".bin";

  json j;
  j["format"] = "ecgkit-checkpoint";
  j["version"] = 1;
  j["arch"] = arch_to_json(state.arch);
  j["seed"] = state.seed;
  j["epoch"] = state.epoch;
  if (std::isfinite(state.best_val_loss))
    j["best_val_loss"] = state.best_val_loss;
  else
    j["best_val_loss"] = nullptr;
  j["param_count"] = state.params.size();

  std::ofstream mout(meta);
  if (!mout) throw IoError("cannot write '" + meta.string() + "'");
  mout << j.dump(2) << "\n";

  std::ofstream bout(blob, std::ios::binary);
  if (!bout) throw IoError("cannot write '" + blob.string() + "'");
  for (double p : state.params) {
    const auto bits = std::bit_cast<std::uint64_t>(p);
    std::array<char, 8> bytes{};
    for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    bout.write(bytes.data(), 8);
  }
  if (!bout) throw IoError("write failed for '" + blob.string() + "'");
}

ModelState load_checkpoint(const std::filesystem::path& stem) {
  std::filesystem::path meta = stem;
  if (meta.extension() == ".json")
    meta = stem;
  else
    meta += ".json";
  std::ifstream min(meta);
  if (!min) throw IoError("cannot open '" + meta.string() + "'");
  json j;
  try {
    min >> j;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint '" + meta.string() + "': " + e.what());
  }
  if (j.value("format", std::string()) != "ecgkit-checkpoint")
    throw FormatError("checkpoint '" + meta.string() + "': unrecognised format");

  ModelState state;
  state.arch = arch_from_json(j.at("arch"));
  state.seed = j.value("seed", 0ULL);
  state.epoch = j.value("epoch", 0);
  if (j.contains("best_val_loss") && !j.at("best_val_loss").is_null())
    state.best_val_loss = j.at("best_val_loss").get<double>();

  Network net(state.arch);
  const auto expected = j.at("param_count").get<std::size_t>();
  if (expected != net.param_count())
    throw FormatError("checkpoint '" + meta.string() + "': parameter count " +
                      std::to_string(expected) + " does not match arch (" +
                      std::to_string(net.param_count()) + ")");

  std::filesystem::path blob = meta;
  blob.replace_extension(".bin");
  std::ifstream bin(blob, std::ios::binary);
  if (!bin) throw IoError("cannot open '" + blob.string() + "'");
  state.params.resize(net.param_count());
  for (double& p : state.params) {
    std::array<char, 8> bytes{};
    bin.read(bytes.data(), 8);
    if (!bin) throw TruncationError("checkpoint blob '" + blob.string() + "' is truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[static_cast<std::size_t>(i)])) << (8 * i);
    p = std::bit_cast<double>(bits);
  }
  state.adam_m.assign(net.param_count(), 0.0);
  state.adam_v.assign(net.param_count(), 0.0);
  return state;
}

}  // namespace ecg::nn
