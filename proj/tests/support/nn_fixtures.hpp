#pragma once

// Shared fixtures and reference computations for the network tests.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ecgkit/nn.hpp"
#include "ecgkit/rng.hpp"

namespace testsupport {

inline ecg::nn::Example random_nn_example(const ecg::nn::ArchSpec& arch, ecg::SplitMix64& rng,
                                          int label) {
  ecg::nn::Example ex;
  ex.label = label;
  if (arch.kind == ecg::nn::ArchKind::cnn2d) {
    ex.input = ecg::nn::Tensor({1, arch.image_h, arch.image_w});
  } else {
    ex.input = ecg::nn::Tensor({arch.input_channels, arch.input_len});
  }
  for (double& v : ex.input.v) v = rng.next_double() * 2.0 - 1.0;
  if (arch.with_qrs_features) {
    for (double& v : ex.aux) v = rng.next_double();
  }
  return ex;
}

struct GradCheckResult {
  double max_rel = 0.0;
  std::string worst_view;
};

// Central finite differences (h = 1e-5) against the analytic gradient, on a
// deterministic sample of parameters from every tensor.
inline GradCheckResult gradient_check_sampled(const ecg::nn::ArchSpec& arch,
                                              int samples_per_view) {
  using namespace ecg::nn;
  Network net(arch);
  ModelState state = build(arch, 7);
  ecg::SplitMix64 rng(13);
  std::vector<Example> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(random_nn_example(arch, rng, i % arch.n_classes));

  const std::vector<double> analytic = batch_gradient(arch, state.params, batch);
  const double h = 1e-5;
  GradCheckResult result;
  for (const auto& view : net.views()) {
    for (int s = 0; s < samples_per_view; ++s) {
      const std::size_t idx =
          view.offset + (view.size <= 1
                             ? 0
                             : (view.size * static_cast<std::size_t>(s)) /
                                   static_cast<std::size_t>(samples_per_view));
      std::vector<double> params = state.params;
      params[idx] += h;
      const double up = batch_loss(arch, params, batch);
      params[idx] -= 2 * h;
      const double down = batch_loss(arch, params, batch);
      const double fd = (up - down) / (2 * h);
      const double an = analytic[idx];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      if (rel > result.max_rel) {
        result.max_rel = rel;
        result.worst_view = view.name;
      }
    }
  }
  return result;
}

// Fixed-weight two-step comparisons of the recurrence steps against
// longhand scalar arithmetic. Returns the maximum absolute state error.
inline double gru_two_step_max_error() {
  using ecg::nn::GruWeights;
  const double wr[] = {0.3, -0.2, 0.1, 0.4};
  const double wz[] = {-0.1, 0.25, 0.2, -0.3};
  const double wn[] = {0.5, 0.05, -0.15, 0.35};
  const double ur[] = {0.12, -0.08, 0.07, 0.2};
  const double uz[] = {0.06, 0.18, -0.22, 0.09};
  const double un[] = {-0.3, 0.14, 0.02, -0.05};
  const double br[] = {0.01, -0.02};
  const double bz[] = {0.03, 0.0};
  const double bn[] = {-0.04, 0.05};
  const GruWeights w{wr, wz, wn, ur, uz, un, br, bz, bn};
  const double x1[] = {0.7, -0.4};
  const double x2[] = {-0.2, 0.9};

  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  double h[2] = {0.0, 0.0};
  double href[2] = {0.0, 0.0};
  double max_err = 0.0;
  for (const double* x : {x1, x2}) {
    double r[2], z[2], n[2], h_new[2];
    for (int j = 0; j < 2; ++j) {
      r[j] = sig(br[j] + wr[2 * j] * x[0] + wr[2 * j + 1] * x[1] + ur[2 * j] * href[0] +
                 ur[2 * j + 1] * href[1]);
      z[j] = sig(bz[j] + wz[2 * j] * x[0] + wz[2 * j + 1] * x[1] + uz[2 * j] * href[0] +
                 uz[2 * j + 1] * href[1]);
    }
    const double rh[2] = {r[0] * href[0], r[1] * href[1]};
    for (int j = 0; j < 2; ++j) {
      n[j] = std::tanh(bn[j] + wn[2 * j] * x[0] + wn[2 * j + 1] * x[1] + un[2 * j] * rh[0] +
                       un[2 * j + 1] * rh[1]);
      h_new[j] = (1.0 - z[j]) * href[j] + z[j] * n[j];
    }
    href[0] = h_new[0];
    href[1] = h_new[1];

    ecg::nn::gru_step(w, x, 2, h, 2, nullptr);
    max_err = std::max({max_err, std::abs(h[0] - href[0]), std::abs(h[1] - href[1])});
  }
  return max_err;
}

inline double lstm_two_step_max_error() {
  using ecg::nn::LstmWeights;
  const double wi[] = {0.2, -0.1, 0.05, 0.3};
  const double wf[] = {-0.25, 0.15, 0.1, 0.2};
  const double wg[] = {0.4, -0.3, 0.2, 0.1};
  const double wo[] = {0.1, 0.05, -0.2, 0.25};
  const double ui[] = {0.05, 0.1, -0.1, 0.2};
  const double uf[] = {0.3, -0.05, 0.12, 0.08};
  const double ug[] = {-0.15, 0.07, 0.09, -0.2};
  const double uo[] = {0.11, 0.13, -0.06, 0.04};
  const double bi[] = {0.02, -0.01};
  const double bf[] = {0.5, 0.5};
  const double bg[] = {-0.03, 0.04};
  const double bo[] = {0.0, 0.01};
  const LstmWeights w{wi, wf, wg, wo, ui, uf, ug, uo, bi, bf, bg, bo};
  const double x1[] = {0.8, -0.5};
  const double x2[] = {-0.3, 0.6};

  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  double h[2] = {0.0, 0.0}, c[2] = {0.0, 0.0};
  double href[2] = {0.0, 0.0}, cref[2] = {0.0, 0.0};
  double max_err = 0.0;
  for (const double* x : {x1, x2}) {
    double h_new[2], c_new[2];
    for (int j = 0; j < 2; ++j) {
      const double i_g = sig(bi[j] + wi[2 * j] * x[0] + wi[2 * j + 1] * x[1] +
                             ui[2 * j] * href[0] + ui[2 * j + 1] * href[1]);
      const double f_g = sig(bf[j] + wf[2 * j] * x[0] + wf[2 * j + 1] * x[1] +
                             uf[2 * j] * href[0] + uf[2 * j + 1] * href[1]);
      const double g_g = std::tanh(bg[j] + wg[2 * j] * x[0] + wg[2 * j + 1] * x[1] +
                                   ug[2 * j] * href[0] + ug[2 * j + 1] * href[1]);
      const double o_g = sig(bo[j] + wo[2 * j] * x[0] + wo[2 * j + 1] * x[1] +
                             uo[2 * j] * href[0] + uo[2 * j + 1] * href[1]);
      c_new[j] = f_g * cref[j] + i_g * g_g;
      h_new[j] = o_g * std::tanh(c_new[j]);
    }
    href[0] = h_new[0];
    href[1] = h_new[1];
    cref[0] = c_new[0];
    cref[1] = c_new[1];

    ecg::nn::lstm_step(w, x, 2, h, c, 2, nullptr);
    max_err = std::max({max_err, std::abs(h[0] - href[0]), std::abs(h[1] - href[1]),
                        std::abs(c[0] - cref[0]), std::abs(c[1] - cref[1])});
  }
  return max_err;
}

// Five classes of sinusoids at distinct frequencies; trivially separable.
inline std::vector<ecg::nn::Example> sinusoid_set(const ecg::nn::ArchSpec& arch, int per_class,
                                                  std::uint64_t seed) {
  using ecg::nn::Example;
  using ecg::nn::Tensor;
  ecg::SplitMix64 rng(seed);
  std::vector<Example> out;
  const double freqs[] = {2.0, 4.0, 8.0, 16.0, 31.0};
  for (int c = 0; c < 5; ++c) {
    for (int k = 0; k < per_class; ++k) {
      Example ex;
      ex.label = c;
      ex.input = Tensor({arch.input_channels, arch.input_len});
      const double phase = rng.next_double() * 2.0 * std::numbers::pi;
      for (int ch = 0; ch < arch.input_channels; ++ch) {
        for (int t = 0; t < arch.input_len; ++t) {
          ex.input.v[static_cast<std::size_t>(ch) * static_cast<std::size_t>(arch.input_len) +
                     static_cast<std::size_t>(t)] =
              std::sin(2.0 * std::numbers::pi * freqs[c] * t / arch.input_len + phase + 0.1 * ch);
        }
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace testsupport
