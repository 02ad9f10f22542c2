#include "ecgkit/raster.hpp"

#include <algorithm>
#include <cmath>

#include "ecgkit/errors.hpp"

namespace ecg {

void RasterConfig::validate() const {
  if (width < 1 || height < 12) throw DomainError("raster: canvas too small for 12 bands");
  if (supersample < 1) throw DomainError("raster: supersample must be >= 1");
}

std::pair<int, int> band_rows(int band, const RasterConfig& cfg) {
  const int first = band * cfg.height / kNumLeads;
  const int last = (band + 1) * cfg.height / kNumLeads;
  return {first, last};
}

namespace {

struct Canvas {
  int w, h;
  std::vector<std::uint8_t> px;
  void set(long long x, long long y, std::uint8_t v) {
    if (x >= 0 && x < w && y >= 0 && y < h)
      px[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] = v;
  }
};

// Bresenham line, endpoints inclusive.
void draw_line(Canvas& c, long long x0, long long y0, long long x1, long long y1,
               std::uint8_t v) {
  const long long dx = std::llabs(x1 - x0);
  const long long dy = -std::llabs(y1 - y0);
  const long long sx = x0 < x1 ? 1 : -1;
  const long long sy = y0 < y1 ? 1 : -1;
  long long err = dx + dy;
  for (;;) {
    c.set(x0, y0, v);
    if (x0 == x1 && y0 == y1) break;
    const long long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

// Integer round-half-even of num/den, both non-negative.
std::uint8_t div_round_half_even(long long num, long long den) {
  const long long q = num / den;
  const long long r = num % den;
  if (2 * r > den) return static_cast<std::uint8_t>(q + 1);
  if (2 * r < den) return static_cast<std::uint8_t>(q);
  return static_cast<std::uint8_t>((q % 2 == 0) ? q : q + 1);
}

}  // namespace

RasterImage rasterize(const EcgRecord& record, const RasterConfig& cfg) {
  record.validate();
  cfg.validate();
  const int n = record.n_samples();
  const int s = cfg.supersample;
  Canvas canvas{cfg.width * s, cfg.height * s, {}};
  canvas.px.assign(static_cast<std::size_t>(canvas.w) * static_cast<std::size_t>(canvas.h),
                   cfg.background);

  for (int lead = 0; lead < kNumLeads; ++lead) {
    const auto& sig = record.leads[static_cast<std::size_t>(lead)];
    const auto [row_first, row_last] = band_rows(lead, cfg);
    const long long band_top = static_cast<long long>(row_first) * s;
    const long long band_h = static_cast<long long>(row_last - row_first) * s;

    const auto [mn_it, mx_it] = std::minmax_element(sig.begin(), sig.end());
    const double mn = *mn_it, mx = *mx_it;

    long long prev_x = 0, prev_y = 0;
    for (int i = 0; i < n; ++i) {
      // Flat leads sit on the band midline; otherwise max maps to the band
      // top and min to the band bottom.
      const double t = (mx == mn) ? 0.5 : (sig[static_cast<std::size_t>(i)] - mn) / (mx - mn);
      const long long x = std::llround(static_cast<double>(i) *
                                       static_cast<double>(canvas.w - 1) /
                                       static_cast<double>(n - 1));
      const long long y = band_top + std::llround((1.0 - t) * static_cast<double>(band_h - 1));
      if (i > 0) draw_line(canvas, prev_x, prev_y, x, y, cfg.trace);
      prev_x = x;
      prev_y = y;
    }
  }

  RasterImage img;
  img.width = cfg.width;
  img.height = cfg.height;
  img.pixels.resize(static_cast<std::size_t>(cfg.width) * static_cast<std::size_t>(cfg.height));
  const long long area = static_cast<long long>(s) * s;
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      long long acc = 0;
      for (int dy = 0; dy < s; ++dy) {
        const std::size_t row =
            (static_cast<std::size_t>(y) * s + static_cast<std::size_t>(dy)) *
            static_cast<std::size_t>(canvas.w);
        for (int dx = 0; dx < s; ++dx) {
          acc += canvas.px[row + static_cast<std::size_t>(x) * s + static_cast<std::size_t>(dx)];
        }
      }
      img.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(cfg.width) +
                 static_cast<std::size_t>(x)] = div_round_half_even(acc, area);
    }
  }
  return img;
}

}  // namespace ecg
