#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ecgkit/record.hpp"

namespace ecg {

struct RasterConfig {
  int width = 506;
  int height = 187;
  int supersample = 4;
  std::uint8_t background = 255;
  std::uint8_t trace = 0;

  void validate() const;
};

// Row-major 8-bit grayscale image.
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

// Renders the 12 leads as stacked horizontal bands (lead I on top). Each
// lead is min-max normalised into its own band so low-amplitude leads stay
// visible; a flat lead draws the band midline. Polylines are rasterised on
// a supersampled canvas, box-averaged down, and quantised round-half-even.
// Pure integer output path: identical input and config give byte-identical
// pixels on every platform.
RasterImage rasterize(const EcgRecord& record, const RasterConfig& cfg = {});

// Output rows [first, last) covered by a band, in the final image.
std::pair<int, int> band_rows(int band, const RasterConfig& cfg = {});

// 8-bit grayscale PNG, non-interlaced. The encoder emits uncompressed
// (stored) deflate blocks so the byte stream never depends on a zlib
// version; files are valid PNGs for any standard decoder.
void write_png(const RasterImage& img, const std::filesystem::path& path);

// Reads PNGs produced by write_png (bit depth 8, color type 0, filter 0,
// stored deflate). Not a general-purpose PNG decoder.
RasterImage read_png(const std::filesystem::path& path);

}  // namespace ecg
