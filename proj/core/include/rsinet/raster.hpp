#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rsinet/tensor.hpp"

namespace rsinet {

// Decoded raster: interleaved samples, value range [0, 2^bit_depth - 1].
struct RasterImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::size_t bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;

  std::uint16_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return samples[(y * width + x) * channels + c];
  }
};

// PNG (8/16-bit gray/RGB/RGBA, palettes expanded) or uncompressed TIFF.
RasterImage load_raster_image(const std::string& path);

// Channels-first tensor with values scaled to [0,1]. channel_order picks
// and orders source bands; empty selects all bands in stored order.
Tensor raster_to_tensor(const RasterImage& img,
                        const std::vector<std::size_t>& channel_order = {});

struct LoadedRaster {
  Tensor tensor;
  std::size_t source_channels = 0;
  std::size_t bit_depth = 8;
};

LoadedRaster load_raster(const std::string& path,
                         const std::vector<std::size_t>& channel_order = {});

using Rgb = std::array<std::uint8_t, 3>;

void write_png_rgb8(const std::string& path, std::size_t height,
                    std::size_t width, const std::vector<std::uint8_t>& rgb);
void write_png_gray8(const std::string& path, std::size_t height,
                     std::size_t width, const std::vector<std::uint8_t>& gray);
// Indexed-color PNG; labels must be < palette size (<= 256 entries).
void write_png_indexed(const std::string& path, std::size_t height,
                       std::size_t width, const std::vector<int32_t>& labels,
                       const std::vector<Rgb>& palette);

}  // namespace rsinet
