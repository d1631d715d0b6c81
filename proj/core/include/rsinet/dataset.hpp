#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rsinet/raster.hpp"
#include "rsinet/tensor.hpp"

namespace rsinet {

struct ClassDef {
  std::string name;
  Rgb color{};
};

struct FilePair {
  std::string image;
  std::string label;
};

struct DatasetManifest {
  std::string name;
  std::vector<ClassDef> classes;
  std::vector<FilePair> pairs;
  std::vector<std::size_t> channel_order;  // source band selection
  std::size_t tile_size = 512;
  std::size_t tile_stride = 0;  // 0: stride = tile_size
  int32_t ignore_index = 255;
  // Optional explicit split lists: indices into `pairs`.
  std::vector<std::size_t> train_split;
  std::vector<std::size_t> test_split;

  std::vector<Rgb> palette() const;
  std::size_t stride() const { return tile_stride ? tile_stride : tile_size; }
  std::vector<std::size_t> split(const std::string& which) const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

// Color raster -> class indices. Unknown colors map to ignore_index when
// lenient, otherwise raise.
std::vector<int32_t> decode_labels(const RasterImage& colors,
                                   const DatasetManifest& manifest,
                                   bool strict = false);
// Class indices -> RGB bytes using the manifest palette; ignore_index
// renders black.
std::vector<std::uint8_t> encode_labels(const std::vector<int32_t>& labels,
                                        const DatasetManifest& manifest);

struct Sample {
  Tensor image;                 // [3, tile, tile], values in [0,1]
  std::vector<int32_t> labels;  // tile*tile class indices
  std::string source;
  std::size_t origin_y = 0;
  std::size_t origin_x = 0;
};

// Non-overlapping grid crops at the manifest stride; right/bottom
// remainders are covered by edge-aligned tiles. Deterministic order.
std::vector<std::pair<std::size_t, std::size_t>> tile_origins(
    std::size_t height, std::size_t width, std::size_t tile,
    std::size_t stride);

std::vector<Sample> tile_dataset(const DatasetManifest& manifest,
                                 const std::vector<std::size_t>& pair_indices,
                                 bool strict_labels = false);

struct SynthOptions {
  std::size_t n_samples = 8;
  std::size_t size = 64;
  std::size_t n_classes = 5;
  double noise_sd = 0.02;
  std::size_t shapes_per_sample = 6;
};

// Seeded synthetic scenes: random rectangles/ellipses/stripes over a
// background class, image channels drawn from class-specific means plus
// Gaussian noise. Labels are exact by construction.
std::vector<Sample> synth_dataset(std::uint64_t seed,
                                  const SynthOptions& options);

// Class-mean channel colors used by the synthetic generator.
std::vector<std::array<double, 3>> synth_class_means(std::size_t n_classes);

DatasetManifest synth_manifest(const SynthOptions& options);

}  // namespace rsinet
