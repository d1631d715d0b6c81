#pragma once

#include <cstdint>
#include <vector>

#include "rsinet/tensor.hpp"

namespace rsinet {

// Per-pixel region labels in [0, region_count), each region 4-connected
// and non-empty after compaction.
struct SuperpixelMap {
  std::vector<int32_t> labels;  // row-major, height*width entries
  std::size_t region_count = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  int32_t at(std::size_t y, std::size_t x) const {
    return labels[y * width + x];
  }
  std::vector<std::size_t> region_sizes() const;
};

struct SlicOptions {
  double compactness = 10.0;
  std::size_t max_iters = 10;
  // Regions smaller than target_region_size / absorb_divisor are merged
  // into the neighbor with the longest shared boundary.
  std::size_t absorb_divisor = 4;
};

// SLIC clustering in joint channel/position space over the image's native
// channels; ties go to the lowest cluster index. The result is an exact
// partition with 4-connected regions.
SuperpixelMap slic(const Tensor& image, std::size_t target_region_size,
                   const SlicOptions& options = {});

// Pixel <-> superpixel association. Q has one 1 per pixel row; stored as
// the label raster plus per-region pixel counts (the dense (H*W) x Z form
// is available for small instances).
struct PixelGraph {
  SuperpixelMap spmap;
  std::vector<std::size_t> counts;        // |S_j| per region
  std::vector<std::uint8_t> adjacency;    // Z x Z mask M, row-major

  std::size_t region_count() const { return spmap.region_count; }
  Tensor dense_q() const;       // (H*W) x Z, entries {0,1}
  Tensor dense_q_norm() const;  // column-normalized Q
  Tensor dense_mask() const;    // Z x Z
};

PixelGraph build_pixel_graph(const SuperpixelMap& spmap,
                             bool eight_connected = false);

// Region adjacency from 4-neighboring pixel pairs (8 when requested);
// symmetric with zero diagonal.
std::vector<std::uint8_t> adjacency_mask(const SuperpixelMap& spmap,
                                         bool eight_connected = false);

// V = Q_norm^T Flatten(image): node j is the mean of its region's pixel
// vectors. Differentiable with respect to the image.
Tensor graph_encode(const Tensor& image, const PixelGraph& graph);

// Pixel i receives its region's node row (Q V), un-flattened to [D,H,W].
// Differentiable with respect to the nodes.
Tensor graph_decode(const Tensor& nodes, const PixelGraph& graph);

}  // namespace rsinet
