#pragma once

#include <cstdint>
#include <vector>

#include "rsinet/nn.hpp"
#include "rsinet/ops.hpp"
#include "rsinet/tensor.hpp"

namespace rsinet {

struct DecoderConfig {
  std::size_t high_channels = 256;   // Block 1 width (matches high tap)
  std::size_t low_channels = 256;    // low tap width
  std::size_t graph_channels = 256;  // GCN raster width
  std::size_t fusion = 256;          // C_f, Block 2 output width
  std::size_t restore = 128;         // C_r, Block 3 output width
  std::size_t classes = 6;
  double leaky_slope = 0.01;
  // Kernel sizes for Block 1's ten transposed layers; layers 5 and 10 wider.
  std::vector<std::size_t> block1_kernels = {3, 3, 3, 3, 5, 3, 3, 3, 3, 5};
};

// Fused decoder: Block 1 lifts the high tap 4x (ten transposed-conv
// layers, two of them stride 2); Block 2 fuses with the low tap via
// concat + 1x1 conv; Block 3 restores to input resolution (nine
// transposed-conv layers, two of them stride 2); Block 4 fuses the graph
// raster and classifies.
class Decoder {
 public:
  Decoder(ParamRegistry& reg, const DecoderConfig& config, Rng& rng);

  Tensor block1_upsample(const Tensor& high) const;   // [*,C,h,w]->[*,C,4h,4w]
  Tensor block2_fuse(const Tensor& up, const Tensor& low) const;
  Tensor block3_restore(const Tensor& fused) const;   // 4x upsample
  // Returns per-pixel class logits [*,classes,H,W]; callers take softmax
  // for probabilities or feed the logits to the loss.
  Tensor block4_logits(const Tensor& image_features,
                       const Tensor& graph_raster) const;
  Tensor block4_fuse_classify(const Tensor& image_features,
                              const Tensor& graph_raster) const;

  const DecoderConfig& config() const { return config_; }

 private:
  DecoderConfig config_;
  std::vector<ConvLayerParams> block1_;  // 10 layers
  ConvLayerParams block2_;
  std::vector<ConvLayerParams> block3_;  // 9 layers
  ConvLayerParams block4_;
};

}  // namespace rsinet
