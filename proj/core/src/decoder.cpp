#include "rsinet/decoder.hpp"

namespace rsinet {

Decoder::Decoder(ParamRegistry& reg, const DecoderConfig& config, Rng& rng)
    : config_(config) {
  require(config.block1_kernels.size() == 10,
          "decoder: block 1 needs exactly 10 kernel sizes");
  const std::size_t c1 = config.high_channels;
  for (std::size_t i = 0; i < 10; ++i) {
    const std::size_t k = config.block1_kernels[i];
    require(k % 2 == 1, "decoder: block 1 kernels must be odd");
    const bool up = i == 0 || i == 5;  // two stride-2 layers
    block1_.push_back(make_conv(
        reg, "decoder.block1.layer" + std::to_string(i + 1), c1, c1, k,
        up ? 2 : 1, 1, up ? 1 : (k - 1) / 2, rng, true, up ? 1 : 0));
  }

  block2_ = make_conv(reg, "decoder.block2.fuse",
                      config.high_channels + config.low_channels,
                      config.fusion, 1, 1, 1, 0, rng);

  const std::size_t cr = config.restore;
  std::size_t in = config.fusion;
  for (std::size_t i = 0; i < 9; ++i) {
    const bool up = i == 0 || i == 5;  // stride-2 at layers 1 and 6
    block3_.push_back(make_conv(
        reg, "decoder.block3.layer" + std::to_string(i + 1), in, cr, 3,
        up ? 2 : 1, 1, 1, rng, true, up ? 1 : 0));
    in = cr;
  }

  block4_ = make_conv(reg, "decoder.block4.classify",
                      config.restore + config.graph_channels, config.classes,
                      1, 1, 1, 0, rng);
}

Tensor Decoder::block1_upsample(const Tensor& high) const {
  Tensor h = high;
  for (const ConvLayerParams& layer : block1_)
    h = leaky_relu(transpose_conv2d(h, layer), config_.leaky_slope);
  return h;
}

Tensor Decoder::block2_fuse(const Tensor& up, const Tensor& low) const {
  require(up.dim(2) == low.dim(2) && up.dim(3) == low.dim(3),
          "block2_fuse: extent mismatch");
  return leaky_relu(conv2d(concat_channels({up, low}), block2_),
                    config_.leaky_slope);
}

Tensor Decoder::block3_restore(const Tensor& fused) const {
  Tensor h = fused;
  for (const ConvLayerParams& layer : block3_)
    h = leaky_relu(transpose_conv2d(h, layer), config_.leaky_slope);
  return h;
}

Tensor Decoder::block4_logits(const Tensor& image_features,
                              const Tensor& graph_raster) const {
  require(image_features.dim(2) == graph_raster.dim(2) &&
              image_features.dim(3) == graph_raster.dim(3),
          "block4: extent mismatch");
  return conv2d(concat_channels({image_features, graph_raster}), block4_);
}

Tensor Decoder::block4_fuse_classify(const Tensor& image_features,
                                     const Tensor& graph_raster) const {
  return softmax_channels(block4_logits(image_features, graph_raster));
}

}  // namespace rsinet
