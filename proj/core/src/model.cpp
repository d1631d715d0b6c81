#include "rsinet/model.hpp"

#include <cmath>

namespace rsinet {

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::Full;
  if (name == "no_gcn") return Variant::NoGcn;
  if (name == "no_parallel_atrous") return Variant::NoParallelAtrous;
  if (name == "no_dense_atrous") return Variant::NoDenseAtrous;
  fail("model: unknown variant '" + name + "'");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoGcn: return "no_gcn";
    case Variant::NoParallelAtrous: return "no_parallel_atrous";
    case Variant::NoDenseAtrous: return "no_dense_atrous";
  }
  fail("model: bad variant value");
}

std::size_t ModelConfig::scaled(std::size_t base) const {
  const auto s = static_cast<std::size_t>(
      std::llround(static_cast<double>(base) * width_mult));
  return std::max<std::size_t>(1, s);
}

Model::Model(const ModelConfig& config, std::uint64_t seed)
    : config_(config) {
  Rng rng(seed);
  graph_channels_ = config.scaled(256);

  if (config.variant != Variant::NoGcn) {
    GcnStreamConfig gc;
    gc.input_channels = config.input_channels;
    gc.hidden = config.scaled(128);
    gc.output = graph_channels_;
    gc.leaky_slope = config.leaky_slope;
    gc.separate_similarity = config.gcn_separate_similarity;
    gcn_ = std::make_unique<GcnStream>(params_, gc, rng);
  }

  CnnStreamConfig cc;
  cc.input_channels = config.input_channels;
  cc.stem = config.scaled(64);
  cc.growth = config.scaled(64);
  cc.tap = config.scaled(256);
  cc.branch = config.scaled(64);
  cc.leaky_slope = config.leaky_slope;
  cc.dense_atrous = config.variant != Variant::NoDenseAtrous;
  cc.parallel_atrous = config.variant != Variant::NoParallelAtrous;
  cnn_ = std::make_unique<CnnStream>(params_, cc, rng);

  DecoderConfig dc;
  dc.high_channels = cc.tap;
  dc.low_channels = cc.tap;
  dc.graph_channels = graph_channels_;
  dc.fusion = config.scaled(256);
  dc.restore = config.scaled(128);
  dc.classes = config.classes;
  dc.leaky_slope = config.leaky_slope;
  decoder_ = std::make_unique<Decoder>(params_, dc, rng);
}

Tensor Model::forward_logits(const Tensor& image,
                             const PixelGraph& graph) const {
  require(image.ndim() == 3 && image.dim(0) == config_.input_channels,
          "model: image must be [C,H,W]");
  const std::size_t h = image.dim(1), w = image.dim(2);
  require(h == graph.spmap.height && w == graph.spmap.width,
          "model: superpixel map does not match image extents");

  EncoderTaps taps =
      cnn_->forward(reshape(image, {1, image.dim(0), h, w}));
  Tensor up = decoder_->block1_upsample(taps.high);
  Tensor fused = decoder_->block2_fuse(up, taps.low);
  Tensor restored = decoder_->block3_restore(fused);

  Tensor graph_raster;
  if (gcn_) {
    graph_raster =
        reshape(gcn_->forward(image, graph), {1, graph_channels_, h, w});
  } else {
    graph_raster = Tensor::zeros({1, graph_channels_, h, w});
  }
  Tensor logits = decoder_->block4_logits(restored, graph_raster);
  return reshape(logits, {config_.classes, h, w});
}

Tensor Model::forward_probs(const Tensor& image,
                            const PixelGraph& graph) const {
  return softmax_channels(forward_logits(image, graph));
}

std::unique_ptr<Model> build_model(const ModelConfig& config,
                                   std::uint64_t seed) {
  return std::make_unique<Model>(config, seed);
}

}  // namespace rsinet
