#pragma once

#include <memory>
#include <string>

#include "rsinet/cnn.hpp"
#include "rsinet/decoder.hpp"
#include "rsinet/gcn.hpp"
#include "rsinet/nn.hpp"
#include "rsinet/superpixel.hpp"

namespace rsinet {

enum class Variant { Full, NoGcn, NoParallelAtrous, NoDenseAtrous };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct ModelConfig {
  Variant variant = Variant::Full;
  double width_mult = 1.0;
  std::size_t classes = 6;
  std::size_t input_channels = 3;
  double leaky_slope = 0.01;
  bool gcn_separate_similarity = false;

  std::size_t scaled(std::size_t base) const;
};

// The two-stream network: CNN taps + optional GCN raster into the fused
// decoder. The no_gcn variant keeps the Block-4 graph input slot and
// feeds a zero raster, so its classifier weights are shape-compatible
// with the full variant.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  // image: [C,H,W]; graph must match the image extents.
  Tensor forward_logits(const Tensor& image, const PixelGraph& graph) const;
  Tensor forward_probs(const Tensor& image, const PixelGraph& graph) const;

  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }
  const ModelConfig& config() const { return config_; }
  std::size_t graph_channels() const { return graph_channels_; }

 private:
  ModelConfig config_;
  ParamRegistry params_;
  std::size_t graph_channels_ = 0;
  std::unique_ptr<GcnStream> gcn_;
  std::unique_ptr<CnnStream> cnn_;
  std::unique_ptr<Decoder> decoder_;
};

std::unique_ptr<Model> build_model(const ModelConfig& config,
                                   std::uint64_t seed);

}  // namespace rsinet
