#pragma once

#include <memory>

#include "rsinet/nn.hpp"
#include "rsinet/ops.hpp"
#include "rsinet/tensor.hpp"

namespace rsinet {

// One densely connected atrous unit: output is concat(x, leaky(conv(x)))
// with a 3x3 same-size kernel (pad = dilation) adding `growth` channels.
struct DenseAtrousUnit {
  ConvLayerParams conv;
  std::size_t growth = 0;
};

Tensor dense_atrous_unit(const Tensor& x, const DenseAtrousUnit& unit,
                         double slope = 0.01);

// Five parallel branches: 1x1 conv, three 3x3 convs at rates 6/12/18, and
// image pooling (global average -> 1x1 conv -> spatial broadcast),
// concatenated in that order.
class ParallelAtrousBlock {
 public:
  ParallelAtrousBlock(ParamRegistry& reg, const std::string& prefix,
                      std::size_t in_ch, std::size_t branch_ch, Rng& rng);
  Tensor forward(const Tensor& x, double slope = 0.01) const;
  std::size_t out_channels() const { return 5 * branch_ch_; }

 private:
  std::size_t branch_ch_;
  ConvLayerParams point_, rate6_, rate12_, rate18_, pool_conv_;
};

struct EncoderTaps {
  Tensor low;   // [*, C, H/4, W/4]
  Tensor high;  // [*, C, H/16, W/16]
};

struct CnnStreamConfig {
  std::size_t input_channels = 3;
  std::size_t stem = 64;
  std::size_t growth = 64;
  std::size_t tap = 256;        // width of both taps
  std::size_t branch = 64;      // parallel-block branch width
  std::size_t units_per_group = 3;
  double leaky_slope = 0.01;
  bool dense_atrous = true;     // false: plain 3x3 convs replace the groups
  bool parallel_atrous = true;  // false: single 3x3 rate-1 conv instead
};

// Stem (stride 2) -> dense group A -> 1x1 reduce -> stride-2 conv (low tap
// at H/4) -> dense group B -> 1x1 reduce -> stride-2 conv (H/8) ->
// parallel atrous block -> 3x3 stride-2 conv -> 1x1 reduce (high tap at
// H/16). Dense unit rates cycle 1/2/3.
class CnnStream {
 public:
  CnnStream(ParamRegistry& reg, const CnnStreamConfig& config, Rng& rng);
  // image: [N,C,H,W], H and W divisible by 16.
  EncoderTaps forward(const Tensor& image) const;
  const CnnStreamConfig& config() const { return config_; }

 private:
  Tensor dense_group(const Tensor& x, int group) const;

  CnnStreamConfig config_;
  ConvLayerParams stem_;
  std::vector<DenseAtrousUnit> group_a_, group_b_;
  ConvLayerParams plain_a_, plain_b_;  // no_dense_atrous replacements
  ConvLayerParams reduce_a_, reduce_b_, reduce_c_;
  ConvLayerParams down_a_, down_b_, down_c_;
  std::unique_ptr<ParallelAtrousBlock> pab_;
  ConvLayerParams plain_pab_;
};

}  // namespace rsinet
