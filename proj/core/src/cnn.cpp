#include "rsinet/cnn.hpp"

namespace rsinet {

Tensor dense_atrous_unit(const Tensor& x, const DenseAtrousUnit& unit,
                         double slope) {
  require(unit.conv.padding == unit.conv.dilation,
          "dense_atrous_unit: requires same-size padding (pad = dilation)");
  Tensor fresh = leaky_relu(conv2d(x, unit.conv), slope);
  return concat_channels({x, fresh});
}

ParallelAtrousBlock::ParallelAtrousBlock(ParamRegistry& reg,
                                         const std::string& prefix,
                                         std::size_t in_ch,
                                         std::size_t branch_ch, Rng& rng)
    : branch_ch_(branch_ch) {
  point_ = make_conv(reg, prefix + ".point", in_ch, branch_ch, 1, 1, 1, 0, rng);
  rate6_ = make_conv(reg, prefix + ".rate6", in_ch, branch_ch, 3, 1, 6, 6, rng);
  rate12_ =
      make_conv(reg, prefix + ".rate12", in_ch, branch_ch, 3, 1, 12, 12, rng);
  rate18_ =
      make_conv(reg, prefix + ".rate18", in_ch, branch_ch, 3, 1, 18, 18, rng);
  pool_conv_ =
      make_conv(reg, prefix + ".pool", in_ch, branch_ch, 1, 1, 1, 0, rng);
}

Tensor ParallelAtrousBlock::forward(const Tensor& x, double slope) const {
  const std::size_t h = x.dim(2), w = x.dim(3);
  Tensor pooled = leaky_relu(conv2d(global_avg_pool(x), pool_conv_), slope);
  return concat_channels({
      leaky_relu(conv2d(x, point_), slope),
      leaky_relu(conv2d(x, rate6_), slope),
      leaky_relu(conv2d(x, rate12_), slope),
      leaky_relu(conv2d(x, rate18_), slope),
      broadcast_spatial(pooled, h, w),
  });
}

CnnStream::CnnStream(ParamRegistry& reg, const CnnStreamConfig& config,
                     Rng& rng)
    : config_(config) {
  const std::size_t tap = config.tap;
  stem_ = make_conv(reg, "cnn.stem", config.input_channels, config.stem, 3, 2,
                    1, 1, rng);

  auto build_group = [&](const std::string& prefix, std::size_t in_ch,
                         std::vector<DenseAtrousUnit>& units) {
    std::size_t c = in_ch;
    for (std::size_t u = 0; u < config.units_per_group; ++u) {
      const std::size_t rate = u % 3 + 1;
      DenseAtrousUnit unit;
      unit.growth = config.growth;
      unit.conv = make_conv(reg, prefix + ".unit" + std::to_string(u + 1),
                            c, config.growth, 3, 1, rate, rate, rng);
      units.push_back(unit);
      c += config.growth;
    }
    return c;
  };

  if (config.dense_atrous) {
    const std::size_t ca = build_group("cnn.dense_a", config.stem, group_a_);
    reduce_a_ = make_conv(reg, "cnn.reduce_a", ca, tap, 1, 1, 1, 0, rng);
    const std::size_t cb = build_group("cnn.dense_b", tap, group_b_);
    reduce_b_ = make_conv(reg, "cnn.reduce_b", cb, tap, 1, 1, 1, 0, rng);
  } else {
    plain_a_ = make_conv(reg, "cnn.plain_a", config.stem, tap, 3, 1, 1, 1, rng);
    plain_b_ = make_conv(reg, "cnn.plain_b", tap, tap, 3, 1, 1, 1, rng);
  }
  down_a_ = make_conv(reg, "cnn.down_a", tap, tap, 3, 2, 1, 1, rng);
  down_b_ = make_conv(reg, "cnn.down_b", tap, tap, 3, 2, 1, 1, rng);

  const std::size_t pab_out = 5 * config.branch;
  if (config.parallel_atrous) {
    pab_ = std::make_unique<ParallelAtrousBlock>(reg, "cnn.pab", tap,
                                                 config.branch, rng);
  } else {
    plain_pab_ = make_conv(reg, "cnn.plain_pab", tap, pab_out, 3, 1, 1, 1, rng);
  }
  down_c_ = make_conv(reg, "cnn.down_c", pab_out, pab_out, 3, 2, 1, 1, rng);
  reduce_c_ = make_conv(reg, "cnn.reduce_c", pab_out, tap, 1, 1, 1, 0, rng);
}

Tensor CnnStream::dense_group(const Tensor& x, int group) const {
  const double slope = config_.leaky_slope;
  if (!config_.dense_atrous)
    return leaky_relu(conv2d(x, group == 0 ? plain_a_ : plain_b_), slope);
  Tensor h = x;
  for (const DenseAtrousUnit& unit : (group == 0 ? group_a_ : group_b_))
    h = dense_atrous_unit(h, unit, slope);
  h = leaky_relu(conv2d(h, group == 0 ? reduce_a_ : reduce_b_), slope);
  return h;
}

EncoderTaps CnnStream::forward(const Tensor& image) const {
  require(image.ndim() == 4, "cnn_stream: input must be [N,C,H,W]");
  require(image.dim(2) % 16 == 0 && image.dim(3) % 16 == 0,
          "cnn_stream: extents must be divisible by 16");
  const double slope = config_.leaky_slope;

  Tensor h = leaky_relu(conv2d(image, stem_), slope);       // H/2
  h = dense_group(h, 0);
  EncoderTaps taps;
  taps.low = leaky_relu(conv2d(h, down_a_), slope);         // H/4
  h = dense_group(taps.low, 1);
  h = leaky_relu(conv2d(h, down_b_), slope);                // H/8
  h = config_.parallel_atrous ? pab_->forward(h, slope)
                              : leaky_relu(conv2d(h, plain_pab_), slope);
  h = leaky_relu(conv2d(h, down_c_), slope);                // H/16
  taps.high = leaky_relu(conv2d(h, reduce_c_), slope);
  return taps;
}

}  // namespace rsinet
