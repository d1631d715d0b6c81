#include <doctest.h>

#include <cmath>

#include "rsinet/cnn.hpp"
#include "rsinet/ops.hpp"
#include "test_util.hpp"

using namespace rsinet;
using testutil::random_tensor;

TEST_CASE("dense atrous unit grows channels and keeps extents") {
  Rng rng(3);
  ParamRegistry reg;
  for (std::size_t rate : {1ul, 2ul, 3ul}) {
    DenseAtrousUnit unit;
    unit.conv = make_conv(reg, "u" + std::to_string(rate), 6, 4, 3, 1, rate,
                          rate, rng);
    unit.growth = 4;
    Tensor x = random_tensor({1, 6, 10, 10}, rng);
    Tensor y = dense_atrous_unit(x, unit);
    CHECK(y.shape() == Shape{1, 10, 10, 10});
    // Input passes through unchanged as the first slice.
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(y.values()[i] == x.values()[i]);
  }
}

TEST_CASE("impulse response support of one unit is 2r+1") {
  Rng rng(7);
  for (std::size_t rate : {1ul, 2ul, 3ul}) {
    ParamRegistry reg;
    DenseAtrousUnit unit;
    unit.conv = make_conv(reg, "u", 1, 1, 3, 1, rate, rate, rng);
    unit.growth = 1;
    // Bias would light up every output pixel; zero it for the support test.
    for (auto& v : unit.conv.bias.values()) v = 0.0;
    Tensor x = Tensor::zeros({1, 1, 15, 15});
    x.values()[7 * 15 + 7] = 1.0;
    Tensor y = dense_atrous_unit(x, unit);
    // Grown channel is the second slice.
    std::size_t min_y = 15, max_y = 0, min_x = 15, max_x = 0;
    for (std::size_t yy = 0; yy < 15; ++yy)
      for (std::size_t xx = 0; xx < 15; ++xx)
        if (std::fabs(y.values()[15 * 15 + yy * 15 + xx]) > 1e-12) {
          min_y = std::min(min_y, yy);
          max_y = std::max(max_y, yy);
          min_x = std::min(min_x, xx);
          max_x = std::max(max_x, xx);
        }
    CHECK(max_y - min_y + 1 == 2 * rate + 1);
    CHECK(max_x - min_x + 1 == 2 * rate + 1);
  }
}

TEST_CASE("parallel atrous block composition oracle") {
  Rng rng(11);
  ParamRegistry reg;
  ParallelAtrousBlock block(reg, "pab", 8, 4, rng);
  CHECK(block.out_channels() == 20);
  Tensor x = random_tensor({1, 8, 40, 40}, rng);
  Tensor y = block.forward(x);
  REQUIRE(y.shape() == Shape{1, 20, 40, 40});

  auto conv_of = [&](const std::string& name, std::size_t dilation,
                     std::size_t k) {
    ConvLayerParams p;
    p.weight = reg.find("pab." + name + ".weight");
    p.bias = reg.find("pab." + name + ".bias");
    p.stride = 1;
    p.dilation = dilation;
    p.padding = k == 1 ? 0 : dilation;
    return p;
  };
  Tensor point = leaky_relu(conv2d(x, conv_of("point", 1, 1)), 0.01);
  Tensor r6 = leaky_relu(conv2d(x, conv_of("rate6", 6, 3)), 0.01);
  Tensor r12 = leaky_relu(conv2d(x, conv_of("rate12", 12, 3)), 0.01);
  Tensor r18 = leaky_relu(conv2d(x, conv_of("rate18", 18, 3)), 0.01);
  Tensor pooled = leaky_relu(
      conv2d(global_avg_pool(x), conv_of("pool", 1, 1)), 0.01);
  Tensor image_branch = broadcast_spatial(pooled, 40, 40);
  Tensor want = concat_channels({point, r6, r12, r18, image_branch});
  REQUIRE(want.shape() == y.shape());
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(std::fabs(y.values()[i] - want.values()[i]) <= 1e-12);
}

TEST_CASE("image pooling branch of a constant input is constant") {
  Rng rng(13);
  ParamRegistry reg;
  ParallelAtrousBlock block(reg, "pab", 3, 2, rng);
  Tensor x = Tensor::full({1, 3, 24, 24}, 0.6);
  Tensor y = block.forward(x);
  // Last branch slice (channels 8 and 9) comes from image pooling.
  for (std::size_t c = 8; c < 10; ++c) {
    const double first = y.values()[c * 24 * 24];
    for (std::size_t p = 0; p < 24 * 24; ++p)
      CHECK(y.values()[c * 24 * 24 + p] == doctest::Approx(first).epsilon(1e-14));
  }
}

TEST_CASE("stream tap extents follow the 1/4 and 1/16 contract") {
  Rng rng(17);
  CnnStreamConfig cfg;
  cfg.stem = 4;
  cfg.growth = 4;
  cfg.tap = 8;
  cfg.branch = 4;
  ParamRegistry reg;
  CnnStream stream(reg, cfg, rng);
  Tensor x = random_tensor({1, 3, 64, 64}, rng, 0.0, 1.0);
  EncoderTaps taps = stream.forward(x);
  CHECK(taps.low.shape() == Shape{1, 8, 16, 16});
  CHECK(taps.high.shape() == Shape{1, 8, 4, 4});
  CHECK_THROWS(stream.forward(random_tensor({1, 3, 20, 20}, rng)));
}

TEST_CASE("full-width tap channels are 256") {
  Rng rng(19);
  CnnStreamConfig cfg;  // defaults: stem 64, growth 64, tap 256, branch 64
  ParamRegistry reg;
  CnnStream stream(reg, cfg, rng);
  Tensor x = random_tensor({1, 3, 32, 32}, rng, 0.0, 1.0);
  EncoderTaps taps = stream.forward(x);
  CHECK(taps.low.shape() == Shape{1, 256, 8, 8});
  CHECK(taps.high.shape() == Shape{1, 256, 2, 2});
}

TEST_CASE("variant streams change only the replaced stage") {
  Rng rng(23);
  CnnStreamConfig cfg;
  cfg.stem = 4;
  cfg.growth = 4;
  cfg.tap = 8;
  cfg.branch = 4;

  cfg.dense_atrous = false;
  ParamRegistry reg_a;
  CnnStream no_dense(reg_a, cfg, rng);
  CHECK(reg_a.find("cnn.plain_a.weight").defined());
  CHECK_FALSE(reg_a.find("cnn.dense_a.unit0.weight").defined());
  Tensor x = random_tensor({1, 3, 32, 32}, rng, 0.0, 1.0);
  EncoderTaps t1 = no_dense.forward(x);
  CHECK(t1.low.shape() == Shape{1, 8, 8, 8});
  CHECK(t1.high.shape() == Shape{1, 8, 2, 2});

  cfg.dense_atrous = true;
  cfg.parallel_atrous = false;
  ParamRegistry reg_b;
  CnnStream no_pab(reg_b, cfg, rng);
  CHECK(reg_b.find("cnn.plain_pab.weight").defined());
  CHECK_FALSE(reg_b.find("cnn.pab.point.weight").defined());
  EncoderTaps t2 = no_pab.forward(x);
  CHECK(t2.low.shape() == Shape{1, 8, 8, 8});
  CHECK(t2.high.shape() == Shape{1, 8, 2, 2});
}

TEST_CASE("loss from both taps reaches the stem weights") {
  Rng rng(29);
  CnnStreamConfig cfg;
  cfg.stem = 2;
  cfg.growth = 2;
  cfg.tap = 4;
  cfg.branch = 2;
  cfg.units_per_group = 2;
  ParamRegistry reg;
  CnnStream stream(reg, cfg, rng);
  Tensor x = random_tensor({1, 3, 32, 32}, rng, 0.0, 1.0);
  EncoderTaps taps = stream.forward(x);
  Tensor loss = add(sum_all(mul(taps.low, taps.low)),
                    sum_all(mul(taps.high, taps.high)));
  loss.backward();
  Tensor stem_w = reg.find("cnn.stem.weight");
  REQUIRE(stem_w.has_grad());
  double mx = 0.0;
  for (double g : stem_w.grad()) mx = std::max(mx, std::fabs(g));
  CHECK(mx > 0.0);
}

TEST_CASE("toy stream separates a two-tone input after its stem") {
  // 64x64 half-dark half-bright image: taps must differ between halves.
  Rng rng(31);
  CnnStreamConfig cfg;
  cfg.stem = 2;
  cfg.growth = 2;
  cfg.tap = 4;
  cfg.branch = 2;
  cfg.units_per_group = 2;
  ParamRegistry reg;
  CnnStream stream(reg, cfg, rng);
  Tensor x = Tensor::zeros({1, 3, 64, 64});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 64; ++y)
      for (std::size_t xx = 32; xx < 64; ++xx)
        x.values()[(c * 64 + y) * 64 + xx] = 1.0;
  EncoderTaps taps = stream.forward(x);
  double left = 0, right = 0;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t y = 0; y < 16; ++y) {
      for (std::size_t xx = 0; xx < 4; ++xx)
        left += taps.low.values()[(c * 16 + y) * 16 + xx];
      for (std::size_t xx = 12; xx < 16; ++xx)
        right += taps.low.values()[(c * 16 + y) * 16 + xx];
    }
  CHECK(std::fabs(left - right) > 1e-6);
}
