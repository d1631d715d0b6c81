#include <benchmark/benchmark.h>

#include "rsinet/gcn.hpp"
#include "rsinet/nn.hpp"
#include "rsinet/ops.hpp"
#include "rsinet/superpixel.hpp"

using namespace rsinet;

static void BM_Conv2d(benchmark::State& state) {
  const std::size_t hw = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  ParamRegistry reg;
  auto conv = make_conv(reg, "c", 32, 32, 3, 1, 1, 1, rng);
  Tensor x = Tensor::zeros({1, 32, hw, hw});
  for (auto& v : x.values()) v = 0.5;
  for (auto _ : state) {
    Tensor y = conv2d(x, conv);
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_Conv2d)->Arg(32)->Arg(64);

static void BM_Slic(benchmark::State& state) {
  const std::size_t hw = static_cast<std::size_t>(state.range(0));
  Tensor img = Tensor::zeros({3, hw, hw});
  auto& v = img.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = (i % 97) / 97.0;
  for (auto _ : state) {
    auto map = slic(img, 100, SlicOptions{});
    benchmark::DoNotOptimize(map.labels.data());
  }
}
BENCHMARK(BM_Slic)->Arg(64)->Arg(128);

static void BM_GcnLayer(benchmark::State& state) {
  const std::size_t z = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  Tensor h = Tensor::zeros({z, 128});
  glorot_init(h, 128, 128, rng);
  Tensor w = Tensor::zeros({128, 128});
  glorot_init(w, 128, 128, rng);
  Tensor mask = Tensor::full({z, z}, 1.0);
  for (std::size_t i = 0; i < z; ++i) mask.values()[i * z + i] = 0.0;
  for (auto _ : state) {
    Tensor hn = normalize_rows(h);
    Tensor a = learned_adjacency(hn, w, mask);
    Tensor na = normalize_adjacency(a);
    GcnLayerParams p{w, Activation::LeakyRelu};
    Tensor out = gcn_layer(h, p, na, 0.01);
    benchmark::DoNotOptimize(out.values().data());
  }
}
BENCHMARK(BM_GcnLayer)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
