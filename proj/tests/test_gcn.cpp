#include <doctest.h>

#include <cmath>

#include "rsinet/gcn.hpp"
#include "rsinet/ops.hpp"
#include "rsinet/superpixel.hpp"
#include "test_util.hpp"

using namespace rsinet;
using testutil::random_tensor;

namespace {

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Largest-magnitude eigenvalue by power iteration on B = A + shift*I,
// shifted to make the dominant eigenvalue the largest algebraic one.
double spectral_radius(const Tensor& a) {
  const std::size_t n = a.dim(0);
  const double shift = 2.0;
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double lambda = 0.0;
  for (int it = 0; it < 3000; ++it) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        w[i] += (a.values()[i * n + j] + (i == j ? shift : 0.0)) * v[j];
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    lambda = norm;
  }
  return std::fabs(lambda - shift);
}

PixelGraph toy_graph(std::size_t hw, std::size_t target, Rng& rng) {
  Tensor img = random_tensor({3, hw, hw}, rng, 0.0, 1.0);
  return build_pixel_graph(slic(img, target));
}

}  // namespace

TEST_CASE("learned adjacency with an all-zero mask is the identity") {
  Rng rng(3);
  Tensor h = normalize_rows(random_tensor({5, 4}, rng));
  Tensor w = random_tensor({4, 4}, rng);
  Tensor a = learned_adjacency(h, w, Tensor::zeros({5, 5}));
  CHECK(a.values() == Tensor::identity(5).values());
}

TEST_CASE("learned adjacency symmetry, unit diagonal and entry oracle") {
  Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t z = 2 + rep % 7;
    Tensor h = normalize_rows(random_tensor({z, 6}, rng));
    Tensor w = random_tensor({6, 6}, rng);
    Tensor mask = Tensor::zeros({z, z});
    std::uniform_int_distribution<int> coin(0, 1);
    for (std::size_t i = 0; i < z; ++i)
      for (std::size_t j = i + 1; j < z; ++j) {
        const double m = coin(rng);
        mask.values()[i * z + j] = m;
        mask.values()[j * z + i] = m;
      }
    Tensor a = learned_adjacency(h, w, mask);
    Tensor e = matmul(h, w);
    for (std::size_t i = 0; i < z; ++i) {
      CHECK(a.values()[i * z + i] == 1.0);
      for (std::size_t j = 0; j < z; ++j) {
        CHECK(a.values()[i * z + j] == a.values()[j * z + i]);
        if (i != j) {
          double dotp = 0.0;
          for (std::size_t k = 0; k < 6; ++k)
            dotp += e.values()[i * 6 + k] * e.values()[j * 6 + k];
          const double want = mask.values()[i * z + j] * sigmoid_ref(dotp);
          CHECK(std::fabs(a.values()[i * z + j] - want) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("adjacency normalization reference cases") {
  Tensor i3 = Tensor::identity(3);
  CHECK(normalize_adjacency(i3).values() == i3.values());

  Tensor swap = Tensor::from_data({2, 2}, {0, 1, 1, 0});
  Tensor ns = normalize_adjacency(swap);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(ns.values()[i] == doctest::Approx(swap.values()[i]).epsilon(1e-14));
}

TEST_CASE("normalized adjacency spectral radius stays at or below one") {
  Rng rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t z = 2 + rep % 11;  // up to 12 nodes
    Tensor h = normalize_rows(random_tensor({z, 5}, rng));
    Tensor w = random_tensor({5, 5}, rng);
    Tensor mask = Tensor::zeros({z, z});
    std::uniform_int_distribution<int> coin(0, 1);
    for (std::size_t i = 0; i < z; ++i)
      for (std::size_t j = i + 1; j < z; ++j) {
        const double m = coin(rng);
        mask.values()[i * z + j] = m;
        mask.values()[j * z + i] = m;
      }
    Tensor na = normalize_adjacency(learned_adjacency(h, w, mask));
    CHECK(spectral_radius(na) <= 1.0 + 1e-8);
  }
}

TEST_CASE("gcn layer reference behaviors") {
  Rng rng(17);
  Tensor h = random_tensor({4, 3}, rng);

  GcnLayerParams zero{Tensor::zeros({3, 3}), Activation::LeakyRelu};
  Tensor out = gcn_layer(h, zero, Tensor::identity(4));
  for (double v : out.values()) CHECK(v == 0.0);

  GcnLayerParams ident{Tensor::identity(3), Activation::Linear};
  Tensor same = gcn_layer(h, ident, Tensor::identity(4));
  for (std::size_t i = 0; i < h.size(); ++i)
    CHECK(same.values()[i] == doctest::Approx(h.values()[i]).epsilon(1e-14));
}

TEST_CASE("gcn layer weight gradient matches finite differences") {
  Rng rng(19);
  Tensor h = random_tensor({4, 3}, rng);
  Tensor w = random_tensor({3, 3}, rng);
  Tensor mask = Tensor::from_data(
      {4, 4}, {0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0});
  auto loss = [&] {
    Tensor hn = normalize_rows(h);
    Tensor na = normalize_adjacency(learned_adjacency(hn, w, mask));
    Tensor out = gcn_layer(h, GcnLayerParams{w, Activation::LeakyRelu}, na);
    return sum_all(mul(out, out));
  };
  CHECK(testutil::fd_max_rel_error(loss, w) <= 1e-4);
}

TEST_CASE("gcn stream output shape contract") {
  Rng rng(23);
  ParamRegistry reg;
  GcnStreamConfig cfg;
  cfg.hidden = 8;
  cfg.output = 16;
  GcnStream stream(reg, cfg, rng);
  Tensor img = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
  PixelGraph g = build_pixel_graph(slic(img, 16));
  Tensor out = stream.forward(img, g);
  CHECK(out.shape() == Shape{16, 16, 16});
}

TEST_CASE("single-node stream matches the hand-unrolled pipeline") {
  Rng rng(29);
  ParamRegistry reg;
  GcnStreamConfig cfg;
  cfg.hidden = 4;
  cfg.output = 5;
  GcnStream stream(reg, cfg, rng);
  Tensor img = random_tensor({3, 4, 4}, rng, 0.0, 1.0);
  PixelGraph g = build_pixel_graph(slic(img, 16));
  REQUIRE(g.region_count() == 1);
  Tensor out = stream.forward(img, g);

  // With Z=1: adjacency = [1] before and after normalization, so the
  // stream reduces to two dense layers on the projected global mean.
  Tensor node = graph_encode(img, g);
  Tensor h0 = leaky_relu(
      dense_linear(node, reg.find("gcn.proj.weight"), reg.find("gcn.proj.bias")),
      0.01);
  Tensor h1 = leaky_relu(matmul(h0, reg.find("gcn.layer1.weight")), 0.01);
  Tensor h2 = leaky_relu(matmul(h1, reg.find("gcn.layer2.weight")), 0.01);
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t p = 0; p < 16; ++p)
      CHECK(out.values()[c * 16 + p] ==
            doctest::Approx(h2.values()[c]).epsilon(1e-12));
}

TEST_CASE("whole stream passes a finite-difference gradient check") {
  Rng rng(31);
  ParamRegistry reg;
  GcnStreamConfig cfg;
  cfg.hidden = 4;
  cfg.output = 3;
  GcnStream stream(reg, cfg, rng);
  Tensor img = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
  PixelGraph g = build_pixel_graph(slic(img, 16));
  REQUIRE(g.region_count() >= 2);
  for (const auto& [name, param] : reg.entries()) {
    CAPTURE(name);
    CHECK(testutil::fd_max_rel_error(
              [&] {
                Tensor out = stream.forward(img, g);
                return sum_all(mul(out, out));
              },
              param) <= 1e-4);
  }
}

TEST_CASE("stream output is equivariant to node relabeling") {
  // Relabeling superpixels permutes nodes; pixel output must not change.
  Rng rng(37);
  ParamRegistry reg;
  GcnStreamConfig cfg;
  cfg.hidden = 4;
  cfg.output = 3;
  GcnStream stream(reg, cfg, rng);
  Tensor img = random_tensor({3, 6, 6}, rng, 0.0, 1.0);
  PixelGraph g = build_pixel_graph(slic(img, 6));
  const std::size_t z = g.region_count();
  REQUIRE(z >= 2);
  REQUIRE(z <= 6);
  Tensor base = stream.forward(img, g);

  SuperpixelMap perm = g.spmap;
  std::vector<int32_t> relabel(z);
  for (std::size_t i = 0; i < z; ++i)
    relabel[i] = static_cast<int32_t>((i + 1) % z);
  for (int32_t& l : perm.labels) l = relabel[static_cast<std::size_t>(l)];
  PixelGraph gp = build_pixel_graph(perm);
  Tensor permuted = stream.forward(img, gp);
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(std::fabs(base.values()[i] - permuted.values()[i]) <= 1e-10);
}

TEST_CASE("separate similarity embedding changes the adjacency weights") {
  Rng rng(41);
  ParamRegistry reg;
  GcnStreamConfig cfg;
  cfg.hidden = 4;
  cfg.output = 3;
  cfg.separate_similarity = true;
  GcnStream stream(reg, cfg, rng);
  CHECK(reg.find("gcn.layer1.sim_weight").defined());
  CHECK(reg.find("gcn.layer2.sim_weight").defined());
  Tensor img = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
  PixelGraph g = build_pixel_graph(slic(img, 16));
  Tensor out = stream.forward(img, g);
  CHECK(out.shape() == Shape{3, 8, 8});
}
