#include <doctest.h>

#include <cmath>
#include <queue>
#include <set>

#include "rsinet/ops.hpp"
#include "rsinet/superpixel.hpp"
#include "test_util.hpp"

using namespace rsinet;
using testutil::random_tensor;

namespace {

// Independent flood-fill: number of 4-connected components per label.
bool regions_connected(const SuperpixelMap& m) {
  std::vector<char> seen(m.labels.size(), 0);
  std::vector<int> components(m.region_count, 0);
  for (std::size_t start = 0; start < m.labels.size(); ++start) {
    if (seen[start]) continue;
    const int32_t lab = m.labels[start];
    ++components[lab];
    std::queue<std::size_t> q;
    q.push(start);
    seen[start] = 1;
    while (!q.empty()) {
      const std::size_t p = q.front();
      q.pop();
      const std::size_t y = p / m.width, x = p % m.width;
      const std::size_t nb[4][2] = {{y, x + 1},
                                    {y, x ? x - 1 : m.width},
                                    {y + 1, x},
                                    {y ? y - 1 : m.height, x}};
      for (auto& [ny, nx] : nb) {
        if (ny >= m.height || nx >= m.width) continue;
        const std::size_t np = ny * m.width + nx;
        if (!seen[np] && m.labels[np] == lab) {
          seen[np] = 1;
          q.push(np);
        }
      }
    }
  }
  for (int c : components)
    if (c != 1) return false;
  return true;
}

SuperpixelMap map_from(std::vector<int32_t> labels, std::size_t h,
                       std::size_t w) {
  SuperpixelMap m;
  m.labels = std::move(labels);
  m.height = h;
  m.width = w;
  int32_t mx = -1;
  for (int32_t l : m.labels) mx = std::max(mx, l);
  m.region_count = static_cast<std::size_t>(mx + 1);
  return m;
}

}  // namespace

TEST_CASE("slic with target size H*W yields a single region") {
  Rng rng(1);
  Tensor img = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
  SuperpixelMap m = slic(img, 64);
  CHECK(m.region_count == 1);
  for (int32_t l : m.labels) CHECK(l == 0);
}

TEST_CASE("two flat tones never share a region") {
  Tensor img = Tensor::zeros({3, 64, 64});
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 32; x < 64; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.values()[(c * 64 + y) * 64 + x] = 1.0;
  SuperpixelMap m = slic(img, 512);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      // A region on the dark side must not appear on the bright side.
      for (std::size_t x2 = 32; x2 < 64; ++x2)
        if (x < 32) CHECK(m.at(y, x) != m.at(y, x2));
    }
}

TEST_CASE("slic partitions are exact and connected on noise images") {
  Rng rng(42);
  for (int rep = 0; rep < 8; ++rep) {
    Tensor img = random_tensor({3, 128, 128}, rng, 0.0, 1.0);
    SuperpixelMap m = slic(img, 100);
    REQUIRE(m.labels.size() == 128 * 128);
    auto sizes = m.region_sizes();
    std::size_t covered = 0;
    for (std::size_t s : sizes) {
      CHECK(s > 0);
      covered += s;
    }
    CHECK(covered == 128 * 128);
    CHECK(regions_connected(m));
  }
}

TEST_CASE("region count stays within 20% of the target on smooth scenes") {
  Rng rng(43);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor img = testutil::smooth_scene(128, rng);
    SuperpixelMap m = slic(img, 100);
    CHECK(regions_connected(m));
    const double target = 128.0 * 128.0 / 100.0;
    CHECK(m.region_count >= static_cast<std::size_t>(target * 0.8));
    CHECK(m.region_count <= static_cast<std::size_t>(target * 1.2) + 1);
  }
}

TEST_CASE("slic is deterministic") {
  Rng rng(7);
  Tensor img = random_tensor({3, 64, 64}, rng, 0.0, 1.0);
  SuperpixelMap a = slic(img, 100);
  SuperpixelMap b = slic(img, 100);
  CHECK(a.labels == b.labels);
  CHECK(a.region_count == b.region_count);
}

TEST_CASE("association matrix rows and normalization") {
  SuperpixelMap m = map_from({0, 0, 1, 1}, 2, 2);
  PixelGraph g = build_pixel_graph(m);
  Tensor q = g.dense_q();
  CHECK(q.shape() == Shape{4, 2});
  CHECK(q.values() == std::vector<double>{1, 0, 1, 0, 0, 1, 0, 1});

  Rng rng(13);
  Tensor img = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
  PixelGraph gr = build_pixel_graph(slic(img, 16));
  Tensor qr = gr.dense_q();
  for (std::size_t i = 0; i < qr.dim(0); ++i) {
    double row = 0;
    for (std::size_t j = 0; j < qr.dim(1); ++j)
      row += qr.values()[i * qr.dim(1) + j];
    CHECK(row == 1.0);
  }
  Tensor qn = gr.dense_q_norm();
  for (std::size_t j = 0; j < qn.dim(1); ++j) {
    double col = 0;
    for (std::size_t i = 0; i < qn.dim(0); ++i)
      col += qn.values()[i * qn.dim(1) + j];
    CHECK(col == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("graph encode reference values and loop oracle") {
  Tensor c = Tensor::full({2, 3, 3}, 0.7);
  SuperpixelMap mc = map_from({0, 0, 1, 0, 2, 1, 2, 2, 1}, 3, 3);
  PixelGraph gc = build_pixel_graph(mc);
  Tensor vc = graph_encode(c, gc);
  CHECK(vc.shape() == Shape{3, 2});
  for (double v : vc.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));

  Tensor img = Tensor::from_data({1, 2, 2}, {1, 3, 5, 7});
  SuperpixelMap m = map_from({0, 0, 1, 1}, 2, 2);
  PixelGraph g = build_pixel_graph(m);
  Tensor v = graph_encode(img, g);
  CHECK(v.values() == std::vector<double>{2, 6});

  Rng rng(29);
  Tensor r = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
  PixelGraph gr = build_pixel_graph(slic(r, 20));
  Tensor vr = graph_encode(r, gr);
  for (std::size_t j = 0; j < gr.region_count(); ++j)
    for (std::size_t ch = 0; ch < 3; ++ch) {
      double acc = 0;
      std::size_t n = 0;
      for (std::size_t p = 0; p < 256; ++p)
        if (gr.spmap.labels[p] == static_cast<int32_t>(j)) {
          acc += r.values()[ch * 256 + p];
          ++n;
        }
      CHECK(vr.values()[j * 3 + ch] ==
            doctest::Approx(acc / n).epsilon(1e-12));
    }
}

TEST_CASE("adjacency of a 2x2 block grid") {
  std::vector<int32_t> labels(16);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      labels[y * 4 + x] = static_cast<int32_t>((y / 2) * 2 + x / 2);
  PixelGraph g = build_pixel_graph(map_from(labels, 4, 4));
  std::set<std::pair<int, int>> edges;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (g.adjacency[i * 4 + j]) edges.insert({i, j});
  std::set<std::pair<int, int>> want = {{0, 1}, {1, 0}, {0, 2}, {2, 0},
                                        {1, 3}, {3, 1}, {2, 3}, {3, 2}};
  CHECK(edges == want);

  SuperpixelMap single = map_from({0}, 1, 1);
  PixelGraph gs = build_pixel_graph(single);
  CHECK(gs.adjacency == std::vector<std::uint8_t>{0});
}

TEST_CASE("adjacency is symmetric with zero diagonal on random maps") {
  Rng rng(37);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor img = random_tensor({3, 24, 24}, rng, 0.0, 1.0);
    PixelGraph g = build_pixel_graph(slic(img, 36));
    const std::size_t z = g.region_count();
    for (std::size_t i = 0; i < z; ++i) {
      CHECK(g.adjacency[i * z + i] == 0);
      for (std::size_t j = 0; j < z; ++j)
        CHECK(g.adjacency[i * z + j] == g.adjacency[j * z + i]);
    }
  }
}

TEST_CASE("graph decode assignment and projector properties") {
  SuperpixelMap m = map_from({0, 0, 1, 1}, 2, 2);
  PixelGraph g = build_pixel_graph(m);
  Tensor v = Tensor::from_data({2, 1}, {2, 6});
  Tensor raster = graph_decode(v, g);
  CHECK(raster.shape() == Shape{1, 2, 2});
  CHECK(raster.values() == std::vector<double>{2, 2, 6, 6});

  // decode(encode(constant)) is the constant image.
  Tensor c = Tensor::full({3, 6, 6}, 0.4);
  Rng rng(53);
  Tensor noise = random_tensor({3, 6, 6}, rng, 0.0, 1.0);
  PixelGraph gn = build_pixel_graph(slic(noise, 9));
  Tensor back = graph_decode(graph_encode(c, gn), gn);
  for (double val : back.values())
    CHECK(val == doctest::Approx(0.4).epsilon(1e-14));

  // P = decode . encode is idempotent.
  Tensor x = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
  PixelGraph gx = build_pixel_graph(slic(x, 25));
  Tensor px = graph_decode(graph_encode(x, gx), gx);
  Tensor ppx = graph_decode(graph_encode(px, gx), gx);
  for (std::size_t i = 0; i < px.size(); ++i)
    CHECK(std::fabs(px.values()[i] - ppx.values()[i]) <= 1e-12);

  // encode . decode is the identity on node features.
  Tensor nodes = random_tensor({gx.region_count(), 4}, rng);
  Tensor round = graph_encode(graph_decode(nodes, gx), gx);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    CHECK(std::fabs(nodes.values()[i] - round.values()[i]) <= 1e-12);
}

TEST_CASE("encode and decode pass finite-difference checks") {
  Rng rng(59);
  Tensor img = random_tensor({2, 8, 8}, rng, 0.0, 1.0);
  PixelGraph g = build_pixel_graph(slic(img, 16));
  Tensor x = random_tensor({2, 8, 8}, rng);
  CHECK(testutil::fd_max_rel_error(
            [&] {
              Tensor v = graph_encode(x, g);
              return sum_all(mul(v, v));
            },
            x) <= 1e-4);
  Tensor nodes = random_tensor({g.region_count(), 3}, rng);
  CHECK(testutil::fd_max_rel_error(
            [&] {
              Tensor r = graph_decode(nodes, g);
              return sum_all(mul(r, r));
            },
            nodes) <= 1e-4);
}
