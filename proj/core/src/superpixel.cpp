#include "rsinet/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace rsinet {

std::vector<std::size_t> SuperpixelMap::region_sizes() const {
  std::vector<std::size_t> sizes(region_count, 0);
  for (int32_t l : labels) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

namespace {

struct Cluster {
  double cy = 0.0, cx = 0.0;
  std::vector<double> mean;  // per channel
};

// Connected-component relabel (4-connectivity), returns component count.
std::size_t relabel_components(std::vector<int32_t>& labels, std::size_t h,
                               std::size_t w) {
  std::vector<int32_t> out(labels.size(), -1);
  std::vector<std::size_t> stack;
  int32_t next = 0;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (out[start] >= 0) continue;
    const int32_t src = labels[start];
    out[start] = next;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t y = p / w, x = p % w;
      const std::size_t nbrs[4] = {p >= w ? p - w : p,
                                   p + w < labels.size() ? p + w : p,
                                   x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p};
      (void)y;
      for (std::size_t q : nbrs) {
        if (q != p && out[q] < 0 && labels[q] == src) {
          out[q] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
  }
  labels = std::move(out);
  return static_cast<std::size_t>(next);
}

// One merge pass: relabels components, then folds every region flagged by
// `must_merge` into the neighbor sharing the longest boundary. Returns
// true when any merge happened. The predicate sees the fresh component
// ids and their sizes.
template <typename Pred>
bool merge_pass(std::vector<int32_t>& labels, std::size_t h, std::size_t w,
                Pred must_merge) {
  {
    std::size_t z = relabel_components(labels, h, w);
    if (z <= 1) return false;
    std::vector<std::size_t> sizes(z, 0);
    for (int32_t l : labels) ++sizes[static_cast<std::size_t>(l)];

    // Shared-boundary lengths between region pairs.
    std::map<std::pair<int32_t, int32_t>, std::size_t> boundary;
    auto touch = [&](int32_t a, int32_t b) {
      if (a == b) return;
      boundary[{std::min(a, b), std::max(a, b)}]++;
    };
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        if (x + 1 < w) touch(labels[y * w + x], labels[y * w + x + 1]);
        if (y + 1 < h) touch(labels[y * w + x], labels[(y + 1) * w + x]);
      }

    // Best (longest-boundary, lowest-index tie) neighbor per region.
    std::vector<std::size_t> best_len(z, 0);
    std::vector<int32_t> best(z, -1);
    for (const auto& [pair, len] : boundary) {
      auto consider = [&](int32_t r, int32_t o) {
        auto ri = static_cast<std::size_t>(r);
        if (len > best_len[ri] ||
            (len == best_len[ri] && (best[ri] < 0 || o < best[ri]))) {
          best_len[ri] = len;
          best[ri] = o;
        }
      };
      consider(pair.first, pair.second);
      consider(pair.second, pair.first);
    }

    // Union-find keeps concurrent merges cycle-free.
    std::vector<int32_t> parent(z);
    for (std::size_t i = 0; i < z; ++i) parent[i] = static_cast<int32_t>(i);
    auto find = [&](int32_t a) {
      while (parent[static_cast<std::size_t>(a)] != a) {
        parent[static_cast<std::size_t>(a)] =
            parent[static_cast<std::size_t>(
                parent[static_cast<std::size_t>(a)])];
        a = parent[static_cast<std::size_t>(a)];
      }
      return a;
    };
    bool changed = false;
    for (std::size_t r = 0; r < z; ++r) {
      if (!must_merge(r, sizes[r]) || best[r] < 0) continue;
      const int32_t a = find(static_cast<int32_t>(r));
      const int32_t b = find(best[r]);
      if (a == b) continue;
      parent[static_cast<std::size_t>(a)] = b;
      changed = true;
    }
    if (!changed) return false;
    for (int32_t& l : labels) l = find(l);
    return true;
  }
}

void absorb_small_regions(std::vector<int32_t>& labels, std::size_t h,
                          std::size_t w, std::size_t min_size) {
  while (merge_pass(labels, h, w, [min_size](std::size_t, std::size_t size) {
    return size < min_size;
  })) {
  }
}

// Keeps one component per cluster: every component lacking a pixel of its
// cluster's largest component is folded into a neighbor, mirroring the
// classic SLIC connectivity enforcement.
void enforce_one_component_per_cluster(std::vector<int32_t>& labels,
                                       std::size_t h, std::size_t w) {
  const std::vector<int32_t> cluster_of = labels;
  std::vector<int32_t> comps = labels;
  const std::size_t z = relabel_components(comps, h, w);
  std::vector<std::size_t> comp_size(z, 0);
  std::vector<int32_t> comp_cluster(z, -1);
  for (std::size_t p = 0; p < comps.size(); ++p) {
    const auto cmp = static_cast<std::size_t>(comps[p]);
    ++comp_size[cmp];
    comp_cluster[cmp] = cluster_of[p];
  }
  int32_t max_cluster = -1;
  for (int32_t cl : comp_cluster) max_cluster = std::max(max_cluster, cl);
  std::vector<int32_t> largest(static_cast<std::size_t>(max_cluster) + 1, -1);
  for (std::size_t cmp = 0; cmp < z; ++cmp) {
    auto& slot = largest[static_cast<std::size_t>(comp_cluster[cmp])];
    if (slot < 0 || comp_size[cmp] > comp_size[static_cast<std::size_t>(slot)])
      slot = static_cast<int32_t>(cmp);
  }
  // Anchor raster: pixels of each cluster's largest component.
  std::vector<char> anchor(comps.size(), 0);
  for (std::size_t p = 0; p < comps.size(); ++p)
    if (largest[static_cast<std::size_t>(cluster_of[p])] == comps[p])
      anchor[p] = 1;

  for (;;) {
    std::vector<int32_t> ids = labels;
    const std::size_t n = relabel_components(ids, h, w);
    std::vector<char> has_anchor(n, 0);
    for (std::size_t p = 0; p < ids.size(); ++p)
      if (anchor[p]) has_anchor[static_cast<std::size_t>(ids[p])] = 1;
    bool any = false;
    for (char a : has_anchor) any = any || !a;
    if (!any) return;
    if (!merge_pass(labels, h, w, [&](std::size_t r, std::size_t) {
          return !has_anchor[r];
        }))
      return;
  }
}

}  // namespace

SuperpixelMap slic(const Tensor& image, std::size_t target_region_size,
                   const SlicOptions& options) {
  require(image.ndim() == 3, "slic: image must be [C,H,W]");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  require(h >= 1 && w >= 1, "slic: degenerate image extents");
  require(target_region_size >= 1 && target_region_size <= h * w,
          "slic: target region size out of range");
  require(options.compactness > 0.0, "slic: compactness must be positive");

  const double step = std::sqrt(static_cast<double>(target_region_size));
  const std::size_t gy = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(h / step)));
  const std::size_t gx = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(w / step)));
  const double cell_h = static_cast<double>(h) / gy;
  const double cell_w = static_cast<double>(w) / gx;

  std::vector<Cluster> clusters(gy * gx);
  std::vector<int32_t> labels(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t iy = std::min<std::size_t>(gy - 1, y / cell_h);
      const std::size_t ix = std::min<std::size_t>(gx - 1, x / cell_w);
      labels[y * w + x] = static_cast<int32_t>(iy * gx + ix);
    }

  auto update_clusters = [&] {
    std::vector<std::size_t> counts(clusters.size(), 0);
    for (auto& cl : clusters) {
      cl.cy = cl.cx = 0.0;
      cl.mean.assign(c, 0.0);
    }
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        auto& cl = clusters[static_cast<std::size_t>(labels[y * w + x])];
        cl.cy += y;
        cl.cx += x;
        for (std::size_t k = 0; k < c; ++k)
          cl.mean[k] += image.data()[k * h * w + y * w + x];
        ++counts[static_cast<std::size_t>(labels[y * w + x])];
      }
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      if (!counts[i]) continue;
      clusters[i].cy /= counts[i];
      clusters[i].cx /= counts[i];
      for (double& m : clusters[i].mean) m /= counts[i];
    }
  };
  update_clusters();

  // Compactness follows the classic 8-bit intensity convention; channel
  // values live in [0,1], so the color term is rescaled to [0,255].
  constexpr double kColorScale = 255.0;
  const double spatial_weight = (options.compactness * options.compactness) /
                                (step * step) / (kColorScale * kColorScale);
  const std::size_t window = static_cast<std::size_t>(std::ceil(step)) + 1;
  std::vector<double> best(h * w);
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    std::fill(best.begin(), best.end(),
              std::numeric_limits<double>::infinity());
    // Scanning clusters in ascending index with a strict improvement test
    // makes the lowest index win distance ties.
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      const Cluster& cl = clusters[i];
      if (cl.mean.empty()) continue;
      const std::size_t y0 =
          cl.cy > static_cast<double>(window) ? static_cast<std::size_t>(cl.cy) - window : 0;
      const std::size_t y1 =
          std::min<std::size_t>(h, static_cast<std::size_t>(cl.cy) + window + 1);
      const std::size_t x0 =
          cl.cx > static_cast<double>(window) ? static_cast<std::size_t>(cl.cx) - window : 0;
      const std::size_t x1 =
          std::min<std::size_t>(w, static_cast<std::size_t>(cl.cx) + window + 1);
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) {
          double dc = 0.0;
          for (std::size_t k = 0; k < c; ++k) {
            const double d = image.data()[k * h * w + y * w + x] - cl.mean[k];
            dc += d * d;
          }
          const double dy = static_cast<double>(y) - cl.cy;
          const double dx = static_cast<double>(x) - cl.cx;
          const double dist = dc + spatial_weight * (dy * dy + dx * dx);
          if (dist < best[y * w + x]) {
            best[y * w + x] = dist;
            labels[y * w + x] = static_cast<int32_t>(i);
          }
        }
    }
    // Pixels outside every window keep their previous label.
    update_clusters();
  }

  enforce_one_component_per_cluster(labels, h, w);
  const std::size_t min_size =
      std::max<std::size_t>(1, target_region_size / options.absorb_divisor);
  absorb_small_regions(labels, h, w, min_size);

  SuperpixelMap map;
  map.height = h;
  map.width = w;
  map.region_count = relabel_components(labels, h, w);
  map.labels = std::move(labels);
  return map;
}

std::vector<std::uint8_t> adjacency_mask(const SuperpixelMap& spmap,
                                         bool eight_connected) {
  const std::size_t z = spmap.region_count;
  const std::size_t h = spmap.height, w = spmap.width;
  std::vector<std::uint8_t> mask(z * z, 0);
  auto link = [&](int32_t a, int32_t b) {
    if (a == b) return;
    mask[static_cast<std::size_t>(a) * z + static_cast<std::size_t>(b)] = 1;
    mask[static_cast<std::size_t>(b) * z + static_cast<std::size_t>(a)] = 1;
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const int32_t l = spmap.at(y, x);
      if (x + 1 < w) link(l, spmap.at(y, x + 1));
      if (y + 1 < h) link(l, spmap.at(y + 1, x));
      if (eight_connected && y + 1 < h) {
        if (x + 1 < w) link(l, spmap.at(y + 1, x + 1));
        if (x > 0) link(l, spmap.at(y + 1, x - 1));
      }
    }
  return mask;
}

PixelGraph build_pixel_graph(const SuperpixelMap& spmap,
                             bool eight_connected) {
  PixelGraph g;
  g.spmap = spmap;
  g.counts = spmap.region_sizes();
  for (std::size_t cnt : g.counts)
    require(cnt > 0, "pixel_graph: empty superpixel");
  g.adjacency = adjacency_mask(spmap, eight_connected);
  return g;
}

Tensor PixelGraph::dense_q() const {
  const std::size_t z = region_count();
  const std::size_t px = spmap.labels.size();
  std::vector<double> q(px * z, 0.0);
  for (std::size_t p = 0; p < px; ++p)
    q[p * z + static_cast<std::size_t>(spmap.labels[p])] = 1.0;
  return Tensor::from_data({px, z}, std::move(q));
}

Tensor PixelGraph::dense_q_norm() const {
  Tensor q = dense_q();
  const std::size_t z = region_count();
  for (std::size_t p = 0; p < spmap.labels.size(); ++p) {
    const auto l = static_cast<std::size_t>(spmap.labels[p]);
    q.data()[p * z + l] /= static_cast<double>(counts[l]);
  }
  return q;
}

Tensor PixelGraph::dense_mask() const {
  const std::size_t z = region_count();
  std::vector<double> m(adjacency.begin(), adjacency.end());
  return Tensor::from_data({z, z}, std::move(m));
}

Tensor graph_encode(const Tensor& image, const PixelGraph& graph) {
  require(image.ndim() == 3, "graph_encode: image must be [C,H,W]");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  require(h == graph.spmap.height && w == graph.spmap.width,
          "graph_encode: extent mismatch");
  const std::size_t z = graph.region_count();
  const auto* labels = graph.spmap.labels.data();
  const auto counts = graph.counts;

  std::vector<double> v(z * c, 0.0);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t p = 0; p < h * w; ++p)
      v[static_cast<std::size_t>(labels[p]) * c + k] +=
          image.data()[k * h * w + p];
  for (std::size_t j = 0; j < z; ++j)
    for (std::size_t k = 0; k < c; ++k)
      v[j * c + k] /= static_cast<double>(counts[j]);

  std::vector<int32_t> label_copy(graph.spmap.labels);
  Tensor r = Tensor::make_result(
      {z, c}, std::move(v), {image},
      [image, label_copy, counts, c, h, w](Tensor::Node& self) mutable {
        if (!image.tracked()) return;
        auto& g = image.grad();
        for (std::size_t k = 0; k < c; ++k)
          for (std::size_t p = 0; p < h * w; ++p) {
            const auto j = static_cast<std::size_t>(label_copy[p]);
            g[k * h * w + p] +=
                self.grad[j * c + k] / static_cast<double>(counts[j]);
          }
      });
  check_finite(r, "graph_encode");
  return r;
}

Tensor graph_decode(const Tensor& nodes, const PixelGraph& graph) {
  require(nodes.ndim() == 2, "graph_decode: nodes must be [Z,D]");
  require(nodes.dim(0) == graph.region_count(),
          "graph_decode: node count mismatch");
  const std::size_t z = nodes.dim(0), d = nodes.dim(1);
  const std::size_t h = graph.spmap.height, w = graph.spmap.width;
  const auto* labels = graph.spmap.labels.data();

  std::vector<double> out(d * h * w);
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t p = 0; p < h * w; ++p)
      out[k * h * w + p] =
          nodes.data()[static_cast<std::size_t>(labels[p]) * d + k];

  std::vector<int32_t> label_copy(graph.spmap.labels);
  Tensor r = Tensor::make_result(
      {d, h, w}, std::move(out), {nodes},
      [nodes, label_copy, z, d, h, w](Tensor::Node& self) mutable {
        (void)z;
        if (!nodes.tracked()) return;
        auto& g = nodes.grad();
        for (std::size_t k = 0; k < d; ++k)
          for (std::size_t p = 0; p < h * w; ++p)
            g[static_cast<std::size_t>(label_copy[p]) * d + k] +=
                self.grad[k * h * w + p];
      });
  check_finite(r, "graph_decode");
  return r;
}

}  // namespace rsinet
