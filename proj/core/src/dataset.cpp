#include "rsinet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

namespace rsinet {

std::vector<Rgb> DatasetManifest::palette() const {
  std::vector<Rgb> p;
  for (const ClassDef& c : classes) p.push_back(c.color);
  return p;
}

std::vector<std::size_t> DatasetManifest::split(const std::string& which) const {
  if (which == "train" && !train_split.empty()) return train_split;
  if (which == "test" && !test_split.empty()) return test_split;
  if (which == "all" || (which == "train" && train_split.empty()) ||
      (which == "test" && test_split.empty())) {
    std::vector<std::size_t> all(pairs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  fail("manifest: unknown split '" + which + "'");
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "manifest: cannot open " + path);
  nlohmann::json j;
  in >> j;

  DatasetManifest m;
  m.name = j.at("name").get<std::string>();
  for (const auto& c : j.at("classes")) {
    ClassDef def;
    def.name = c.at("name").get<std::string>();
    const auto& col = c.at("color");
    require(col.size() == 3, "manifest: color must be [r,g,b]");
    for (int k = 0; k < 3; ++k)
      def.color[k] = static_cast<std::uint8_t>(col[k].get<int>());
    m.classes.push_back(def);
  }
  for (std::size_t i = 0; i < m.classes.size(); ++i)
    for (std::size_t k = i + 1; k < m.classes.size(); ++k)
      require(m.classes[i].color != m.classes[k].color,
              "manifest: duplicate palette color");
  if (j.contains("pairs"))
    for (const auto& p : j.at("pairs"))
      m.pairs.push_back({p.at("image").get<std::string>(),
                         p.at("label").get<std::string>()});
  if (j.contains("channel_order"))
    m.channel_order = j.at("channel_order").get<std::vector<std::size_t>>();
  if (j.contains("tile_size")) m.tile_size = j.at("tile_size").get<std::size_t>();
  if (j.contains("tile_stride"))
    m.tile_stride = j.at("tile_stride").get<std::size_t>();
  if (j.contains("ignore_index"))
    m.ignore_index = j.at("ignore_index").get<int32_t>();
  if (j.contains("splits")) {
    const auto& s = j.at("splits");
    if (s.contains("train"))
      m.train_split = s.at("train").get<std::vector<std::size_t>>();
    if (s.contains("test"))
      m.test_split = s.at("test").get<std::vector<std::size_t>>();
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  nlohmann::json j;
  j["name"] = m.name;
  for (const ClassDef& c : m.classes)
    j["classes"].push_back(
        {{"name", c.name}, {"color", {c.color[0], c.color[1], c.color[2]}}});
  for (const FilePair& p : m.pairs)
    j["pairs"].push_back({{"image", p.image}, {"label", p.label}});
  j["channel_order"] = m.channel_order;
  j["tile_size"] = m.tile_size;
  j["tile_stride"] = m.tile_stride;
  j["ignore_index"] = m.ignore_index;
  if (!m.train_split.empty()) j["splits"]["train"] = m.train_split;
  if (!m.test_split.empty()) j["splits"]["test"] = m.test_split;
  std::ofstream out(path);
  require(out.good(), "manifest: cannot write " + path);
  out << j.dump(2) << "\n";
}

std::vector<int32_t> decode_labels(const RasterImage& colors,
                                   const DatasetManifest& manifest,
                                   bool strict) {
  require(colors.channels >= 3 && colors.bit_depth == 8,
          "decode_labels: expects an 8-bit color raster");
  std::map<Rgb, int32_t> lookup;
  for (std::size_t i = 0; i < manifest.classes.size(); ++i)
    lookup[manifest.classes[i].color] = static_cast<int32_t>(i);

  std::vector<int32_t> out(colors.height * colors.width);
  for (std::size_t p = 0; p < out.size(); ++p) {
    Rgb c{static_cast<std::uint8_t>(colors.samples[p * colors.channels]),
          static_cast<std::uint8_t>(colors.samples[p * colors.channels + 1]),
          static_cast<std::uint8_t>(colors.samples[p * colors.channels + 2])};
    auto it = lookup.find(c);
    if (it != lookup.end()) {
      out[p] = it->second;
    } else {
      require(!strict, "decode_labels: unknown color in strict mode");
      out[p] = manifest.ignore_index;
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_labels(const std::vector<int32_t>& labels,
                                        const DatasetManifest& manifest) {
  std::vector<std::uint8_t> rgb(labels.size() * 3, 0);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] == manifest.ignore_index) continue;
    require(labels[p] >= 0 && static_cast<std::size_t>(labels[p]) <
                                  manifest.classes.size(),
            "encode_labels: class index out of range");
    const Rgb& c = manifest.classes[static_cast<std::size_t>(labels[p])].color;
    rgb[p * 3] = c[0];
    rgb[p * 3 + 1] = c[1];
    rgb[p * 3 + 2] = c[2];
  }
  return rgb;
}

std::vector<std::pair<std::size_t, std::size_t>> tile_origins(
    std::size_t height, std::size_t width, std::size_t tile,
    std::size_t stride) {
  require(height >= tile && width >= tile,
          "tile_dataset: source smaller than tile size");
  require(stride >= 1, "tile_dataset: stride must be positive");
  auto axis_origins = [&](std::size_t extent) {
    std::vector<std::size_t> xs;
    for (std::size_t o = 0; o + tile <= extent; o += stride) xs.push_back(o);
    if (xs.empty() || xs.back() + tile < extent)
      xs.push_back(extent - tile);  // edge-aligned remainder
    return xs;
  };
  std::vector<std::pair<std::size_t, std::size_t>> origins;
  for (std::size_t y : axis_origins(height))
    for (std::size_t x : axis_origins(width)) origins.emplace_back(y, x);
  return origins;
}

std::vector<Sample> tile_dataset(const DatasetManifest& manifest,
                                 const std::vector<std::size_t>& pair_indices,
                                 bool strict_labels) {
  std::vector<Sample> samples;
  const std::size_t ts = manifest.tile_size;
  for (std::size_t idx : pair_indices) {
    require(idx < manifest.pairs.size(), "tile_dataset: pair index range");
    const FilePair& pair = manifest.pairs[idx];
    LoadedRaster img = load_raster(pair.image, manifest.channel_order);
    RasterImage label_img = load_raster_image(pair.label);
    require(img.tensor.dim(1) == label_img.height &&
                img.tensor.dim(2) == label_img.width,
            "tile_dataset: image/label extent mismatch for " + pair.image);
    std::vector<int32_t> labels =
        decode_labels(label_img, manifest, strict_labels);

    const std::size_t c = img.tensor.dim(0);
    const std::size_t h = img.tensor.dim(1), w = img.tensor.dim(2);
    for (auto [oy, ox] : tile_origins(h, w, ts, manifest.stride())) {
      Sample s;
      std::vector<double> data(c * ts * ts);
      s.labels.resize(ts * ts);
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t y = 0; y < ts; ++y)
          for (std::size_t x = 0; x < ts; ++x)
            data[(k * ts + y) * ts + x] =
                img.tensor.data()[(k * h + oy + y) * w + ox + x];
      for (std::size_t y = 0; y < ts; ++y)
        for (std::size_t x = 0; x < ts; ++x)
          s.labels[y * ts + x] = labels[(oy + y) * w + ox + x];
      s.image = Tensor::from_data({c, ts, ts}, std::move(data));
      s.source = pair.image;
      s.origin_y = oy;
      s.origin_x = ox;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::vector<std::array<double, 3>> synth_class_means(std::size_t n_classes) {
  static const std::array<double, 3> table[] = {
      {0.15, 0.20, 0.80}, {0.85, 0.15, 0.15}, {0.15, 0.85, 0.20},
      {0.85, 0.80, 0.15}, {0.55, 0.25, 0.75}, {0.20, 0.65, 0.70},
      {0.75, 0.50, 0.30}, {0.45, 0.45, 0.45},
  };
  require(n_classes >= 2 && n_classes <= std::size(table),
          "synth_dataset: 2..8 classes supported");
  return {table, table + n_classes};
}

std::vector<Sample> synth_dataset(std::uint64_t seed,
                                  const SynthOptions& options) {
  require(options.size >= 16, "synth_dataset: size must be >= 16");
  const auto means = synth_class_means(options.n_classes);
  const std::size_t n = options.size;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, options.noise_sd);

  std::vector<Sample> samples;
  for (std::size_t si = 0; si < options.n_samples; ++si) {
    Sample s;
    s.labels.assign(n * n, 0);
    s.source = "synthetic:" + std::to_string(seed);
    s.origin_y = si;

    for (std::size_t k = 0; k < options.shapes_per_sample; ++k) {
      const auto cls = static_cast<int32_t>(
          1 + rng() % (options.n_classes - 1));
      const std::size_t kind = rng() % 3;
      const double cy = unit(rng) * n, cx = unit(rng) * n;
      const double ry = (0.08 + 0.22 * unit(rng)) * n;
      const double rx = (0.08 + 0.22 * unit(rng)) * n;
      if (kind == 0) {  // rectangle
        for (std::size_t y = 0; y < n; ++y)
          for (std::size_t x = 0; x < n; ++x)
            if (std::abs(y - cy) <= ry && std::abs(x - cx) <= rx)
              s.labels[y * n + x] = cls;
      } else if (kind == 1) {  // ellipse
        for (std::size_t y = 0; y < n; ++y)
          for (std::size_t x = 0; x < n; ++x) {
            const double dy = (y - cy) / ry, dx = (x - cx) / rx;
            if (dy * dy + dx * dx <= 1.0) s.labels[y * n + x] = cls;
          }
      } else {  // stripe
        const double angle = unit(rng) * 3.141592653589793;
        const double half = 0.04 * n + 0.06 * n * unit(rng);
        const double nyv = std::cos(angle), nxv = std::sin(angle);
        for (std::size_t y = 0; y < n; ++y)
          for (std::size_t x = 0; x < n; ++x)
            if (std::abs((y - cy) * nyv + (x - cx) * nxv) <= half)
              s.labels[y * n + x] = cls;
      }
    }

    std::vector<double> img(3 * n * n);
    for (std::size_t p = 0; p < n * n; ++p) {
      const auto& mean = means[static_cast<std::size_t>(s.labels[p])];
      for (std::size_t c = 0; c < 3; ++c)
        img[c * n * n + p] = std::clamp(mean[c] + noise(rng), 0.0, 1.0);
    }
    s.image = Tensor::from_data({3, n, n}, std::move(img));
    samples.push_back(std::move(s));
  }
  return samples;
}

DatasetManifest synth_manifest(const SynthOptions& options) {
  DatasetManifest m;
  m.name = "synthetic";
  const auto means = synth_class_means(options.n_classes);
  for (std::size_t i = 0; i < options.n_classes; ++i) {
    ClassDef def;
    def.name = "class_" + std::to_string(i);
    for (std::size_t c = 0; c < 3; ++c)
      def.color[c] = static_cast<std::uint8_t>(std::lround(means[i][c] * 255));
    m.classes.push_back(def);
  }
  m.tile_size = options.size;
  return m;
}

}  // namespace rsinet
