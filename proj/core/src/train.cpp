#include "rsinet/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rsinet/ops.hpp"

namespace rsinet {

namespace fs = std::filesystem;

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["manifest"] = manifest_path;
  j["synth"] = {{"n_samples", synth.n_samples},
                {"size", synth.size},
                {"n_classes", synth.n_classes},
                {"noise_sd", synth.noise_sd},
                {"shapes_per_sample", synth.shapes_per_sample}};
  j["variant"] = variant;
  j["lr"] = lr;
  j["iterations"] = iterations;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["superpixel_size"] = superpixel_size;
  j["region_count_mode"] = region_count_mode;
  j["compactness"] = compactness;
  j["slic_iters"] = slic_iters;
  j["width_mult"] = width_mult;
  j["checkpoint_every"] = checkpoint_every;
  j["classes"] = classes;
  j["leaky_slope"] = leaky_slope;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  TrainConfig c;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  get("manifest", c.manifest_path);
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    if (s.contains("n_samples")) c.synth.n_samples = s.at("n_samples");
    if (s.contains("size")) c.synth.size = s.at("size");
    if (s.contains("n_classes")) c.synth.n_classes = s.at("n_classes");
    if (s.contains("noise_sd")) c.synth.noise_sd = s.at("noise_sd");
    if (s.contains("shapes_per_sample"))
      c.synth.shapes_per_sample = s.at("shapes_per_sample");
  }
  get("variant", c.variant);
  get("lr", c.lr);
  get("iterations", c.iterations);
  get("batch_size", c.batch_size);
  get("seed", c.seed);
  get("superpixel_size", c.superpixel_size);
  get("region_count_mode", c.region_count_mode);
  get("compactness", c.compactness);
  get("slic_iters", c.slic_iters);
  get("width_mult", c.width_mult);
  get("checkpoint_every", c.checkpoint_every);
  get("classes", c.classes);
  get("leaky_slope", c.leaky_slope);
  require(c.lr > 0.0 || c.lr == 0.0, "config: lr must be non-negative");
  require(c.iterations >= 1, "config: iterations must be >= 1");
  return c;
}

namespace {

std::size_t class_count(const TrainConfig& config) {
  if (config.classes) return config.classes;
  if (config.manifest_path.empty()) return config.synth.n_classes;
  return load_manifest(config.manifest_path).classes.size();
}

}  // namespace

ModelConfig model_config_from(const TrainConfig& config) {
  ModelConfig mc;
  mc.variant = parse_variant(config.variant);
  mc.width_mult = config.width_mult;
  mc.classes = class_count(config);
  mc.leaky_slope = config.leaky_slope;
  return mc;
}

PixelGraph graph_for_image(const Tensor& image, const TrainConfig& config) {
  const std::size_t pixels = image.dim(1) * image.dim(2);
  std::size_t target = config.superpixel_size;
  if (config.region_count_mode)
    target = std::max<std::size_t>(1, pixels / config.superpixel_size);
  target = std::min(target, pixels);
  SlicOptions opts;
  opts.compactness = config.compactness;
  opts.max_iters = config.slic_iters;
  return build_pixel_graph(slic(image, target, opts));
}

std::vector<GraphSample> prepare_samples(const TrainConfig& config,
                                         const std::string& split) {
  std::vector<Sample> samples;
  if (config.manifest_path.empty()) {
    samples = synth_dataset(config.seed, config.synth);
  } else {
    const DatasetManifest manifest = load_manifest(config.manifest_path);
    samples = tile_dataset(manifest, manifest.split(split));
  }
  require(!samples.empty(), "train: dataset is empty");
  std::vector<GraphSample> out;
  out.reserve(samples.size());
  for (Sample& s : samples) {
    GraphSample gs;
    gs.graph = graph_for_image(s.image, config);
    gs.sample = std::move(s);
    out.push_back(std::move(gs));
  }
  return out;
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& cp) {
  const TrainConfig config = TrainConfig::from_json(cp.config_json);
  auto model = build_model(model_config_from(config), config.seed);
  restore_params(model->params(), cp);
  return model;
}

TrainResult train(const TrainConfig& config, const std::string& out_dir,
                  const std::string& resume_from) {
  fs::create_directories(out_dir);
  const auto samples = prepare_samples(config, "train");

  auto model = build_model(model_config_from(config), config.seed);
  Adam adam(model->params(), config.lr);
  Rng rng(config.seed);
  std::uint64_t start_iter = 0;

  if (!resume_from.empty()) {
    Checkpoint cp = load_checkpoint(resume_from);
    restore_params(model->params(), cp);
    adam.state() = cp.adam;
    start_iter = cp.iteration;
    std::istringstream(cp.rng_state) >> rng;
  }

  auto rng_state_str = [&] {
    std::ostringstream os;
    os << rng;
    return os.str();
  };
  auto write_checkpoint = [&](std::uint64_t iter, const std::string& path) {
    save_checkpoint(snapshot(model->params(), config.to_json(), adam.state(),
                             iter, rng_state_str()),
                    path);
  };

  TrainResult result;
  result.loss_log_path = (fs::path(out_dir) / "loss_log.csv").string();
  std::ofstream log(result.loss_log_path,
                    start_iter ? std::ios::app : std::ios::out);
  require(log.good(), "train: cannot write loss log");
  if (!start_iter) log << "step,loss\n";

  for (std::uint64_t iter = start_iter; iter < config.iterations; ++iter) {
    Tensor loss;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const GraphSample& gs =
          samples[(iter * config.batch_size + b) % samples.size()];
      Tensor logits = model->forward_logits(gs.sample.image, gs.graph);
      Tensor l = softmax_cross_entropy(logits, gs.sample.labels);
      loss = loss.defined() ? add(loss, l) : l;
    }
    if (config.batch_size > 1)
      loss = mul_scalar(loss, 1.0 / static_cast<double>(config.batch_size));
    require(std::isfinite(loss.item()),
            "train: non-finite loss at step " + std::to_string(iter + 1));
    loss.backward();
    adam.step();

    result.losses.push_back(loss.item());
    log << (iter + 1) << "," << std::setprecision(17) << loss.item() << "\n";

    if (config.checkpoint_every && (iter + 1) % config.checkpoint_every == 0 &&
        iter + 1 < config.iterations) {
      write_checkpoint(iter + 1,
                       (fs::path(out_dir) /
                        ("checkpoint_" + std::to_string(iter + 1) + ".rsin"))
                           .string());
    }
  }

  result.final_checkpoint =
      (fs::path(out_dir) / "checkpoint_final.rsin").string();
  write_checkpoint(config.iterations, result.final_checkpoint);
  return result;
}

std::vector<int32_t> predict_labels(const Model& model, const Tensor& image,
                                    const TrainConfig& config) {
  const PixelGraph graph = graph_for_image(image, config);
  Tensor probs = model.forward_probs(image, graph);
  const std::size_t c = probs.dim(0), plane = probs.dim(1) * probs.dim(2);
  std::vector<int32_t> labels(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (probs.data()[k * plane + p] > probs.data()[best * plane + p])
        best = k;
    labels[p] = static_cast<int32_t>(best);
  }
  return labels;
}

MetricsReport evaluate_samples(const Model& model,
                               const std::vector<GraphSample>& samples,
                               const TrainConfig& config,
                               std::vector<std::string> class_names) {
  ConfusionMatrix cm(model.config().classes);
  const int32_t ignore =
      config.manifest_path.empty()
          ? int32_t{-1}
          : load_manifest(config.manifest_path).ignore_index;
  for (const GraphSample& gs : samples) {
    Tensor logits = model.forward_logits(gs.sample.image, gs.graph);
    Tensor probs = softmax_channels(logits);
    const std::size_t c = probs.dim(0);
    const std::size_t plane = probs.dim(1) * probs.dim(2);
    std::vector<int32_t> pred(plane);
    for (std::size_t p = 0; p < plane; ++p) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < c; ++k)
        if (probs.data()[k * plane + p] > probs.data()[best * plane + p])
          best = k;
      pred[p] = static_cast<int32_t>(best);
    }
    cm.accumulate(pred, gs.sample.labels, ignore);
  }
  return make_report(cm, std::move(class_names));
}

MetricsReport evaluate(const Checkpoint& cp, const std::string& manifest_path,
                       const std::string& split) {
  TrainConfig config = TrainConfig::from_json(cp.config_json);
  const DatasetManifest manifest = load_manifest(manifest_path);
  auto model = model_from_checkpoint(cp);
  require(manifest.classes.size() == model->config().classes,
          "evaluate: manifest class count does not match the checkpoint");
  config.manifest_path = manifest_path;
  const auto samples = prepare_samples(config, split);
  std::vector<std::string> names;
  for (const ClassDef& c : manifest.classes) names.push_back(c.name);
  return evaluate_samples(*model, samples, config, std::move(names));
}

void predict(const Checkpoint& cp, const std::string& image_path,
             const std::string& out_path) {
  TrainConfig config = TrainConfig::from_json(cp.config_json);
  auto model = model_from_checkpoint(cp);

  std::vector<Rgb> palette;
  if (!config.manifest_path.empty()) {
    palette = load_manifest(config.manifest_path).palette();
  } else {
    const DatasetManifest m = synth_manifest(config.synth);
    palette = m.palette();
  }
  require(palette.size() == model->config().classes,
          "predict: palette does not match the class count");

  LoadedRaster raster = load_raster(
      image_path, config.manifest_path.empty()
                      ? std::vector<std::size_t>{}
                      : load_manifest(config.manifest_path).channel_order);
  const Tensor& image = raster.tensor;
  require(image.dim(1) % 16 == 0 && image.dim(2) % 16 == 0,
          "predict: image extents must be divisible by 16");
  const std::vector<int32_t> labels = predict_labels(*model, image, config);
  write_png_indexed(out_path, image.dim(1), image.dim(2), labels, palette);
}

std::vector<SweepRow> sweep_superpixels(const TrainConfig& config,
                                        const std::vector<std::size_t>& sizes,
                                        const std::string& out_csv) {
  require(!sizes.empty(), "sweep: size list is empty");
  std::vector<SweepRow> rows;
  for (std::size_t size : sizes) {
    TrainConfig c = config;
    c.superpixel_size = size;
    const std::string dir =
        (fs::path(out_csv).parent_path() / ("sweep_" + std::to_string(size)))
            .string();
    train(c, dir);
    Checkpoint cp =
        load_checkpoint((fs::path(dir) / "checkpoint_final.rsin").string());
    auto model = model_from_checkpoint(cp);
    const auto samples = prepare_samples(c, "train");
    const MetricsReport report = evaluate_samples(*model, samples, c);
    rows.push_back({size, report.mean_f1, report.kappa});
  }
  std::ofstream csv(out_csv);
  require(csv.good(), "sweep: cannot write " + out_csv);
  csv << "size,mean_f1,kappa\n";
  for (const SweepRow& r : rows)
    csv << r.size << "," << std::setprecision(17) << r.mean_f1 << ","
        << r.kappa << "\n";
  return rows;
}

std::vector<AblationRow> ablate(const TrainConfig& config,
                                const std::string& out_dir) {
  static const char* kVariants[] = {"full", "no_gcn", "no_parallel_atrous",
                                    "no_dense_atrous"};
  std::vector<AblationRow> rows;
  for (const char* v : kVariants) {
    TrainConfig c = config;
    c.variant = v;
    const std::string dir = (fs::path(out_dir) / v).string();
    train(c, dir);
    Checkpoint cp =
        load_checkpoint((fs::path(dir) / "checkpoint_final.rsin").string());
    auto model = model_from_checkpoint(cp);
    const auto samples = prepare_samples(c, "train");
    const MetricsReport report = evaluate_samples(*model, samples, c);
    rows.push_back({v, report.overall_accuracy, report.mean_f1, report.kappa});
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(22) << "variant" << std::setw(10) << "OA"
     << std::setw(10) << "mean_F1" << "kappa\n";
  for (const AblationRow& r : rows)
    os << std::left << std::setw(22) << r.variant << std::setw(10)
       << r.overall_accuracy << std::setw(10) << r.mean_f1 << r.kappa << "\n";
  return os.str();
}

}  // namespace rsinet
