#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rsinet/checkpoint.hpp"
#include "rsinet/dataset.hpp"
#include "rsinet/metrics.hpp"
#include "rsinet/model.hpp"
#include "rsinet/superpixel.hpp"

namespace rsinet {

struct TrainConfig {
  std::string manifest_path;  // empty: synthetic dataset below
  SynthOptions synth;
  std::string variant = "full";
  double lr = 1e-4;
  std::size_t iterations = 500;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  // Superpixel scale; by default the target pixel count per region
  // (region_count_mode reads it as the desired number of regions).
  std::size_t superpixel_size = 100;
  bool region_count_mode = false;
  double compactness = 10.0;
  std::size_t slic_iters = 10;
  double width_mult = 1.0;
  std::size_t checkpoint_every = 100;
  std::size_t classes = 0;  // 0: taken from the manifest / synth options
  double leaky_slope = 0.01;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& json_text);
};

// A sample with its precomputed superpixel graph.
struct GraphSample {
  Sample sample;
  PixelGraph graph;
};

std::vector<GraphSample> prepare_samples(const TrainConfig& config,
                                         const std::string& split = "train");
PixelGraph graph_for_image(const Tensor& image, const TrainConfig& config);
ModelConfig model_config_from(const TrainConfig& config);

struct TrainResult {
  std::vector<double> losses;  // one entry per optimizer step
  std::string final_checkpoint;
  std::string loss_log_path;
};

// Runs `iterations` optimizer steps cycling through the sample sequence,
// logging step,loss CSV and writing periodic + final checkpoints under
// out_dir. Pass a checkpoint path to resume mid-run.
TrainResult train(const TrainConfig& config, const std::string& out_dir,
                  const std::string& resume_from = "");

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& cp);

MetricsReport evaluate_samples(const Model& model,
                               const std::vector<GraphSample>& samples,
                               const TrainConfig& config,
                               std::vector<std::string> class_names = {});
MetricsReport evaluate(const Checkpoint& cp, const std::string& manifest_path,
                       const std::string& split);

// Argmax prediction rendered as an indexed PNG with the manifest palette.
void predict(const Checkpoint& cp, const std::string& image_path,
             const std::string& out_path);
std::vector<int32_t> predict_labels(const Model& model, const Tensor& image,
                                    const TrainConfig& config);

struct SweepRow {
  std::size_t size = 0;
  double mean_f1 = 0.0;
  double kappa = 0.0;
};

// Trains and evaluates one model per superpixel size under a shared seed;
// also writes a CSV (header size,mean_f1,kappa).
std::vector<SweepRow> sweep_superpixels(const TrainConfig& config,
                                        const std::vector<std::size_t>& sizes,
                                        const std::string& out_csv);

struct AblationRow {
  std::string variant;
  double overall_accuracy = 0.0;
  double mean_f1 = 0.0;
  double kappa = 0.0;
};

// Trains all four variants on the configured dataset and reports
// training-set metrics for each.
std::vector<AblationRow> ablate(const TrainConfig& config,
                                const std::string& out_dir);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace rsinet
