// Command-line surface: train / eval / predict / sweep / ablate.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rsinet/train.hpp"

namespace fs = std::filesystem;

namespace {

rsinet::TrainConfig read_config(const std::string& path) {
  if (path.empty()) return rsinet::TrainConfig{};
  std::ifstream in(path);
  rsinet::require(in.good(), "cli: cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return rsinet::TrainConfig::from_json(ss.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RSI-Net two-stream semantic segmentation"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", variant, checkpoint_path;
  std::string image_path, manifest_path, split = "test", resume_path;
  std::uint64_t seed = 0;
  double width_mult = 0.0;
  bool seed_set = false, variant_set = false, width_set = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "TrainConfig JSON path");
    cmd->add_option("--seed", seed, "RNG seed")->each([&](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--variant", variant,
                    "full|no_gcn|no_parallel_atrous|no_dense_atrous")
        ->each([&](const std::string&) { variant_set = true; });
    cmd->add_option("--width-mult", width_mult, "channel width multiplier")
        ->each([&](const std::string&) { width_set = true; });
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd);
  train_cmd->add_option("--resume", resume_path, "checkpoint to resume from");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint path")
      ->required();
  eval_cmd->add_option("--manifest", manifest_path, "dataset manifest")
      ->required();
  eval_cmd->add_option("--split", split, "train|test|all");

  CLI::App* predict_cmd =
      app.add_subcommand("predict", "segment one image to an indexed PNG");
  add_common(predict_cmd);
  predict_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint path")
      ->required();
  predict_cmd->add_option("--image", image_path, "input raster")->required();

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "superpixel-size sweep (CSV output)");
  add_common(sweep_cmd);
  std::vector<std::size_t> sizes = {100, 200, 300, 400, 500, 600};
  sweep_cmd->add_option("--sizes", sizes, "superpixel sizes to sweep");

  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "train all four variants and compare");
  add_common(ablate_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    rsinet::TrainConfig config = read_config(config_path);
    if (seed_set) config.seed = seed;
    if (variant_set) config.variant = variant;
    if (width_set) config.width_mult = width_mult;
    fs::create_directories(out_dir);

    if (train_cmd->parsed()) {
      const auto result = rsinet::train(config, out_dir, resume_path);
      std::cout << "final loss " << result.losses.back() << "\n"
                << "checkpoint " << result.final_checkpoint << "\n"
                << "loss log   " << result.loss_log_path << "\n";
    } else if (eval_cmd->parsed()) {
      const auto cp = rsinet::load_checkpoint(checkpoint_path);
      const auto report = rsinet::evaluate(cp, manifest_path, split);
      const auto json_path = (fs::path(out_dir) / "metrics.json").string();
      std::ofstream(json_path) << report.to_json() << "\n";
      std::cout << report.to_table() << "report written to " << json_path
                << "\n";
    } else if (predict_cmd->parsed()) {
      const auto cp = rsinet::load_checkpoint(checkpoint_path);
      const auto out_path = (fs::path(out_dir) /
                             (fs::path(image_path).stem().string() +
                              "_prediction.png"))
                                .string();
      rsinet::predict(cp, image_path, out_path);
      std::cout << "prediction written to " << out_path << "\n";
    } else if (sweep_cmd->parsed()) {
      const auto csv = (fs::path(out_dir) / "sweep.csv").string();
      const auto rows = rsinet::sweep_superpixels(config, sizes, csv);
      for (const auto& r : rows)
        std::cout << "size " << r.size << "  mean F1 " << r.mean_f1
                  << "  kappa " << r.kappa << "\n";
      std::cout << "csv written to " << csv << "\n";
    } else if (ablate_cmd->parsed()) {
      const auto rows = rsinet::ablate(config, out_dir);
      const std::string table = rsinet::ablation_table(rows);
      std::ofstream((fs::path(out_dir) / "ablation.txt").string()) << table;
      std::cout << table;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
