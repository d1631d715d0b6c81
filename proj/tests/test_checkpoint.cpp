#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rsinet/checkpoint.hpp"
#include "rsinet/model.hpp"
#include "rsinet/superpixel.hpp"
#include "test_util.hpp"

using namespace rsinet;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("checkpoint file round-trips byte exactly") {
  Rng rng(3);
  ParamRegistry reg;
  Tensor w = reg.add("layer.weight", testutil::random_tensor({4, 3}, rng, -1, 1, true));
  Tensor b = reg.add("layer.bias", testutil::random_tensor({3}, rng, -1, 1, true));
  AdamState adam;
  adam.step_count = 7;
  adam.first_moment = {{0.1, 0.2, 0.3, 0, 0, 0, 0, 0, 0, 0, 0, 0.5},
                       {1, 2, 3}};
  adam.second_moment = {std::vector<double>(12, 0.25),
                        std::vector<double>(3, 0.125)};
  std::ostringstream rs;
  rs << rng;

  Checkpoint cp = snapshot(reg, "{\"lr\":0.0001}", adam, 42, rs.str());
  const std::string p1 = tmp_path("cp1.rsin");
  const std::string p2 = tmp_path("cp2.rsin");
  save_checkpoint(cp, p1);

  Checkpoint loaded = load_checkpoint(p1);
  CHECK(loaded.version == kCheckpointVersion);
  CHECK(loaded.config_json == cp.config_json);
  CHECK(loaded.iteration == 42);
  CHECK(loaded.rng_state == cp.rng_state);
  REQUIRE(loaded.tensors.size() == 2);
  CHECK(loaded.tensors[0].first == "layer.weight");
  CHECK(loaded.tensors[0].second.values() == w.values());
  CHECK(loaded.tensors[1].second.values() == b.values());
  CHECK(loaded.adam.step_count == 7);
  CHECK(loaded.adam.first_moment == adam.first_moment);
  CHECK(loaded.adam.second_moment == adam.second_moment);

  save_checkpoint(loaded, p2);
  CHECK(file_bytes(p1) == file_bytes(p2));
}

TEST_CASE("magic and version are enforced") {
  const std::string p = tmp_path("bad.rsin");
  {
    std::ofstream out(p, std::ios::binary);
    out << "XXXXjunk";
  }
  CHECK_THROWS(load_checkpoint(p));
  CHECK_THROWS(load_checkpoint(tmp_path("missing.rsin")));
}

TEST_CASE("restored model reproduces the stored forward pass") {
  ModelConfig cfg;
  cfg.variant = Variant::Full;
  cfg.width_mult = 1.0 / 32.0;
  cfg.classes = 3;
  auto model = build_model(cfg, 11);

  Rng rng(5);
  Tensor img = testutil::random_tensor({3, 32, 32}, rng, 0.0, 1.0);
  PixelGraph g = build_pixel_graph(slic(img, 64));
  Tensor before = model->forward_logits(img, g);

  AdamState adam;
  Checkpoint cp = snapshot(model->params(), "{}", adam, 0, "");
  const std::string p = tmp_path("model.rsin");
  save_checkpoint(cp, p);

  auto fresh = build_model(cfg, 999);  // different seed, then overwritten
  restore_params(fresh->params(), load_checkpoint(p));
  Tensor after = fresh->forward_logits(img, g);
  CHECK(before.values() == after.values());
}

TEST_CASE("restore rejects mismatched parameter sets") {
  ModelConfig small;
  small.width_mult = 1.0 / 32.0;
  auto a = build_model(small, 1);
  ModelConfig other = small;
  other.variant = Variant::NoGcn;
  auto b = build_model(other, 1);
  AdamState adam;
  Checkpoint cp = snapshot(a->params(), "{}", adam, 0, "");
  CHECK_THROWS(restore_params(b->params(), cp));
}
