#include <doctest.h>

#include <cmath>
#include <random>

#include "rsinet/metrics.hpp"

using namespace rsinet;

namespace {

ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
  ConfusionMatrix cm(rows.size());
  for (std::size_t g = 0; g < rows.size(); ++g)
    for (std::size_t p = 0; p < rows.size(); ++p)
      for (std::uint64_t n = 0; n < rows[g][p]; ++n)
        cm.accumulate({static_cast<int32_t>(p)}, {static_cast<int32_t>(g)});
  return cm;
}

}  // namespace

TEST_CASE("perfect prediction yields a diagonal matrix with unit metrics") {
  std::vector<int32_t> labels = {0, 1, 2, 1, 0, 2, 2, 1};
  ConfusionMatrix cm(3);
  cm.accumulate(labels, labels);
  for (std::size_t g = 0; g < 3; ++g)
    for (std::size_t p = 0; p < 3; ++p)
      if (g != p) CHECK(cm.at(g, p) == 0);
  CHECK(cm.overall_accuracy() == 1.0);
  for (double f : cm.f1_scores()) CHECK(f == 1.0);
  CHECK(cm.mean_f1() == 1.0);
  CHECK(cm.kappa() == 1.0);
}

TEST_CASE("swapping prediction and ground truth transposes the matrix") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int32_t> cls(0, 3);
  std::vector<int32_t> a(100), b(100);
  for (auto& v : a) v = cls(rng);
  for (auto& v : b) v = cls(rng);
  ConfusionMatrix ab(4), ba(4);
  ab.accumulate(a, b);
  ba.accumulate(b, a);
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t p = 0; p < 4; ++p)
      CHECK(ab.at(g, p) == ba.at(p, g));
}

TEST_CASE("worked binary examples") {
  ConfusionMatrix cm = from_rows({{2, 0}, {1, 1}});
  CHECK(cm.overall_accuracy() == 0.75);
  auto f1 = cm.f1_scores();
  CHECK(f1[0] == doctest::Approx(0.8).epsilon(1e-15));

  ConfusionMatrix k = from_rows({{20, 5}, {10, 15}});
  CHECK(k.p_observed() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(k.p_expected() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(k.kappa() == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("chance-level prediction has zero kappa") {
  // Prediction independent of ground truth: p_o = p_e.
  ConfusionMatrix cm = from_rows({{9, 1}, {81, 9}});
  CHECK(cm.p_observed() == doctest::Approx(cm.p_expected()).epsilon(1e-12));
  CHECK(cm.kappa() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kappa with p_e = 1 is an error") {
  ConfusionMatrix cm = from_rows({{5, 0}, {0, 0}});
  CHECK_THROWS(cm.kappa());
}

TEST_CASE("absent classes are NaN and excluded from the mean F1") {
  ConfusionMatrix cm = from_rows({{3, 1, 0}, {1, 3, 0}, {0, 0, 0}});
  auto f1 = cm.f1_scores();
  CHECK(std::isnan(f1[2]));
  CHECK(f1[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(cm.mean_f1() == doctest::Approx(0.75).epsilon(1e-12));

  ConfusionMatrix diag = from_rows({{2, 0, 0}, {0, 3, 0}, {0, 0, 4}});
  CHECK(diag.mean_f1() == 1.0);
}

TEST_CASE("ignore index drops pixels from the matrix") {
  ConfusionMatrix cm(2);
  cm.accumulate({0, 1, 0, 1}, {0, 1, 255, 255}, 255);
  CHECK(cm.total() == 2);
  CHECK(cm.ignored() == 2);
  CHECK(cm.overall_accuracy() == 1.0);
}

TEST_CASE("random rasters match the per-pixel loop oracle") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int32_t> cls(0, 4);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int32_t> pred(256), gt(256);
    for (auto& v : pred) v = cls(rng);
    for (auto& v : gt) v = cls(rng);
    ConfusionMatrix cm(5);
    cm.accumulate(pred, gt);

    std::uint64_t counts[5][5] = {};
    for (std::size_t i = 0; i < 256; ++i) ++counts[gt[i]][pred[i]];
    std::uint64_t correct = 0;
    for (std::size_t g = 0; g < 5; ++g) {
      correct += counts[g][g];
      for (std::size_t p = 0; p < 5; ++p) CHECK(cm.at(g, p) == counts[g][p]);
    }
    CHECK(cm.overall_accuracy() ==
          doctest::Approx(correct / 256.0).epsilon(1e-15));

    // F1 and kappa against direct formulas.
    auto f1 = cm.f1_scores();
    double pe = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      std::uint64_t gt_c = 0, pred_c = 0;
      for (std::size_t o = 0; o < 5; ++o) {
        gt_c += counts[c][o];
        pred_c += counts[o][c];
      }
      pe += (gt_c / 256.0) * (pred_c / 256.0);
      if (gt_c + pred_c > 0) {
        const double want = 2.0 * counts[c][c] / (gt_c + pred_c);
        CHECK(f1[c] == doctest::Approx(want).epsilon(1e-12));
      }
    }
    const double po = correct / 256.0;
    CHECK(cm.kappa() ==
          doctest::Approx((po - pe) / (1.0 - pe)).epsilon(1e-12));
    CHECK(cm.kappa() >= -1.0 - 1e-12);
    CHECK(cm.kappa() <= 1.0 + 1e-12);
  }
}

TEST_CASE("merging per-tile matrices equals the whole-image matrix") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int32_t> cls(0, 3);
  std::vector<int32_t> pred(400), gt(400);
  for (auto& v : pred) v = cls(rng);
  for (auto& v : gt) v = cls(rng);

  ConfusionMatrix whole(4);
  whole.accumulate(pred, gt);

  ConfusionMatrix merged(4);
  for (std::size_t t = 0; t < 4; ++t) {
    ConfusionMatrix tile(4);
    tile.accumulate(
        std::vector<int32_t>(pred.begin() + t * 100, pred.begin() + (t + 1) * 100),
        std::vector<int32_t>(gt.begin() + t * 100, gt.begin() + (t + 1) * 100));
    merged.merge(tile);
  }
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t p = 0; p < 4; ++p)
      CHECK(merged.at(g, p) == whole.at(g, p));
  CHECK(merged.kappa() == whole.kappa());
  CHECK(merged.mean_f1() == whole.mean_f1());
}

TEST_CASE("report carries one F1 row per class plus summary rows") {
  ConfusionMatrix cm = from_rows({{2, 0}, {1, 1}});
  MetricsReport rep = make_report(cm, {"water", "land"});
  CHECK(rep.class_names.size() == 2);
  CHECK(rep.f1.size() == 2);
  CHECK(rep.overall_accuracy == 0.75);
  const std::string table = rep.to_table();
  CHECK(table.find("water") != std::string::npos);
  CHECK(table.find("land") != std::string::npos);
  CHECK(table.find("OA") != std::string::npos);
  CHECK(table.find("mean F1") != std::string::npos);
  CHECK(table.find("kappa") != std::string::npos);
  const std::string json = rep.to_json();
  CHECK(json.find("\"overall_accuracy\"") != std::string::npos);
  CHECK(json.find("\"kappa\"") != std::string::npos);
}
