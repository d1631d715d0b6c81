#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rsinet {

// Row = ground truth, column = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const { return classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const;
  std::uint64_t total() const;
  std::uint64_t ignored() const { return ignored_; }

  void accumulate(const std::vector<int32_t>& pred,
                  const std::vector<int32_t>& gt,
                  std::optional<int32_t> ignore_index = {});
  void merge(const ConfusionMatrix& other);

  double overall_accuracy() const;  // trace / total
  // Harmonic mean of precision and recall per class; a class with
  // precision + recall = 0 scores 0; classes absent from both gt and
  // prediction are reported as NaN and excluded from the mean.
  std::vector<double> f1_scores() const;
  double mean_f1() const;
  double p_observed() const;
  double p_expected() const;
  double kappa() const;  // (p_o - p_e) / (1 - p_e); error when p_e = 1

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<double> f1;  // per class, NaN for absent classes
  double overall_accuracy = 0.0;
  double mean_f1 = 0.0;
  double kappa = 0.0;
  double p_observed = 0.0;
  double p_expected = 0.0;

  std::string to_json() const;
  // Aligned text table: one F1 row per class, then OA, mean F1, kappa.
  std::string to_table() const;
};

MetricsReport make_report(const ConfusionMatrix& cm,
                          std::vector<std::string> class_names);

}  // namespace rsinet
