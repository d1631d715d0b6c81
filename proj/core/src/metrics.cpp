#include "rsinet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "rsinet/tensor.hpp"

#include <nlohmann/json.hpp>

namespace rsinet {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : classes_(num_classes), counts_(num_classes * num_classes, 0) {
  require(num_classes >= 1, "confusion: need at least one class");
}

std::uint64_t ConfusionMatrix::at(std::size_t gt, std::size_t pred) const {
  require(gt < classes_ && pred < classes_, "confusion: index out of range");
  return counts_[gt * classes_ + pred];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (std::uint64_t v : counts_) t += v;
  return t;
}

void ConfusionMatrix::accumulate(const std::vector<int32_t>& pred,
                                 const std::vector<int32_t>& gt,
                                 std::optional<int32_t> ignore_index) {
  require(pred.size() == gt.size(), "confusion: raster size mismatch");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (ignore_index && gt[i] == *ignore_index) {
      ++ignored_;
      continue;
    }
    require(gt[i] >= 0 && static_cast<std::size_t>(gt[i]) < classes_ &&
                pred[i] >= 0 && static_cast<std::size_t>(pred[i]) < classes_,
            "confusion: class index out of range");
    ++counts_[static_cast<std::size_t>(gt[i]) * classes_ +
              static_cast<std::size_t>(pred[i])];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  require(other.classes_ == classes_, "confusion: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i)
    counts_[i] += other.counts_[i];
  ignored_ += other.ignored_;
}

double ConfusionMatrix::overall_accuracy() const { return p_observed(); }

double ConfusionMatrix::p_observed() const {
  const std::uint64_t t = total();
  require(t > 0, "confusion: empty matrix");
  std::uint64_t diag = 0;
  for (std::size_t i = 0; i < classes_; ++i) diag += counts_[i * classes_ + i];
  return static_cast<double>(diag) / static_cast<double>(t);
}

double ConfusionMatrix::p_expected() const {
  const double t = static_cast<double>(total());
  require(t > 0, "confusion: empty matrix");
  double pe = 0.0;
  for (std::size_t i = 0; i < classes_; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < classes_; ++j) {
      row += static_cast<double>(counts_[i * classes_ + j]);
      col += static_cast<double>(counts_[j * classes_ + i]);
    }
    pe += row * col;
  }
  return pe / (t * t);
}

std::vector<double> ConfusionMatrix::f1_scores() const {
  require(total() > 0, "confusion: empty matrix");
  std::vector<double> f1(classes_);
  for (std::size_t ci = 0; ci < classes_; ++ci) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < classes_; ++j) {
      row += counts_[ci * classes_ + j];
      col += counts_[j * classes_ + ci];
    }
    if (row == 0 && col == 0) {
      f1[ci] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double tp = static_cast<double>(counts_[ci * classes_ + ci]);
    const double precision = col ? tp / static_cast<double>(col) : 0.0;
    const double recall = row ? tp / static_cast<double>(row) : 0.0;
    f1[ci] = (precision + recall) > 0.0
                 ? 2.0 * precision * recall / (precision + recall)
                 : 0.0;
  }
  return f1;
}

double ConfusionMatrix::mean_f1() const {
  const auto f1 = f1_scores();
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : f1)
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  require(n > 0, "confusion: no evaluable classes");
  return sum / static_cast<double>(n);
}

double ConfusionMatrix::kappa() const {
  const double po = p_observed();
  const double pe = p_expected();
  require(pe < 1.0, "kappa: degenerate single-class matrix (p_e = 1)");
  return (po - pe) / (1.0 - pe);
}

MetricsReport make_report(const ConfusionMatrix& cm,
                          std::vector<std::string> class_names) {
  MetricsReport r;
  if (class_names.empty())
    for (std::size_t i = 0; i < cm.num_classes(); ++i)
      class_names.push_back("class_" + std::to_string(i));
  require(class_names.size() == cm.num_classes(),
          "metrics: class name count mismatch");
  r.class_names = std::move(class_names);
  r.f1 = cm.f1_scores();
  r.overall_accuracy = cm.overall_accuracy();
  r.mean_f1 = cm.mean_f1();
  r.p_observed = cm.p_observed();
  r.p_expected = cm.p_expected();
  r.kappa = cm.kappa();
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    if (std::isnan(f1[i]))
      j["f1"][class_names[i]] = nullptr;
    else
      j["f1"][class_names[i]] = f1[i];
  }
  j["overall_accuracy"] = overall_accuracy;
  j["mean_f1"] = mean_f1;
  j["kappa"] = kappa;
  j["p_observed"] = p_observed;
  j["p_expected"] = p_expected;
  return j.dump(2);
}

std::string MetricsReport::to_table() const {
  std::size_t width = 12;
  for (const auto& n : class_names) width = std::max(width, n.size() + 2);
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  auto row = [&](const std::string& name, double value) {
    os << std::left << std::setw(static_cast<int>(width + 10)) << name;
    if (std::isnan(value))
      os << "   n/a";
    else
      os << value;
    os << "\n";
  };
  for (std::size_t i = 0; i < class_names.size(); ++i)
    row("F1 " + class_names[i], f1[i]);
  row("OA", overall_accuracy);
  row("mean F1", mean_f1);
  row("kappa", kappa);
  return os.str();
}

}  // namespace rsinet
