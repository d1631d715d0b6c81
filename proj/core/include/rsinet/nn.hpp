#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rsinet/ops.hpp"
#include "rsinet/tensor.hpp"

namespace rsinet {

using Rng = std::mt19937_64;

// Glorot-uniform fill: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void glorot_init(Tensor& t, std::size_t fan_in, std::size_t fan_out,
                 Rng& rng);

// Ordered named-parameter list; order fixes checkpoint layout and the
// optimizer's update sequence.
class ParamRegistry {
 public:
  Tensor add(const std::string& name, Tensor t);
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  Tensor find(const std::string& name) const;  // undefined handle if absent
  void zero_grads();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

ConvLayerParams make_conv(ParamRegistry& reg, const std::string& name,
                          std::size_t in_ch, std::size_t out_ch,
                          std::size_t kernel, std::size_t stride,
                          std::size_t dilation, std::size_t padding, Rng& rng,
                          bool transposed = false,
                          std::size_t output_padding = 0);

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step_count = 0;
  // One moment buffer pair per parameter, in registry order.
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// Bias-corrected Adam update over all registered parameters with a
// populated gradient is an error when a grad is missing; grads are zeroed
// after the step.
class Adam {
 public:
  Adam(ParamRegistry& params, double lr);
  void step();
  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }

 private:
  ParamRegistry& params_;
  AdamState state_;
};

}  // namespace rsinet
