#include "rsinet/nn.hpp"

#include <cmath>

namespace rsinet {

void glorot_init(Tensor& t, std::size_t fan_in, std::size_t fan_out,
                 Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& v : t.values()) v = dist(rng);
}

Tensor ParamRegistry::add(const std::string& name, Tensor t) {
  for (const auto& [n, unused] : entries_)
    require(n != name, "params: duplicate name " + name);
  t.set_requires_grad(true);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamRegistry::find(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  return Tensor();
}

void ParamRegistry::zero_grads() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

ConvLayerParams make_conv(ParamRegistry& reg, const std::string& name,
                          std::size_t in_ch, std::size_t out_ch,
                          std::size_t kernel, std::size_t stride,
                          std::size_t dilation, std::size_t padding, Rng& rng,
                          bool transposed, std::size_t output_padding) {
  ConvLayerParams p;
  // Weight dim0 is the forward-conv output side; a transposed layer maps
  // from dim0 channels to dim1 channels (adjoint direction).
  const std::size_t dim0 = transposed ? in_ch : out_ch;
  const std::size_t dim1 = transposed ? out_ch : in_ch;
  Tensor w = Tensor::zeros({dim0, dim1, kernel, kernel});
  glorot_init(w, in_ch * kernel * kernel, out_ch * kernel * kernel, rng);
  p.weight = reg.add(name + ".weight", w);
  p.bias = reg.add(name + ".bias", Tensor::zeros({out_ch}));
  p.stride = stride;
  p.dilation = dilation;
  p.padding = padding;
  p.output_padding = output_padding;
  p.transposed = transposed;
  return p;
}

Adam::Adam(ParamRegistry& params, double lr) : params_(params) {
  state_.lr = lr;
  for (const auto& [name, t] : params_.entries()) {
    state_.first_moment.emplace_back(t.size(), 0.0);
    state_.second_moment.emplace_back(t.size(), 0.0);
  }
}

void Adam::step() {
  ++state_.step_count;
  const double bc1 =
      1.0 - std::pow(state_.beta1, static_cast<double>(state_.step_count));
  const double bc2 =
      1.0 - std::pow(state_.beta2, static_cast<double>(state_.step_count));
  for (std::size_t idx = 0; idx < params_.entries().size(); ++idx) {
    const std::string& name = params_.entries()[idx].first;
    Tensor t = params_.entries()[idx].second;  // shared handle
    require(t.has_grad(), "adam: missing gradient for " + name);
    auto& m = state_.first_moment[idx];
    auto& v = state_.second_moment[idx];
    const auto& g = t.grad();
    auto& x = t.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = state_.beta1 * m[i] + (1.0 - state_.beta1) * g[i];
      v[i] = state_.beta2 * v[i] + (1.0 - state_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      x[i] -= state_.lr * mhat / (std::sqrt(vhat) + state_.eps);
    }
    t.zero_grad();
  }
}

}  // namespace rsinet
