#include "rsinet/gcn.hpp"

namespace rsinet {

Tensor normalize_rows(const Tensor& x, double eps) {
  require(x.ndim() == 2, "normalize_rows: expects a matrix");
  Tensor sq = mul(x, x);
  Tensor norms = pow_elem(add_scalar(row_sum(sq), eps), -0.5);  // [N,1]
  Tensor ones = Tensor::full({1, x.dim(1)}, 1.0);
  Tensor scale = matmul(norms, ones);  // [N,D] row broadcast
  return mul(x, scale);
}

Tensor learned_adjacency(const Tensor& h_normalized, const Tensor& weight,
                         const Tensor& mask) {
  require(h_normalized.ndim() == 2 && weight.ndim() == 2 &&
              h_normalized.dim(1) == weight.dim(0),
          "learned_adjacency: shape mismatch");
  const std::size_t z = h_normalized.dim(0);
  require(mask.ndim() == 2 && mask.dim(0) == z && mask.dim(1) == z,
          "learned_adjacency: mask must be ZxZ");
  Tensor embed = matmul(h_normalized, weight);
  Tensor sim = sigmoid(matmul(embed, transpose2d(embed)));
  return add(mul(sim, mask), Tensor::identity(z));
}

Tensor normalize_adjacency(const Tensor& adjacency) {
  require(adjacency.ndim() == 2 && adjacency.dim(0) == adjacency.dim(1),
          "normalize_adjacency: expects a square matrix");
  const std::size_t z = adjacency.dim(0);
  for (std::size_t i = 0; i < z; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < z; ++j)
      degree += adjacency.data()[i * z + j];
    require(degree > 0.0, "normalize_adjacency: zero-degree node");
  }
  Tensor inv_sqrt_deg = pow_elem(row_sum(adjacency), -0.5);      // [Z,1]
  Tensor scale = matmul(inv_sqrt_deg, transpose2d(inv_sqrt_deg));  // [Z,Z]
  return mul(scale, adjacency);
}

Tensor gcn_layer(const Tensor& h, const GcnLayerParams& params,
                 const Tensor& normalized_adjacency, double slope) {
  Tensor propagated = matmul(normalized_adjacency, matmul(h, params.weight));
  return activation(propagated, params.activation, slope);
}

GcnStream::GcnStream(ParamRegistry& reg, const GcnStreamConfig& config,
                     Rng& rng)
    : config_(config) {
  auto init = [&](const std::string& name, std::size_t in, std::size_t out) {
    Tensor w = Tensor::zeros({in, out});
    glorot_init(w, in, out, rng);
    return reg.add(name, w);
  };
  proj_weight_ = init("gcn.proj.weight", config.input_channels, config.hidden);
  proj_bias_ = reg.add("gcn.proj.bias", Tensor::zeros({config.hidden}));
  layers_[0].weight = init("gcn.layer1.weight", config.hidden, config.output);
  layers_[1].weight = init("gcn.layer2.weight", config.output, config.output);
  if (config.separate_similarity) {
    similarity_[0] =
        init("gcn.layer1.sim_weight", config.hidden, config.output);
    similarity_[1] =
        init("gcn.layer2.sim_weight", config.output, config.output);
  }
}

Tensor GcnStream::forward(const Tensor& image, const PixelGraph& graph) const {
  require(image.ndim() == 3 && image.dim(0) == config_.input_channels,
          "gcn_stream: image channel mismatch");
  Tensor nodes = graph_encode(image, graph);  // [Z,C]
  Tensor h = leaky_relu(dense_linear(nodes, proj_weight_, proj_bias_),
                        config_.leaky_slope);
  const Tensor mask = graph.dense_mask();
  for (int l = 0; l < 2; ++l) {
    Tensor hn = normalize_rows(h);
    const Tensor& sim_weight = config_.separate_similarity
                                   ? similarity_[l]
                                   : layers_[l].weight;
    Tensor adj = learned_adjacency(hn, sim_weight, mask);
    Tensor adj_norm = normalize_adjacency(adj);
    h = gcn_layer(h, layers_[l], adj_norm, config_.leaky_slope);
  }
  return graph_decode(h, graph);  // [output,H,W]
}

}  // namespace rsinet
