#pragma once

#include "rsinet/nn.hpp"
#include "rsinet/ops.hpp"
#include "rsinet/superpixel.hpp"
#include "rsinet/tensor.hpp"

namespace rsinet {

// A = Sigmoid((Hn W)(Hn W)^T) .* M + I, where Hn is the row-L2-normalized
// layer input and M the (constant) adjacency mask. Symmetric, diagonal
// exactly 1, masked off-diagonals in (0,1).
Tensor learned_adjacency(const Tensor& h_normalized, const Tensor& weight,
                         const Tensor& mask);

// D^{-1/2} A D^{-1/2} with d_ii the row sum of A; differentiable in A.
Tensor normalize_adjacency(const Tensor& adjacency);

// Row-wise L2 normalization, eps-guarded.
Tensor normalize_rows(const Tensor& x, double eps = 1e-12);

struct GcnLayerParams {
  Tensor weight;  // [D_in, D_out]
  Activation activation = Activation::LeakyRelu;
};

// sigma(A~ H W).
Tensor gcn_layer(const Tensor& h, const GcnLayerParams& params,
                 const Tensor& normalized_adjacency, double slope = 0.01);

struct GcnStreamConfig {
  std::size_t input_channels = 3;
  std::size_t hidden = 128;   // projection width and first layer input
  std::size_t output = 256;   // both layer outputs
  double leaky_slope = 0.01;
  // When false (default) the Eq.-11 similarity embedding reuses the
  // propagation weight of the same layer.
  bool separate_similarity = false;
};

// Two GCN layers over the superpixel graph with a learnable masked
// adjacency recomputed per layer, plus an input projection and a graph
// decode back to a pixel raster.
class GcnStream {
 public:
  GcnStream(ParamRegistry& reg, const GcnStreamConfig& config, Rng& rng);

  // image: [C,H,W] -> [output,H,W]
  Tensor forward(const Tensor& image, const PixelGraph& graph) const;
  const GcnStreamConfig& config() const { return config_; }

 private:
  GcnStreamConfig config_;
  Tensor proj_weight_;  // [C, hidden]
  Tensor proj_bias_;    // [hidden]
  GcnLayerParams layers_[2];
  Tensor similarity_[2];  // defined only with separate_similarity
};

}  // namespace rsinet
