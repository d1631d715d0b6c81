#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rsinet/tensor.hpp"

namespace rsinet {

// Convolution layer parameters. Weight layout is [out_ch, in_ch, kh, kw]
// for forward convolution. For transposed layers the same buffer is read
// as the adjoint map: the layer input has out_ch channels and the layer
// output has in_ch channels, so a conv and its transpose built from one
// weight are exact adjoints.
struct ConvLayerParams {
  Tensor weight;  // [out_ch, in_ch, kh, kw]
  Tensor bias;    // optional, [out_ch] (forward) / [in_ch] (transposed)
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;
  std::size_t output_padding = 0;  // transposed only
  bool transposed = false;
};

enum class Activation { LeakyRelu, Sigmoid, Linear };

// Elementwise (same-shape) arithmetic.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
// Elementwise power; input must stay strictly positive for non-integer p.
Tensor pow_elem(const Tensor& a, double p);

Tensor matmul(const Tensor& a, const Tensor& b);  // [N,K]x[K,M]
Tensor transpose2d(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor row_sum(const Tensor& a);  // [N,M] -> [N,1]
Tensor sum_all(const Tensor& a);  // -> [1]

Tensor activation(const Tensor& x, Activation kind, double slope = 0.01);
Tensor leaky_relu(const Tensor& x, double slope = 0.01);
Tensor sigmoid(const Tensor& x);

// x:[N,D] @ weight:[D,D'] plus optional row-broadcast bias [D'].
Tensor dense_linear(const Tensor& x, const Tensor& weight,
                    const Tensor& bias = Tensor());

Tensor conv2d(const Tensor& input, const ConvLayerParams& params);
Tensor transpose_conv2d(const Tensor& input, const ConvLayerParams& params);

Tensor concat_channels(const std::vector<Tensor>& xs);  // [N,Ci,H,W]
Tensor global_avg_pool(const Tensor& x);                // -> [N,C,1,1]
Tensor broadcast_spatial(const Tensor& x, std::size_t height,
                         std::size_t width);  // [N,C,1,1] -> [N,C,H,W]

// Mean of -log softmax(logits)[label] over non-ignored pixels.
// logits: [C,H,W] or [N,C,H,W]; labels row-major, one per pixel.
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int32_t>& labels,
                             std::optional<int32_t> ignore_index = {});

// Per-pixel channel softmax, graph-detached (inference output only).
Tensor softmax_channels(const Tensor& logits);

// Number of OpenMP worker threads used inside operators; reads the
// RSINET_THREADS cap once.
int worker_threads();

}  // namespace rsinet
