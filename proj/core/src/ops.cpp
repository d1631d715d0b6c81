#include "rsinet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rsinet {

int worker_threads() {
  static const int n = [] {
    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    if (const char* env = std::getenv("RSINET_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1) threads = std::min(threads, cap);
    }
    return threads;
  }();
  return n;
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
}

void accumulate(const Tensor& t, const std::vector<double>& g) {
  if (!t.tracked()) return;
  auto& dst = t.grad();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.data()[i] + b.data()[i];
  Tensor r = Tensor::make_result(
      a.shape(), std::move(out), {a, b}, [a, b](Tensor::Node& self) mutable {
        accumulate(a, self.grad);
        accumulate(b, self.grad);
      });
  check_finite(r, "add");
  return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.data()[i] - b.data()[i];
  Tensor r = Tensor::make_result(
      a.shape(), std::move(out), {a, b}, [a, b](Tensor::Node& self) mutable {
        accumulate(a, self.grad);
        if (b.tracked()) {
          auto& g = b.grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] -= self.grad[i];
        }
      });
  check_finite(r, "sub");
  return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.data()[i] * b.data()[i];
  Tensor r = Tensor::make_result(
      a.shape(), std::move(out), {a, b}, [a, b](Tensor::Node& self) mutable {
        if (a.tracked()) {
          auto& g = a.grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i] * b.data()[i];
        }
        if (b.tracked()) {
          auto& g = b.grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i] * a.data()[i];
        }
      });
  check_finite(r, "mul");
  return r;
}

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + s;
  Tensor r = Tensor::make_result(
      a.shape(), std::move(out), {a},
      [a](Tensor::Node& self) mutable { accumulate(a, self.grad); });
  check_finite(r, "add_scalar");
  return r;
}

Tensor mul_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  Tensor r = Tensor::make_result(
      a.shape(), std::move(out), {a}, [a, s](Tensor::Node& self) mutable {
        if (a.tracked()) {
          auto& g = a.grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i] * s;
        }
      });
  check_finite(r, "mul_scalar");
  return r;
}

Tensor pow_elem(const Tensor& a, double p) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::pow(a.data()[i], p);
  Tensor r = Tensor::make_result(
      a.shape(), std::move(out), {a}, [a, p](Tensor::Node& self) mutable {
        if (a.tracked()) {
          auto& g = a.grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i] * p * std::pow(a.data()[i], p - 1.0);
        }
      });
  check_finite(r, "pow_elem");
  return r;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(n * m, 0.0);
  const double* pa = a.data();
  const double* pb = b.data();
#pragma omp parallel for num_threads(worker_threads())
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    double* row = out.data() + i * m;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      const double* brow = pb + kk * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += av * brow[j];
    }
  }
  Tensor r = Tensor::make_result(
      {n, m}, std::move(out), {a, b},
      [a, b, n, k, m](Tensor::Node& self) mutable {
        if (a.tracked()) {
          auto& g = a.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
              const double gv = self.grad[i * m + j];
              for (std::size_t kk = 0; kk < k; ++kk)
                g[i * k + kk] += gv * b.data()[kk * m + j];
            }
        }
        if (b.tracked()) {
          auto& g = b.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              const double av = a.data()[i * k + kk];
              for (std::size_t j = 0; j < m; ++j)
                g[kk * m + j] += av * self.grad[i * m + j];
            }
        }
      });
  check_finite(r, "matmul");
  return r;
}

Tensor transpose2d(const Tensor& a) {
  require(a.ndim() == 2, "transpose2d: expects a matrix");
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a.data()[i * m + j];
  return Tensor::make_result(
      {m, n}, std::move(out), {a}, [a, n, m](Tensor::Node& self) mutable {
        if (a.tracked()) {
          auto& g = a.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
              g[i * m + j] += self.grad[j * n + i];
        }
      });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.size(),
          "reshape: element count mismatch " + shape_str(a.shape()) + " -> " +
              shape_str(shape));
  return Tensor::make_result(
      std::move(shape), a.values(), {a},
      [a](Tensor::Node& self) mutable { accumulate(a, self.grad); });
}

Tensor row_sum(const Tensor& a) {
  require(a.ndim() == 2, "row_sum: expects a matrix");
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i] += a.data()[i * m + j];
  Tensor r = Tensor::make_result(
      {n, 1}, std::move(out), {a}, [a, n, m](Tensor::Node& self) mutable {
        if (a.tracked()) {
          auto& g = a.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
              g[i * m + j] += self.grad[i];
        }
      });
  check_finite(r, "row_sum");
  return r;
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor r = Tensor::make_result(
      {1}, {s}, {a}, [a](Tensor::Node& self) mutable {
        if (a.tracked()) {
          auto& g = a.grad();
          for (double& gv : g) gv += self.grad[0];
        }
      });
  check_finite(r, "sum_all");
  return r;
}

Tensor activation(const Tensor& x, Activation kind, double slope) {
  switch (kind) {
    case Activation::LeakyRelu:
      return leaky_relu(x, slope);
    case Activation::Sigmoid:
      return sigmoid(x);
    case Activation::Linear:
      return x;
  }
  fail("activation: unknown kind");
}

Tensor leaky_relu(const Tensor& x, double slope) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    out[i] = v > 0.0 ? v : slope * v;
  }
  Tensor r = Tensor::make_result(
      x.shape(), std::move(out), {x},
      [x, slope](Tensor::Node& self) mutable {
        if (x.tracked()) {
          auto& g = x.grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i] * (x.data()[i] > 0.0 ? 1.0 : slope);
        }
      });
  check_finite(r, "leaky_relu");
  return r;
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  Tensor r = Tensor::make_result(
      x.shape(), std::move(out), {x}, [x](Tensor::Node& self) mutable {
        if (x.tracked()) {
          auto& g = x.grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i] * self.values[i] * (1.0 - self.values[i]);
        }
      });
  check_finite(r, "sigmoid");
  return r;
}

Tensor dense_linear(const Tensor& x, const Tensor& weight,
                    const Tensor& bias) {
  Tensor y = matmul(x, weight);
  if (!bias.defined()) return y;
  require(bias.ndim() == 1 && bias.dim(0) == y.dim(1),
          "dense_linear: bias extent mismatch");
  const std::size_t n = y.dim(0), m = y.dim(1);
  std::vector<double> out(y.values());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bias.data()[j];
  Tensor r = Tensor::make_result(
      y.shape(), std::move(out), {y, bias},
      [y, bias, n, m](Tensor::Node& self) mutable {
        accumulate(y, self.grad);
        if (bias.tracked()) {
          auto& g = bias.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) g[j] += self.grad[i * m + j];
        }
      });
  check_finite(r, "dense_linear");
  return r;
}

namespace {

struct ConvGeom {
  std::size_t n, ci, h, w;      // input
  std::size_t co, kh, kw;       // kernel
  std::size_t oh, ow;           // output
  std::size_t stride, dil, pad, out_pad;
};

ConvGeom conv_geometry(const Tensor& input, const ConvLayerParams& p,
                       bool transposed) {
  require(input.ndim() == 4, "conv2d: input must be [N,C,H,W]");
  require(p.weight.defined() && p.weight.ndim() == 4,
          "conv2d: weight must be [out_ch,in_ch,kh,kw]");
  require(p.stride >= 1 && p.dilation >= 1, "conv2d: stride/dilation >= 1");
  ConvGeom g;
  g.n = input.dim(0);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.kh = p.weight.dim(2);
  g.kw = p.weight.dim(3);
  g.stride = p.stride;
  g.dil = p.dilation;
  g.pad = p.padding;
  g.out_pad = p.output_padding;
  if (!transposed) {
    g.co = p.weight.dim(0);
    g.ci = p.weight.dim(1);
    require(input.dim(1) == g.ci, "conv2d: channel mismatch");
    const std::ptrdiff_t oh =
        (static_cast<std::ptrdiff_t>(g.h + 2 * g.pad) -
         static_cast<std::ptrdiff_t>(g.dil * (g.kh - 1)) - 1) /
            static_cast<std::ptrdiff_t>(g.stride) +
        1;
    const std::ptrdiff_t ow =
        (static_cast<std::ptrdiff_t>(g.w + 2 * g.pad) -
         static_cast<std::ptrdiff_t>(g.dil * (g.kw - 1)) - 1) /
            static_cast<std::ptrdiff_t>(g.stride) +
        1;
    require(oh >= 1 && ow >= 1, "conv2d: non-positive output extent");
    g.oh = static_cast<std::size_t>(oh);
    g.ow = static_cast<std::size_t>(ow);
  } else {
    g.co = p.weight.dim(0);  // transposed input channels
    g.ci = p.weight.dim(1);  // transposed output channels
    require(input.dim(1) == g.co, "transpose_conv2d: channel mismatch");
    g.oh = (g.h - 1) * g.stride + g.dil * (g.kh - 1) + 1 + g.out_pad -
           2 * g.pad;
    g.ow = (g.w - 1) * g.stride + g.dil * (g.kw - 1) + 1 + g.out_pad -
           2 * g.pad;
    require(g.oh >= 1 && g.ow >= 1,
            "transpose_conv2d: non-positive output extent");
  }
  return g;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvLayerParams& params) {
  require(!params.transposed, "conv2d: params marked transposed");
  const ConvGeom g = conv_geometry(input, params, false);
  const Tensor weight = params.weight;
  const Tensor bias = params.bias;
  if (bias.defined())
    require(bias.ndim() == 1 && bias.dim(0) == g.co,
            "conv2d: bias extent mismatch");

  std::vector<double> out(g.n * g.co * g.oh * g.ow, 0.0);
  const double* in = input.data();
  const double* w = weight.data();
#pragma omp parallel for collapse(2) num_threads(worker_threads())
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(g.n); ++n) {
    for (std::ptrdiff_t co = 0; co < static_cast<std::ptrdiff_t>(g.co);
         ++co) {
      const double b = bias.defined() ? bias.data()[co] : 0.0;
      for (std::size_t oh = 0; oh < g.oh; ++oh)
        for (std::size_t ow = 0; ow < g.ow; ++ow) {
          double acc = b;
          for (std::size_t ci = 0; ci < g.ci; ++ci)
            for (std::size_t kh = 0; kh < g.kh; ++kh) {
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(oh * g.stride + kh * g.dil) -
                  static_cast<std::ptrdiff_t>(g.pad);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
              for (std::size_t kw = 0; kw < g.kw; ++kw) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(ow * g.stride + kw * g.dil) -
                    static_cast<std::ptrdiff_t>(g.pad);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w))
                  continue;
                acc += w[((co * g.ci + ci) * g.kh + kh) * g.kw + kw] *
                       in[((n * g.ci + ci) * g.h + ih) * g.w + iw];
              }
            }
          out[((n * g.co + co) * g.oh + oh) * g.ow + ow] = acc;
        }
    }
  }

  std::vector<Tensor> parents = {input, weight};
  if (bias.defined()) parents.push_back(bias);
  Tensor r = Tensor::make_result(
      {g.n, g.co, g.oh, g.ow}, std::move(out), std::move(parents),
      [input, weight, bias, g](Tensor::Node& self) mutable {
        const double* go = self.grad.data();
        const double* w = weight.data();
        const double* in = input.data();
        if (input.tracked()) {
          double* gi = input.grad().data();
#pragma omp parallel for collapse(2) num_threads(worker_threads())
          for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(g.n);
               ++n)
            for (std::ptrdiff_t ci = 0;
                 ci < static_cast<std::ptrdiff_t>(g.ci); ++ci)
              for (std::size_t ih = 0; ih < g.h; ++ih)
                for (std::size_t iw = 0; iw < g.w; ++iw) {
                  double acc = 0.0;
                  for (std::size_t co = 0; co < g.co; ++co)
                    for (std::size_t kh = 0; kh < g.kh; ++kh) {
                      const std::ptrdiff_t num_h =
                          static_cast<std::ptrdiff_t>(ih + g.pad) -
                          static_cast<std::ptrdiff_t>(kh * g.dil);
                      if (num_h < 0 || num_h % g.stride) continue;
                      const std::size_t oh = num_h / g.stride;
                      if (oh >= g.oh) continue;
                      for (std::size_t kw = 0; kw < g.kw; ++kw) {
                        const std::ptrdiff_t num_w =
                            static_cast<std::ptrdiff_t>(iw + g.pad) -
                            static_cast<std::ptrdiff_t>(kw * g.dil);
                        if (num_w < 0 || num_w % g.stride) continue;
                        const std::size_t ow = num_w / g.stride;
                        if (ow >= g.ow) continue;
                        acc += w[((co * g.ci + ci) * g.kh + kh) * g.kw + kw] *
                               go[((n * g.co + co) * g.oh + oh) * g.ow + ow];
                      }
                    }
                  gi[((n * g.ci + ci) * g.h + ih) * g.w + iw] += acc;
                }
        }
        if (weight.tracked()) {
          double* gw = weight.grad().data();
#pragma omp parallel for num_threads(worker_threads())
          for (std::ptrdiff_t co = 0; co < static_cast<std::ptrdiff_t>(g.co);
               ++co)
            for (std::size_t ci = 0; ci < g.ci; ++ci)
              for (std::size_t kh = 0; kh < g.kh; ++kh)
                for (std::size_t kw = 0; kw < g.kw; ++kw) {
                  double acc = 0.0;
                  for (std::size_t n = 0; n < g.n; ++n)
                    for (std::size_t oh = 0; oh < g.oh; ++oh) {
                      const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(
                                                    oh * g.stride +
                                                    kh * g.dil) -
                                                static_cast<std::ptrdiff_t>(
                                                    g.pad);
                      if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h))
                        continue;
                      for (std::size_t ow = 0; ow < g.ow; ++ow) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(
                                                      ow * g.stride +
                                                      kw * g.dil) -
                                                  static_cast<std::ptrdiff_t>(
                                                      g.pad);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w))
                          continue;
                        acc +=
                            go[((n * g.co + co) * g.oh + oh) * g.ow + ow] *
                            in[((n * g.ci + ci) * g.h + ih) * g.w + iw];
                      }
                    }
                  gw[((co * g.ci + ci) * g.kh + kh) * g.kw + kw] += acc;
                }
        }
        if (bias.defined() && bias.tracked()) {
          double* gb = bias.grad().data();
          for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t co = 0; co < g.co; ++co) {
              double acc = 0.0;
              for (std::size_t i = 0; i < g.oh * g.ow; ++i)
                acc += go[(n * g.co + co) * g.oh * g.ow + i];
              gb[co] += acc;
            }
        }
      });
  check_finite(r, "conv2d");
  return r;
}

Tensor transpose_conv2d(const Tensor& input, const ConvLayerParams& params) {
  require(params.transposed, "transpose_conv2d: params not marked transposed");
  const ConvGeom g = conv_geometry(input, params, true);
  const Tensor weight = params.weight;
  const Tensor bias = params.bias;
  if (bias.defined())
    require(bias.ndim() == 1 && bias.dim(0) == g.ci,
            "transpose_conv2d: bias extent mismatch");

  std::vector<double> out(g.n * g.ci * g.oh * g.ow, 0.0);
  const double* in = input.data();
  const double* w = weight.data();
#pragma omp parallel for collapse(2) num_threads(worker_threads())
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(g.n); ++n) {
    for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(g.ci);
         ++ci) {
      const double b = bias.defined() ? bias.data()[ci] : 0.0;
      for (std::size_t oh = 0; oh < g.oh; ++oh)
        for (std::size_t ow = 0; ow < g.ow; ++ow) {
          double acc = b;
          for (std::size_t co = 0; co < g.co; ++co)
            for (std::size_t kh = 0; kh < g.kh; ++kh) {
              const std::ptrdiff_t num_h =
                  static_cast<std::ptrdiff_t>(oh + g.pad) -
                  static_cast<std::ptrdiff_t>(kh * g.dil);
              if (num_h < 0 || num_h % g.stride) continue;
              const std::size_t ih = num_h / g.stride;
              if (ih >= g.h) continue;
              for (std::size_t kw = 0; kw < g.kw; ++kw) {
                const std::ptrdiff_t num_w =
                    static_cast<std::ptrdiff_t>(ow + g.pad) -
                    static_cast<std::ptrdiff_t>(kw * g.dil);
                if (num_w < 0 || num_w % g.stride) continue;
                const std::size_t iw = num_w / g.stride;
                if (iw >= g.w) continue;
                acc += w[((co * g.ci + ci) * g.kh + kh) * g.kw + kw] *
                       in[((n * g.co + co) * g.h + ih) * g.w + iw];
              }
            }
          out[((n * g.ci + ci) * g.oh + oh) * g.ow + ow] = acc;
        }
    }
  }

  std::vector<Tensor> parents = {input, weight};
  if (bias.defined()) parents.push_back(bias);
  Tensor r = Tensor::make_result(
      {g.n, g.ci, g.oh, g.ow}, std::move(out), std::move(parents),
      [input, weight, bias, g](Tensor::Node& self) mutable {
        const double* go = self.grad.data();
        const double* w = weight.data();
        const double* in = input.data();
        if (input.tracked()) {
          double* gi = input.grad().data();
#pragma omp parallel for collapse(2) num_threads(worker_threads())
          for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(g.n);
               ++n)
            for (std::ptrdiff_t co = 0;
                 co < static_cast<std::ptrdiff_t>(g.co); ++co)
              for (std::size_t ih = 0; ih < g.h; ++ih)
                for (std::size_t iw = 0; iw < g.w; ++iw) {
                  double acc = 0.0;
                  for (std::size_t ci = 0; ci < g.ci; ++ci)
                    for (std::size_t kh = 0; kh < g.kh; ++kh) {
                      const std::ptrdiff_t oh =
                          static_cast<std::ptrdiff_t>(ih * g.stride +
                                                      kh * g.dil) -
                          static_cast<std::ptrdiff_t>(g.pad);
                      if (oh < 0 || oh >= static_cast<std::ptrdiff_t>(g.oh))
                        continue;
                      for (std::size_t kw = 0; kw < g.kw; ++kw) {
                        const std::ptrdiff_t ow =
                            static_cast<std::ptrdiff_t>(iw * g.stride +
                                                        kw * g.dil) -
                            static_cast<std::ptrdiff_t>(g.pad);
                        if (ow < 0 || ow >= static_cast<std::ptrdiff_t>(g.ow))
                          continue;
                        acc += w[((co * g.ci + ci) * g.kh + kh) * g.kw + kw] *
                               go[((n * g.ci + ci) * g.oh + oh) * g.ow + ow];
                      }
                    }
                  gi[((n * g.co + co) * g.h + ih) * g.w + iw] += acc;
                }
        }
        if (weight.tracked()) {
          double* gw = weight.grad().data();
#pragma omp parallel for num_threads(worker_threads())
          for (std::ptrdiff_t co = 0; co < static_cast<std::ptrdiff_t>(g.co);
               ++co)
            for (std::size_t ci = 0; ci < g.ci; ++ci)
              for (std::size_t kh = 0; kh < g.kh; ++kh)
                for (std::size_t kw = 0; kw < g.kw; ++kw) {
                  double acc = 0.0;
                  for (std::size_t n = 0; n < g.n; ++n)
                    for (std::size_t ih = 0; ih < g.h; ++ih) {
                      const std::ptrdiff_t oh =
                          static_cast<std::ptrdiff_t>(ih * g.stride +
                                                      kh * g.dil) -
                          static_cast<std::ptrdiff_t>(g.pad);
                      if (oh < 0 || oh >= static_cast<std::ptrdiff_t>(g.oh))
                        continue;
                      for (std::size_t iw = 0; iw < g.w; ++iw) {
                        const std::ptrdiff_t ow =
                            static_cast<std::ptrdiff_t>(iw * g.stride +
                                                        kw * g.dil) -
                            static_cast<std::ptrdiff_t>(g.pad);
                        if (ow < 0 ||
                            ow >= static_cast<std::ptrdiff_t>(g.ow))
                          continue;
                        acc +=
                            in[((n * g.co + co) * g.h + ih) * g.w + iw] *
                            go[((n * g.ci + ci) * g.oh + oh) * g.ow + ow];
                      }
                    }
                  gw[((co * g.ci + ci) * g.kh + kh) * g.kw + kw] += acc;
                }
        }
        if (bias.defined() && bias.tracked()) {
          double* gb = bias.grad().data();
          for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t ci = 0; ci < g.ci; ++ci) {
              double acc = 0.0;
              for (std::size_t i = 0; i < g.oh * g.ow; ++i)
                acc += go[(n * g.ci + ci) * g.oh * g.ow + i];
              gb[ci] += acc;
            }
        }
      });
  check_finite(r, "transpose_conv2d");
  return r;
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "concat_channels: empty input list");
  const Tensor& first = xs.front();
  require(first.ndim() == 4, "concat_channels: inputs must be [N,C,H,W]");
  const std::size_t n = first.dim(0), h = first.dim(2), w = first.dim(3);
  std::size_t c_total = 0;
  for (const Tensor& x : xs) {
    require(x.ndim() == 4 && x.dim(0) == n && x.dim(2) == h && x.dim(3) == w,
            "concat_channels: spatial/batch mismatch");
    c_total += x.dim(1);
  }
  const std::size_t plane = h * w;
  std::vector<double> out(n * c_total * plane);
  std::size_t c_off = 0;
  for (const Tensor& x : xs) {
    const std::size_t c = x.dim(1);
    for (std::size_t b = 0; b < n; ++b)
      std::copy(x.data() + b * c * plane, x.data() + (b + 1) * c * plane,
                out.data() + (b * c_total + c_off) * plane);
    c_off += c;
  }
  std::vector<Tensor> parents(xs.begin(), xs.end());
  Tensor r = Tensor::make_result(
      {n, c_total, h, w}, std::move(out), parents,
      [parents, n, c_total, plane](Tensor::Node& self) mutable {
        std::size_t c_off = 0;
        for (Tensor& x : parents) {
          const std::size_t c = x.dim(1);
          if (x.tracked()) {
            auto& g = x.grad();
            for (std::size_t b = 0; b < n; ++b) {
              const double* src =
                  self.grad.data() + (b * c_total + c_off) * plane;
              double* dst = g.data() + b * c * plane;
              for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
            }
          }
          c_off += c;
        }
      });
  check_finite(r, "concat_channels");
  return r;
}

Tensor global_avg_pool(const Tensor& x) {
  require(x.ndim() == 4, "global_avg_pool: input must be [N,C,H,W]");
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<double> out(n * c, 0.0);
  for (std::size_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < plane; ++j) acc += x.data()[i * plane + j];
    out[i] = acc / static_cast<double>(plane);
  }
  Tensor r = Tensor::make_result(
      {n, c, 1, 1}, std::move(out), {x},
      [x, n, c, plane](Tensor::Node& self) mutable {
        if (x.tracked()) {
          auto& g = x.grad();
          for (std::size_t i = 0; i < n * c; ++i) {
            const double gv = self.grad[i] / static_cast<double>(plane);
            for (std::size_t j = 0; j < plane; ++j) g[i * plane + j] += gv;
          }
        }
      });
  check_finite(r, "global_avg_pool");
  return r;
}

Tensor broadcast_spatial(const Tensor& x, std::size_t height,
                         std::size_t width) {
  require(x.ndim() == 4 && x.dim(2) == 1 && x.dim(3) == 1,
          "broadcast_spatial: input must be [N,C,1,1]");
  const std::size_t n = x.dim(0), c = x.dim(1), plane = height * width;
  std::vector<double> out(n * c * plane);
  for (std::size_t i = 0; i < n * c; ++i)
    std::fill(out.begin() + i * plane, out.begin() + (i + 1) * plane,
              x.data()[i]);
  Tensor r = Tensor::make_result(
      {n, c, height, width}, std::move(out), {x},
      [x, n, c, plane](Tensor::Node& self) mutable {
        if (x.tracked()) {
          auto& g = x.grad();
          for (std::size_t i = 0; i < n * c; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < plane; ++j)
              acc += self.grad[i * plane + j];
            g[i] += acc;
          }
        }
      });
  check_finite(r, "broadcast_spatial");
  return r;
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int32_t>& labels,
                             std::optional<int32_t> ignore_index) {
  Tensor x = logits;
  if (x.ndim() == 3) x = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  require(x.ndim() == 4, "softmax_cross_entropy: logits must be 4-d");
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  require(labels.size() == n * plane,
          "softmax_cross_entropy: label count mismatch");

  auto probs = std::make_shared<std::vector<double>>(x.size());
  double loss = 0.0;
  std::size_t counted = 0;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < plane; ++p) {
      const int32_t label = labels[b * plane + p];
      double maxv = -1e300;
      for (std::size_t k = 0; k < c; ++k)
        maxv = std::max(maxv, x.data()[(b * c + k) * plane + p]);
      double denom = 0.0;
      for (std::size_t k = 0; k < c; ++k)
        denom += std::exp(x.data()[(b * c + k) * plane + p] - maxv);
      for (std::size_t k = 0; k < c; ++k)
        (*probs)[(b * c + k) * plane + p] =
            std::exp(x.data()[(b * c + k) * plane + p] - maxv) / denom;
      if (ignore_index && label == *ignore_index) continue;
      require(label >= 0 && static_cast<std::size_t>(label) < c,
              "softmax_cross_entropy: label out of range");
      loss -= std::log((*probs)[(b * c + label) * plane + p]);
      ++counted;
    }
  require(counted > 0, "softmax_cross_entropy: no non-ignored pixels");
  loss /= static_cast<double>(counted);

  Tensor r = Tensor::make_result(
      {1}, {loss}, {x},
      [x, labels, ignore_index, probs, n, c, plane,
       counted](Tensor::Node& self) mutable {
        if (!x.tracked()) return;
        auto& g = x.grad();
        const double scale = self.grad[0] / static_cast<double>(counted);
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t p = 0; p < plane; ++p) {
            const int32_t label = labels[b * plane + p];
            if (ignore_index && label == *ignore_index) continue;
            for (std::size_t k = 0; k < c; ++k) {
              double d = (*probs)[(b * c + k) * plane + p];
              if (static_cast<std::size_t>(label) == k) d -= 1.0;
              g[(b * c + k) * plane + p] += scale * d;
            }
          }
      });
  check_finite(r, "softmax_cross_entropy");
  return r;
}

Tensor softmax_channels(const Tensor& logits) {
  Tensor x = logits;
  bool squeeze = false;
  Shape orig = x.shape();
  if (x.ndim() == 3) {
    x = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
    squeeze = true;
  }
  require(x.ndim() == 4, "softmax_channels: logits must be 4-d");
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<double> out(x.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < plane; ++p) {
      double maxv = -1e300;
      for (std::size_t k = 0; k < c; ++k)
        maxv = std::max(maxv, x.data()[(b * c + k) * plane + p]);
      double denom = 0.0;
      for (std::size_t k = 0; k < c; ++k)
        denom += std::exp(x.data()[(b * c + k) * plane + p] - maxv);
      for (std::size_t k = 0; k < c; ++k)
        out[(b * c + k) * plane + p] =
            std::exp(x.data()[(b * c + k) * plane + p] - maxv) / denom;
    }
  Tensor r = Tensor::from_data(squeeze ? orig : x.shape(), std::move(out));
  check_finite(r, "softmax_channels");
  return r;
}

}  // namespace rsinet
