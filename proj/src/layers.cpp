// Copyright 2026 The VAP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vap/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vap {

namespace {

struct ConvGeom {
  int64_t n, c, t, h, w;        // input
  int64_t o, kt, kh, kw;        // kernel
  int64_t ot, oh, ow;           // output
};

int64_t out_extent(int64_t in, int64_t k, int64_t s, int64_t p,
                   const char* axis) {
  const int64_t padded = in + 2 * p;
  if (k > padded) {
    throw GeometryError(std::string("conv/pool kernel ") + std::to_string(k) +
                        " exceeds padded input " + std::to_string(padded) +
                        " on axis " + axis);
  }
  return (padded - k) / s + 1;
}

void check_triple(const Triple& t, int min, const char* what) {
  for (int v : t) {
    if (v < min) {
      throw ArgumentError(std::string(what) + " components must be >= " +
                          std::to_string(min));
    }
  }
}

ConvGeom conv_geometry(const Tensor& input, const Tensor& weights,
                       const Triple& stride, const Triple& pad) {
  if (input.rank() != 5) {
    throw ShapeError("conv3d: input must be (N,C,T,H,W), got " +
                     input.shape().str());
  }
  if (weights.rank() != 5) {
    throw ShapeError("conv3d: weights must be (O,C,kT,kH,kW), got " +
                     weights.shape().str());
  }
  if (weights.shape()[1] != input.shape()[1]) {
    throw ShapeError("conv3d: input channels " +
                     std::to_string(input.shape()[1]) +
                     " vs kernel channels " +
                     std::to_string(weights.shape()[1]));
  }
  check_triple(stride, 1, "stride");
  check_triple(pad, 0, "pad");
  ConvGeom g;
  g.n = input.shape()[0];
  g.c = input.shape()[1];
  g.t = input.shape()[2];
  g.h = input.shape()[3];
  g.w = input.shape()[4];
  g.o = weights.shape()[0];
  g.kt = weights.shape()[2];
  g.kh = weights.shape()[3];
  g.kw = weights.shape()[4];
  g.ot = out_extent(g.t, g.kt, stride[0], pad[0], "T");
  g.oh = out_extent(g.h, g.kh, stride[1], pad[1], "H");
  g.ow = out_extent(g.w, g.kw, stride[2], pad[2], "W");
  return g;
}

// Valid output range [lo, hi) for one axis and one kernel offset:
// in = out*stride + k - pad must land in [0, extent).
inline void valid_range(int64_t extent, int64_t out_extent, int64_t stride,
                        int64_t k, int64_t pad, int64_t& lo, int64_t& hi) {
  const int64_t shift = k - pad;  // in = out*stride + shift
  lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  // out*stride + shift <= extent-1  =>  out <= (extent-1-shift)/stride
  const int64_t top = extent - 1 - shift;
  hi = top < 0 ? 0 : top / stride + 1;
  lo = std::min(lo, out_extent);
  hi = std::min(hi, out_extent);
  if (hi < lo) hi = lo;
}

}  // namespace

Tensor conv3d_forward(const Tensor& input, const Tensor& weights,
                      const Tensor& bias, const Triple& stride,
                      const Triple& pad) {
  const ConvGeom g = conv_geometry(input, weights, stride, pad);
  if (bias.rank() != 1 || bias.shape()[0] != g.o) {
    throw ShapeError("conv3d: bias must be (" + std::to_string(g.o) +
                     "), got " + bias.shape().str());
  }
  Tensor out(Shape{g.n, g.o, g.ot, g.oh, g.ow});

  const int64_t in_chw = g.t * g.h * g.w;
  const int64_t out_plane = g.ot * g.oh * g.ow;
  std::vector<double> acc(static_cast<size_t>(out_plane));
  const float* in_data = input.data();
  const float* w_data = weights.data();
  float* out_data = out.data();

  for (int64_t n = 0; n < g.n; ++n) {
    for (int64_t oc = 0; oc < g.o; ++oc) {
      std::fill(acc.begin(), acc.end(), static_cast<double>(bias[oc]));
      for (int64_t ic = 0; ic < g.c; ++ic) {
        const float* in_base = in_data + (n * g.c + ic) * in_chw;
        const float* w_base =
            w_data + (oc * g.c + ic) * g.kt * g.kh * g.kw;
        for (int64_t kt = 0; kt < g.kt; ++kt) {
          int64_t ot_lo, ot_hi;
          valid_range(g.t, g.ot, stride[0], kt, pad[0], ot_lo, ot_hi);
          for (int64_t kh = 0; kh < g.kh; ++kh) {
            int64_t oh_lo, oh_hi;
            valid_range(g.h, g.oh, stride[1], kh, pad[1], oh_lo, oh_hi);
            for (int64_t kw = 0; kw < g.kw; ++kw) {
              int64_t ow_lo, ow_hi;
              valid_range(g.w, g.ow, stride[2], kw, pad[2], ow_lo, ow_hi);
              const double wv = w_base[(kt * g.kh + kh) * g.kw + kw];
              if (wv == 0.0 || ow_hi <= ow_lo) continue;
              const int64_t wshift = kw - pad[2];
              for (int64_t ot = ot_lo; ot < ot_hi; ++ot) {
                const int64_t it = ot * stride[0] + kt - pad[0];
                for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                  const int64_t ih = oh * stride[1] + kh - pad[1];
                  const float* in_row = in_base + (it * g.h + ih) * g.w;
                  double* acc_row = acc.data() + (ot * g.oh + oh) * g.ow;
                  if (stride[2] == 1) {
                    const float* src = in_row + wshift;
                    for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                      acc_row[ow] += wv * src[ow];
                    }
                  } else {
                    for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                      acc_row[ow] += wv * in_row[ow * stride[2] + wshift];
                    }
                  }
                }
              }
            }
          }
        }
      }
      float* dst = out_data + (n * g.o + oc) * out_plane;
      for (int64_t i = 0; i < out_plane; ++i) {
        dst[i] = static_cast<float>(acc[i]);
      }
    }
  }
  return out;
}

Conv3dGrads conv3d_backward(const Tensor& input, const Tensor& weights,
                            const Tensor& grad_output, const Triple& stride,
                            const Triple& pad) {
  const ConvGeom g = conv_geometry(input, weights, stride, pad);
  const Shape expect{g.n, g.o, g.ot, g.oh, g.ow};
  if (grad_output.shape() != expect) {
    throw ShapeError("conv3d_backward: grad_output shape " +
                     grad_output.shape().str() + " but forward produced " +
                     expect.str());
  }

  Conv3dGrads grads;
  grads.input = Tensor(input.shape());
  grads.weights = Tensor(weights.shape());
  grads.bias = Tensor(Shape{g.o});

  const int64_t in_chw = g.t * g.h * g.w;
  const int64_t out_plane = g.ot * g.oh * g.ow;
  const float* in_data = input.data();
  const float* w_data = weights.data();
  const float* go_data = grad_output.data();

  // Input gradient: per (n, ic) plane in doubles, scattering the shifted
  // output-gradient rows weighted by each kernel tap.
  std::vector<double> gin(static_cast<size_t>(in_chw));
  for (int64_t n = 0; n < g.n; ++n) {
    for (int64_t ic = 0; ic < g.c; ++ic) {
      std::fill(gin.begin(), gin.end(), 0.0);
      for (int64_t oc = 0; oc < g.o; ++oc) {
        const float* go_base = go_data + (n * g.o + oc) * out_plane;
        const float* w_base =
            w_data + (oc * g.c + ic) * g.kt * g.kh * g.kw;
        for (int64_t kt = 0; kt < g.kt; ++kt) {
          int64_t ot_lo, ot_hi;
          valid_range(g.t, g.ot, stride[0], kt, pad[0], ot_lo, ot_hi);
          for (int64_t kh = 0; kh < g.kh; ++kh) {
            int64_t oh_lo, oh_hi;
            valid_range(g.h, g.oh, stride[1], kh, pad[1], oh_lo, oh_hi);
            for (int64_t kw = 0; kw < g.kw; ++kw) {
              int64_t ow_lo, ow_hi;
              valid_range(g.w, g.ow, stride[2], kw, pad[2], ow_lo, ow_hi);
              const double wv = w_base[(kt * g.kh + kh) * g.kw + kw];
              if (wv == 0.0 || ow_hi <= ow_lo) continue;
              const int64_t wshift = kw - pad[2];
              for (int64_t ot = ot_lo; ot < ot_hi; ++ot) {
                const int64_t it = ot * stride[0] + kt - pad[0];
                for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                  const int64_t ih = oh * stride[1] + kh - pad[1];
                  const float* go_row = go_base + (ot * g.oh + oh) * g.ow;
                  double* gin_row = gin.data() + (it * g.h + ih) * g.w;
                  if (stride[2] == 1) {
                    double* dst = gin_row + wshift;
                    for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                      dst[ow] += wv * go_row[ow];
                    }
                  } else {
                    for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                      gin_row[ow * stride[2] + wshift] += wv * go_row[ow];
                    }
                  }
                }
              }
            }
          }
        }
      }
      float* dst = grads.input.data() + (n * g.c + ic) * in_chw;
      for (int64_t i = 0; i < in_chw; ++i) {
        dst[i] = static_cast<float>(gin[i]);
      }
    }
  }

  // Weight gradient: one double accumulator per tap.
  float* gw_data = grads.weights.data();
  for (int64_t oc = 0; oc < g.o; ++oc) {
    for (int64_t ic = 0; ic < g.c; ++ic) {
      for (int64_t kt = 0; kt < g.kt; ++kt) {
        int64_t ot_lo, ot_hi;
        valid_range(g.t, g.ot, stride[0], kt, pad[0], ot_lo, ot_hi);
        for (int64_t kh = 0; kh < g.kh; ++kh) {
          int64_t oh_lo, oh_hi;
          valid_range(g.h, g.oh, stride[1], kh, pad[1], oh_lo, oh_hi);
          for (int64_t kw = 0; kw < g.kw; ++kw) {
            int64_t ow_lo, ow_hi;
            valid_range(g.w, g.ow, stride[2], kw, pad[2], ow_lo, ow_hi);
            const int64_t wshift = kw - pad[2];
            double acc = 0.0;
            for (int64_t n = 0; n < g.n; ++n) {
              const float* in_base = in_data + (n * g.c + ic) * in_chw;
              const float* go_base = go_data + (n * g.o + oc) * out_plane;
              for (int64_t ot = ot_lo; ot < ot_hi; ++ot) {
                const int64_t it = ot * stride[0] + kt - pad[0];
                for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                  const int64_t ih = oh * stride[1] + kh - pad[1];
                  const float* in_row = in_base + (it * g.h + ih) * g.w;
                  const float* go_row = go_base + (ot * g.oh + oh) * g.ow;
                  if (stride[2] == 1) {
                    const float* src = in_row + wshift;
                    for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                      acc += static_cast<double>(go_row[ow]) * src[ow];
                    }
                  } else {
                    for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                      acc += static_cast<double>(go_row[ow]) *
                             in_row[ow * stride[2] + wshift];
                    }
                  }
                }
              }
            }
            gw_data[(oc * g.c + ic) * g.kt * g.kh * g.kw +
                    (kt * g.kh + kh) * g.kw + kw] = static_cast<float>(acc);
          }
        }
      }
    }
  }

  // Bias gradient.
  for (int64_t oc = 0; oc < g.o; ++oc) {
    double acc = 0.0;
    for (int64_t n = 0; n < g.n; ++n) {
      const float* go_base = go_data + (n * g.o + oc) * out_plane;
      for (int64_t i = 0; i < out_plane; ++i) acc += go_base[i];
    }
    grads.bias[oc] = static_cast<float>(acc);
  }
  return grads;
}

Pool3dResult maxpool3d_forward(const Tensor& input, const Triple& kernel,
                               const Triple& stride) {
  if (input.rank() != 5) {
    throw ShapeError("maxpool3d: input must be (N,C,T,H,W), got " +
                     input.shape().str());
  }
  check_triple(kernel, 1, "kernel");
  check_triple(stride, 1, "stride");
  const int64_t N = input.shape()[0], C = input.shape()[1],
                T = input.shape()[2], H = input.shape()[3],
                W = input.shape()[4];
  const int64_t OT = out_extent(T, kernel[0], stride[0], 0, "T");
  const int64_t OH = out_extent(H, kernel[1], stride[1], 0, "H");
  const int64_t OW = out_extent(W, kernel[2], stride[2], 0, "W");

  Pool3dResult res;
  res.output = Tensor(Shape{N, C, OT, OH, OW});
  res.argmax.resize(static_cast<size_t>(res.output.size()));

  const float* in_data = input.data();
  float* out_data = res.output.data();
  int64_t* am = res.argmax.data();
  int64_t out_i = 0;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const int64_t base = (n * C + c) * T * H * W;
      for (int64_t ot = 0; ot < OT; ++ot) {
        for (int64_t oh = 0; oh < OH; ++oh) {
          for (int64_t ow = 0; ow < OW; ++ow) {
            const int64_t t0 = ot * stride[0], h0 = oh * stride[1],
                          w0 = ow * stride[2];
            float best = -std::numeric_limits<float>::infinity();
            int64_t best_idx = -1;
            for (int64_t kt = 0; kt < kernel[0]; ++kt) {
              for (int64_t kh = 0; kh < kernel[1]; ++kh) {
                const int64_t row = base + ((t0 + kt) * H + h0 + kh) * W + w0;
                for (int64_t kw = 0; kw < kernel[2]; ++kw) {
                  const float v = in_data[row + kw];
                  // strict > keeps the lowest flat index on ties
                  if (v > best) {
                    best = v;
                    best_idx = row + kw;
                  }
                }
              }
            }
            out_data[out_i] = best;
            am[out_i] = best_idx;
            ++out_i;
          }
        }
      }
    }
  }
  return res;
}

Tensor maxpool3d_backward(const Shape& input_shape,
                          const std::vector<int64_t>& argmax,
                          const Tensor& grad_output) {
  if (static_cast<int64_t>(argmax.size()) != grad_output.size()) {
    throw ShapeError("maxpool3d_backward: argmax size " +
                     std::to_string(argmax.size()) + " vs grad_output " +
                     grad_output.shape().str());
  }
  Tensor gin(input_shape);
  const int64_t n = grad_output.size();
  for (int64_t i = 0; i < n; ++i) {
    const int64_t idx = argmax[static_cast<size_t>(i)];
    if (idx < 0 || idx >= gin.size()) {
      throw ShapeError("maxpool3d_backward: argmax entry out of range");
    }
    gin[idx] += grad_output[i];
  }
  return gin;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape());
  const float* src = input.data();
  float* dst = out.data();
  const int64_t n = input.size();
  for (int64_t i = 0; i < n; ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  if (input.shape() != grad_output.shape()) {
    throw ShapeError("relu_backward: shape mismatch " + input.shape().str() +
                     " vs " + grad_output.shape().str());
  }
  Tensor gin(input.shape());
  const float* x = input.data();
  const float* go = grad_output.data();
  float* dst = gin.data();
  const int64_t n = input.size();
  for (int64_t i = 0; i < n; ++i) dst[i] = x[i] > 0.0f ? go[i] : 0.0f;
  return gin;
}

Tensor sigmoid(const Tensor& input) {
  Tensor out(input.shape());
  const float* src = input.data();
  float* dst = out.data();
  const int64_t n = input.size();
  for (int64_t i = 0; i < n; ++i) {
    dst[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(src[i]))));
  }
  return out;
}

Tensor sigmoid_backward(const Tensor& output, const Tensor& grad_output) {
  if (output.shape() != grad_output.shape()) {
    throw ShapeError("sigmoid_backward: shape mismatch");
  }
  Tensor gin(output.shape());
  const float* p = output.data();
  const float* go = grad_output.data();
  float* dst = gin.data();
  const int64_t n = output.size();
  for (int64_t i = 0; i < n; ++i) dst[i] = go[i] * p[i] * (1.0f - p[i]);
  return gin;
}

namespace {
void check_fc(const Tensor& input, const Tensor& weights) {
  if (input.rank() != 2 || weights.rank() != 2) {
    throw ShapeError("fc: input and weights must be rank 2, got " +
                     input.shape().str() + " and " + weights.shape().str());
  }
  if (input.shape()[1] != weights.shape()[1]) {
    throw ShapeError("fc: input features " + std::to_string(input.shape()[1]) +
                     " vs weight features " +
                     std::to_string(weights.shape()[1]));
  }
}
}  // namespace

Tensor fc_forward(const Tensor& input, const Tensor& weights,
                  const Tensor& bias) {
  check_fc(input, weights);
  const int64_t N = input.shape()[0], D = input.shape()[1],
                K = weights.shape()[0];
  if (bias.rank() != 1 || bias.shape()[0] != K) {
    throw ShapeError("fc: bias must be (" + std::to_string(K) + "), got " +
                     bias.shape().str());
  }
  Tensor out(Shape{N, K});
  const float* in = input.data();
  const float* w = weights.data();
  float* dst = out.data();
  for (int64_t n = 0; n < N; ++n) {
    const float* xrow = in + n * D;
    for (int64_t k = 0; k < K; ++k) {
      const float* wrow = w + k * D;
      double acc = bias[k];
      for (int64_t d = 0; d < D; ++d) {
        acc += static_cast<double>(xrow[d]) * wrow[d];
      }
      dst[n * K + k] = static_cast<float>(acc);
    }
  }
  return out;
}

FcGrads fc_backward(const Tensor& input, const Tensor& weights,
                    const Tensor& grad_output) {
  check_fc(input, weights);
  const int64_t N = input.shape()[0], D = input.shape()[1],
                K = weights.shape()[0];
  if (grad_output.shape() != Shape{N, K}) {
    throw ShapeError("fc_backward: grad_output shape " +
                     grad_output.shape().str() + ", expected (" +
                     std::to_string(N) + ", " + std::to_string(K) + ")");
  }
  FcGrads grads;
  grads.input = Tensor(Shape{N, D});
  grads.weights = Tensor(Shape{K, D});
  grads.bias = Tensor(Shape{K});

  const float* in = input.data();
  const float* w = weights.data();
  const float* go = grad_output.data();

  std::vector<double> row(static_cast<size_t>(D));
  for (int64_t n = 0; n < N; ++n) {
    std::fill(row.begin(), row.end(), 0.0);
    const float* go_row = go + n * K;
    for (int64_t k = 0; k < K; ++k) {
      const double gv = go_row[k];
      if (gv == 0.0) continue;
      const float* wrow = w + k * D;
      for (int64_t d = 0; d < D; ++d) row[d] += gv * wrow[d];
    }
    float* dst = grads.input.data() + n * D;
    for (int64_t d = 0; d < D; ++d) dst[d] = static_cast<float>(row[d]);
  }

  // Weight gradient accumulates over the batch one output row at a time so
  // the double buffer stays at D elements.
  for (int64_t k = 0; k < K; ++k) {
    std::fill(row.begin(), row.end(), 0.0);
    for (int64_t n = 0; n < N; ++n) {
      const double gv = go[n * K + k];
      if (gv == 0.0) continue;
      const float* xrow = in + n * D;
      for (int64_t d = 0; d < D; ++d) row[d] += gv * xrow[d];
    }
    float* dst = grads.weights.data() + k * D;
    for (int64_t d = 0; d < D; ++d) dst[d] = static_cast<float>(row[d]);
  }

  for (int64_t k = 0; k < K; ++k) {
    double acc = 0.0;
    for (int64_t n = 0; n < N; ++n) acc += go[n * K + k];
    grads.bias[k] = static_cast<float>(acc);
  }
  return grads;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax: expected (N,M) logits, got " +
                     logits.shape().str());
  }
  const int64_t N = logits.shape()[0], M = logits.shape()[1];
  Tensor probs(logits.shape());
  for (int64_t n = 0; n < N; ++n) {
    const float* row = logits.data() + n * M;
    float* out = probs.data() + n * M;
    double mx = row[0];
    for (int64_t m = 1; m < M; ++m) mx = std::max(mx, double{row[m]});
    double denom = 0.0;
    for (int64_t m = 0; m < M; ++m) denom += std::exp(row[m] - mx);
    for (int64_t m = 0; m < M; ++m) {
      out[m] = static_cast<float>(std::exp(row[m] - mx) / denom);
    }
  }
  return probs;
}

SoftmaxLossResult softmax_cross_entropy(const Tensor& logits,
                                        const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax_cross_entropy: expected (N,M) logits, got " +
                     logits.shape().str());
  }
  const int64_t N = logits.shape()[0], M = logits.shape()[1];
  if (static_cast<int64_t>(labels.size()) != N) {
    throw ShapeError("softmax_cross_entropy: " +
                     std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(N));
  }
  for (int v : labels) {
    if (v < 0 || v >= M) {
      throw ArgumentError("softmax_cross_entropy: label " + std::to_string(v) +
                          " out of range [0, " + std::to_string(M) + ")");
    }
  }
  SoftmaxLossResult res;
  res.probs = softmax(logits);
  res.grad = Tensor(logits.shape());
  double total = 0.0;
  constexpr double kEps = 1e-12;  // guards log against underflowed probs
  for (int64_t n = 0; n < N; ++n) {
    const float* p = res.probs.data() + n * M;
    float* g = res.grad.data() + n * M;
    const int y = labels[static_cast<size_t>(n)];
    total -= std::log(std::max(static_cast<double>(p[y]), kEps));
    for (int64_t m = 0; m < M; ++m) {
      const double onehot = (m == y) ? 1.0 : 0.0;
      g[m] = static_cast<float>((p[m] - onehot) / static_cast<double>(N));
    }
  }
  res.value = total / static_cast<double>(N);
  return res;
}

LossResult multilabel_cross_entropy(const Tensor& probs,
                                    const Tensor& targets) {
  if (probs.shape() != targets.shape() || probs.rank() != 2) {
    throw ShapeError("multilabel_cross_entropy: need matching (N,K) tensors, "
                     "got " + probs.shape().str() + " and " +
                     targets.shape().str());
  }
  const int64_t N = probs.shape()[0], K = probs.shape()[1];
  constexpr double kEps = 1e-7;
  LossResult res;
  res.grad = Tensor(probs.shape());
  double total = 0.0;
  const double scale = 1.0 / (static_cast<double>(N) * static_cast<double>(K));
  for (int64_t i = 0; i < probs.size(); ++i) {
    const double t = targets[i];
    if (t < 0.0 || t > 1.0) {
      throw ArgumentError("multilabel_cross_entropy: target " +
                          std::to_string(t) + " outside [0, 1]");
    }
    const double p = std::clamp(static_cast<double>(probs[i]), kEps,
                                1.0 - kEps);
    total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    res.grad[i] =
        static_cast<float>(scale * (-(t / p) + (1.0 - t) / (1.0 - p)));
  }
  res.value = total * scale;
  return res;
}

LossResult euclidean_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape() || pred.rank() != 2) {
    throw ShapeError("euclidean_loss: need matching (N,D) tensors, got " +
                     pred.shape().str() + " and " + target.shape().str());
  }
  const int64_t N = pred.shape()[0];
  LossResult res;
  res.grad = Tensor(pred.shape());
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(N);
  for (int64_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    total += d * d;
    res.grad[i] = static_cast<float>(2.0 * d * inv_n);
  }
  res.value = total * inv_n;
  return res;
}

void sgd_update(Tensor& weights, Tensor& velocity, const Tensor& grad,
                double lr, double momentum) {
  if (weights.shape() != velocity.shape() || weights.shape() != grad.shape()) {
    throw ShapeError("sgd_update: weights " + weights.shape().str() +
                     ", velocity " + velocity.shape().str() + ", grad " +
                     grad.shape().str() + " must match");
  }
  float* w = weights.data();
  float* v = velocity.data();
  const float* g = grad.data();
  const int64_t n = weights.size();
  for (int64_t i = 0; i < n; ++i) {
    v[i] = static_cast<float>(momentum * v[i] - lr * g[i]);
    w[i] += v[i];
  }
}

double lr_at(double base, double factor, int64_t step_iterations,
             int64_t iteration) {
  if (step_iterations <= 0) {
    throw ArgumentError("lr_at: step_iterations must be positive");
  }
  if (iteration < 0) {
    throw ArgumentError("lr_at: iteration must be non-negative");
  }
  return base * std::pow(factor, static_cast<double>(iteration / step_iterations));
}

Tensor glorot_uniform(const Shape& shape, int64_t fan_in, int64_t fan_out,
                      uint64_t seed) {
  if (fan_in <= 0 || fan_out <= 0) {
    throw ArgumentError("glorot_uniform: fans must be positive");
  }
  const double limit =
      std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
  return Tensor::random_uniform(shape, static_cast<float>(-limit),
                                static_cast<float>(limit), seed);
}

}  // namespace vap
