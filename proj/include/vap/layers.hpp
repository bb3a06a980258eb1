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
//
// Stateless layer primitives for the 3D network.  Conventions, fixed across
// the project and matched exactly by the analytic backward passes:
//
//  * Volumes are (N, C, T, H, W) row-major; kernels are (O, C, kT, kH, kW).
//  * conv3d computes cross-correlation (no kernel flip) with zero padding.
//  * All spatial/temporal reductions accumulate in 64-bit floats.
//  * relu uses subgradient 0 at 0.
//  * max pooling routes gradients to the argmax element, ties broken toward
//    the lowest flat input index.
//  * fc computes y = x W^T + b with weights (K, D).
//
// Losses return batch means together with the gradient of that mean with
// respect to their first argument.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vap/tensor.hpp"

namespace vap {

using Triple = std::array<int, 3>;  // (t, h, w) order

// ---------------------------------------------------------------------------
// Convolution

// input (N,C,T,H,W), weights (O,C,kT,kH,kW), bias (O).
// Output extent per axis: (in + 2*pad - kernel) / stride + 1 (floor), and
// must be >= 1 or the call throws GeometryError.
Tensor conv3d_forward(const Tensor& input, const Tensor& weights,
                      const Tensor& bias, const Triple& stride,
                      const Triple& pad);

struct Conv3dGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

Conv3dGrads conv3d_backward(const Tensor& input, const Tensor& weights,
                            const Tensor& grad_output, const Triple& stride,
                            const Triple& pad);

// ---------------------------------------------------------------------------
// Max pooling

struct Pool3dResult {
  Tensor output;
  // Flat index into the input tensor of the max element for each output
  // element; this is the exact routing used by the backward pass.
  std::vector<int64_t> argmax;
};

Pool3dResult maxpool3d_forward(const Tensor& input, const Triple& kernel,
                               const Triple& stride);

Tensor maxpool3d_backward(const Shape& input_shape,
                          const std::vector<int64_t>& argmax,
                          const Tensor& grad_output);

// ---------------------------------------------------------------------------
// Pointwise

Tensor relu_forward(const Tensor& input);
// grad_output routed where input > 0 (zero at exactly 0).
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

Tensor sigmoid(const Tensor& input);
// output is the sigmoid activation; chain rule p * (1 - p).
Tensor sigmoid_backward(const Tensor& output, const Tensor& grad_output);

// ---------------------------------------------------------------------------
// Fully connected: input (N,D), weights (K,D), bias (K) -> (N,K)

Tensor fc_forward(const Tensor& input, const Tensor& weights,
                  const Tensor& bias);

struct FcGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

FcGrads fc_backward(const Tensor& input, const Tensor& weights,
                    const Tensor& grad_output);

// ---------------------------------------------------------------------------
// Losses

// Row-wise softmax, stabilized by subtracting the row max before exp.
Tensor softmax(const Tensor& logits);

struct SoftmaxLossResult {
  double value = 0.0;   // mean over the batch of -log p[label]
  Tensor grad;          // d value / d logits = (softmax - onehot) / N
  Tensor probs;         // row-wise softmax of the logits
};

SoftmaxLossResult softmax_cross_entropy(const Tensor& logits,
                                        const std::vector<int>& labels);

struct LossResult {
  double value = 0.0;
  Tensor grad;  // gradient with respect to the first argument
};

// Mean over samples and attributes of the per-attribute binary cross
// entropy  -[t log p + (1-t) log(1-p)].  Probabilities are clamped to
// [eps, 1-eps] with eps = 1e-7 before both the logs and the gradient.
// Targets may be soft (any value in [0, 1]).
LossResult multilabel_cross_entropy(const Tensor& probs,
                                    const Tensor& targets);

// Mean over the batch of the squared Euclidean distance ||pred - target||^2
// (no 1/2 factor); grad = 2 (pred - target) / N.
LossResult euclidean_loss(const Tensor& pred, const Tensor& target);

// ---------------------------------------------------------------------------
// Optimizer

// Classical momentum:  v <- momentum * v - lr * grad;  w <- w + v.
// Shapes of w, velocity and grad must match.
void sgd_update(Tensor& weights, Tensor& velocity, const Tensor& grad,
                double lr, double momentum);

// Step decay: base * factor^floor(iteration / step_iterations).
double lr_at(double base, double factor, int64_t step_iterations,
             int64_t iteration);

// Glorot (Xavier) uniform initialization over
// [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
Tensor glorot_uniform(const Shape& shape, int64_t fan_in, int64_t fan_out,
                      uint64_t seed);

}  // namespace vap
