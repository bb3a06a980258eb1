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
// The four-head spatio-temporal network.  A stack of 3x3x3 convolutions
// (each followed by relu, some followed by 2x2x2 max pooling) feeds two
// fully connected layers; the prediction heads hang off them:
//
//   fc1 -> relu -> a1 --+--> fc2 -> relu -> a2 --+--> head_loc    (linear)
//                       |                        +--> head_class  (softmax)
//                       +--> head_h1 (sigmoid)   +--> head_h2 (sigmoid)
//
// The joint training objective is
//
//   L = L_class + lambda1 * L_h1 + lambda2 * L_h2 + beta * L_loc
//
// with L_class the softmax cross entropy, L_h1/L_h2 the multilabel cross
// entropies of the two attribute sets and L_loc the squared-distance loss
// on the normalized location offset.  All four terms are batch means.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vap/layers.hpp"
#include "vap/tensor.hpp"

namespace vap {

struct ConvSpec {
  int64_t out_c = 0;
  Triple kernel{3, 3, 3};
  Triple stride{1, 1, 1};
  Triple pad{1, 1, 1};
};

struct ModelConfig {
  int64_t input_c = 3, input_t = 0, input_h = 0, input_w = 0;
  std::vector<ConvSpec> convs;
  std::vector<int> pool_after;  // 1-based conv indices followed by a pool
  Triple pool_kernel{2, 2, 2};
  Triple pool_stride{2, 2, 2};
  int64_t fc1_dim = 0, fc2_dim = 0;
  int64_t fc1_rank = 0, fc2_rank = 0;  // 0 = dense, >0 = factored
  int64_t num_categories = 0;          // real action categories
  bool include_background = false;     // adds one softmax slot at the end
  int64_t num_h1 = 19, num_h2 = 14;
  double lambda1 = 0.5, lambda2 = 0.5, beta = 0.5;

  int64_t num_classes() const {
    return num_categories + (include_background ? 1 : 0);
  }
  int64_t background_class() const { return num_categories; }

  // Desk-scale profile: 32x32x8 input, three conv/pool blocks, 64-wide fc.
  static ModelConfig toy(int64_t categories);
  // Full-scale profile: 112x112x32 input, six convs with four pools,
  // 4096-wide fc.
  static ModelConfig paper(int64_t categories);
  // Minimal profile for finite-difference work: 8x8x4 input.
  static ModelConfig tiny(int64_t categories);

  // Stable text form (one key=value per line, fixed order); embedded in
  // checkpoints so a file fully describes its network.
  std::string canonical_text() const;
  static ModelConfig from_text(const std::string& text);

  void validate() const;
};

struct LayerInfo {
  std::string name;    // conv1, pool1, ..., flatten, fc1, fc2, head_*
  Shape output;        // single-sample output shape, leading extent 1
  int64_t param_count = 0;
};

// Propagates shapes through the stack without allocating parameters.
// Throws ConfigError naming the first layer whose output collapses.
std::vector<LayerInfo> plan_layers(const ModelConfig& cfg);

// Per-sample supervision for a batch of N volumes.
struct Targets {
  std::vector<int> category;  // size N, in [0, num_classes)
  Tensor h1;                  // (N, num_h1) in [0,1]
  Tensor h2;                  // (N, num_h2) in [0,1]
  Tensor loc;                 // (N, 2) normalized (dx, dy)
};

struct HeadOutputs {
  Tensor loc;          // (N, 2) raw offsets
  Tensor class_probs;  // (N, num_classes) softmax
  Tensor h1_probs;     // (N, num_h1) sigmoid
  Tensor h2_probs;     // (N, num_h2) sigmoid
};

struct LossBreakdown {
  double category = 0.0, h1 = 0.0, h2 = 0.0, loc = 0.0, total = 0.0;
};

class Model {
 public:
  static Model build(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // Inference pass over a batch (N, C, T, H, W).
  HeadOutputs forward(const Tensor& batch) const;

  // Post-activation feature map of one named stack layer (conv1, pool1,
  // ..., fc1, fc2); ArgumentError listing the valid names on a miss.
  Tensor layer_output(const Tensor& batch, const std::string& layer) const;

  // Joint loss without touching gradients (finite-difference oracle path).
  LossBreakdown loss(const Tensor& batch, const Targets& targets) const;

  // Full backward pass; overwrites the stored parameter gradients.
  LossBreakdown compute_gradients(const Tensor& batch, const Targets& targets);

  // compute_gradients + sgd_step.
  LossBreakdown train_step(const Tensor& batch, const Targets& targets,
                           double lr, double momentum);

  // Momentum update from the stored gradients; gradients are zeroed after
  // the update.
  void sgd_step(double lr, double momentum);
  void zero_grads();

  // Mutable views over every parameter tensor in fixed declaration order.
  struct Param {
    std::string name;
    Tensor* value;
    Tensor* grad;
    Tensor* velocity;
  };
  std::vector<Param> parameters();

  // Checkpoint container: config text, iteration, seed, then every
  // parameter and velocity tensor by name.  Rewriting an unmodified model
  // produces byte-identical files.
  void save_checkpoint(const std::string& path, int64_t iteration,
                       uint64_t seed) const;
  struct Loaded;  // defined below: model + iteration + seed
  static Loaded load_checkpoint(const std::string& path);

  // Replace fc1/fc2 with rank-limited factor pairs obtained from the SVD
  // of the trained weights (rank 0 keeps a block dense).  Velocities of
  // factored blocks reset to zero.
  void compress_fc(int64_t fc1_rank, int64_t fc2_rank);

  // Fresh classification head for transfer to a new label set; all other
  // parameters are kept bit-identical.
  void reset_class_head(int64_t num_categories, bool include_background,
                        uint64_t seed);

 private:
  Model() = default;
  struct ParamTensor {
    std::string name;
    Tensor value, grad, velocity;
  };
  struct FcStage {
    ParamTensor w;  // (K, D)
    ParamTensor b;  // (K); empty tensor = stage without bias
    bool has_bias = true;
  };
  struct FcBlock {
    std::vector<FcStage> stages;  // 1 dense, 2 factored (down, up)
  };

  struct Trace;
  void forward_trace(const Tensor& batch, Trace* tr) const;
  LossBreakdown losses_from_trace(const Trace& tr, const Targets& targets,
                                  Tensor* gclass, Tensor* gh1, Tensor* gh2,
                                  Tensor* gloc) const;
  void check_targets(int64_t n, const Targets& t) const;
  static Tensor fc_block_forward(const FcBlock& blk,
                                 const Tensor& x, std::vector<Tensor>* ins);
  void allocate(uint64_t seed, bool init);

  ModelConfig cfg_;
  std::vector<ParamTensor> conv_w_, conv_b_;
  FcBlock fc1_, fc2_;
  FcStage head_loc_, head_class_, head_h1_, head_h2_;
};

struct Model::Loaded {
  Model model;
  int64_t iteration = 0;
  uint64_t seed = 0;
};

// Thin SVD A = U diag(s) V^T via one-sided Jacobi rotations, computed in
// doubles.  A is (m, n); returns U (m, r), s (r), V (n, r) with
// r = min(m, n) and singular values sorted descending.  O(m n^2) per sweep;
// intended for fc-sized matrices.
struct SvdResult {
  Tensor u, s, v;
};
SvdResult svd_jacobi(const Tensor& a, int max_sweeps = 60);

}  // namespace vap
