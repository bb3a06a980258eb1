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
// Operating points for end-to-end finite-difference gradient checks.
//
// The network is piecewise smooth: relu and max pooling switch linear
// regions, and a finite-difference probe that crosses a region boundary
// does not measure the gradient on either side.  At the default random
// initialization the conv pre-activations cluster around zero and pool
// windows have near-ties, so elementwise probes cross boundaries often
// (measured: errors persist across probe sizes while in a smooth
// configuration they scale like 1/eps down to float rounding).  The
// fixtures below therefore place the check at operating points that are
// provably inside one linear region:
//
//  * smooth_fixture: no pooling, every relu strictly on (positive weights
//    and biases, positive inputs).  Exercises conv -> relu -> flatten ->
//    fc -> all four heads -> joint loss.
//  * pooled_fixture: one pool between the convs; the input carries one
//    spike per 2x2x2 block and the convs are near-identity, so every pool
//    window has a winner with a margin two orders above the probe size.
//    Exercises the pool routing inside the same composite chain.

#pragma once

#include <cmath>
#include <cstdint>

#include "vap/model.hpp"
#include "vap/rng.hpp"
#include "vap/tensor.hpp"

namespace vap::fixtures {

struct GradcheckSetup {
  Model model;
  Tensor batch;
  Targets targets;
  double eps = 0.0;
};

inline Targets random_targets(int64_t n, const ModelConfig& cfg,
                              uint64_t seed) {
  Rng rng(seed);
  Targets t;
  for (int64_t i = 0; i < n; ++i) {
    t.category.push_back(static_cast<int>(rng.uniform_int(cfg.num_classes())));
  }
  t.h1 = Tensor(Shape{n, cfg.num_h1});
  for (int64_t i = 0; i < t.h1.size(); ++i) {
    t.h1[i] = rng.bernoulli(0.5) ? 1.0f : 0.0f;
  }
  t.h2 = Tensor(Shape{n, cfg.num_h2});
  for (int64_t i = 0; i < t.h2.size(); ++i) {
    t.h2[i] = rng.bernoulli(0.5) ? 1.0f : 0.0f;
  }
  t.loc = Tensor(Shape{n, 2});
  for (int64_t i = 0; i < t.loc.size(); ++i) {
    t.loc[i] = static_cast<float>(rng.uniform(-0.3, 0.3));
  }
  return t;
}

// Positive weights and biases so no relu can turn off within a probe.
inline void force_relus_on(Model& m, double conv_scale, double fc_scale) {
  for (auto& p : m.parameters()) {
    const bool is_conv = p.name.rfind("conv", 0) == 0;
    const bool is_fc = p.name.rfind("fc", 0) == 0;
    if (!is_conv && !is_fc) continue;
    const bool bias = p.name.find("bias") != std::string::npos;
    const double s = is_conv ? conv_scale : fc_scale;
    for (int64_t i = 0; i < p.value->size(); ++i) {
      const float v = (*p.value)[i];
      (*p.value)[i] =
          bias ? 0.4f : static_cast<float>(std::fabs(v) * s + 0.1 * s);
    }
  }
}

inline GradcheckSetup smooth_fixture() {
  ModelConfig cfg = ModelConfig::tiny(3);
  cfg.pool_after.clear();
  GradcheckSetup s{Model::build(cfg, 42),
                   Tensor::random_uniform(Shape{2, 3, 4, 8, 8}, 0.1f, 1.0f, 11),
                   random_targets(2, cfg, 77),
                   3e-2};
  force_relus_on(s.model, 0.05, 0.004);
  return s;
}

inline GradcheckSetup pooled_fixture() {
  ModelConfig cfg = ModelConfig::tiny(3);
  cfg.pool_after = {1};
  GradcheckSetup s{Model::build(cfg, 42), Tensor(Shape{2, 3, 4, 8, 8}),
                   random_targets(2, cfg, 77), 2e-2};

  // One spike per 2x2x2 block, always at the odd corner; the dither keeps
  // every other in-window order generic without threatening the margin.
  Rng rng(5);
  for (int64_t n = 0; n < 2; ++n) {
    for (int64_t c = 0; c < 3; ++c) {
      for (int64_t t = 0; t < 4; ++t) {
        for (int64_t h = 0; h < 8; ++h) {
          for (int64_t w = 0; w < 8; ++w) {
            const bool spike = (t % 2 == 1) && (h % 2 == 1) && (w % 2 == 1);
            s.batch.at({n, c, t, h, w}) = static_cast<float>(
                0.05 + (spike ? 0.5 : 0.0) + rng.uniform(0.0, 0.01));
          }
        }
      }
    }
  }

  // Near-identity convs: a dominant center tap copies the spike pattern
  // through to the pool with its margin intact.
  for (auto& p : s.model.parameters()) {
    const bool is_conv = p.name.rfind("conv", 0) == 0;
    const bool is_fc = p.name.rfind("fc", 0) == 0;
    if (!is_conv && !is_fc) continue;
    const bool bias = p.name.find("bias") != std::string::npos;
    for (int64_t i = 0; i < p.value->size(); ++i) {
      const float v = (*p.value)[i];
      if (bias) {
        (*p.value)[i] = 0.3f;
      } else if (is_conv) {
        (*p.value)[i] = static_cast<float>(std::fabs(v) * 0.004 + 0.0004);
      } else {
        (*p.value)[i] = static_cast<float>(std::fabs(v) * 0.01 + 0.001);
      }
    }
    if (is_conv && !bias) {
      const Shape& sh = p.value->shape();
      for (int64_t o = 0; o < sh[0]; ++o) {
        for (int64_t i = 0; i < sh[1]; ++i) {
          p.value->at({o, i, 1, 1, 1}) = 0.35f;
        }
      }
    }
  }
  return s;
}

}  // namespace vap::fixtures
