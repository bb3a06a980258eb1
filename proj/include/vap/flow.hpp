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
// Appearance-motion preprocessing: intensity conversion, dense optical
// flow, composition into the 3-channel (intensity, Vx, Vy) input volume,
// and resampling to the fixed network input size.
//
// Clip conventions: raw color clips are (T,H,W,3) float in [0,1]; gray
// clips are (T,H,W); composed volumes are (3,T,H,W) with channel 0 the
// intensity, channel 1 the horizontal velocity Vx and channel 2 the
// vertical velocity Vy, both in pixels per frame.  Positive Vx means
// content moving toward larger x (rightward), positive Vy toward larger y
// (downward).

#pragma once

#include <cstdint>
#include <vector>

#include "vap/tensor.hpp"

namespace vap {

// Luma weights 0.299 R + 0.587 G + 0.114 B.  Accepts (T,H,W,3) or (H,W,3).
Tensor grayscale(const Tensor& rgb);

struct FlowField {
  Tensor vx;  // (H,W), pixels/frame, positive rightward
  Tensor vy;  // (H,W), pixels/frame, positive downward
};

struct FlowResult {
  FlowField flow;
  // energy[0] is the zero-flow energy; energy[k] the value after sweep k.
  // Non-increasing by construction.
  std::vector<double> energy;
};

// Dense flow between two gray frames by exact per-pixel coordinate descent
// on the quadratic energy
//
//   E(u,v) = sum_p (Ix u + Iy v + It)^2
//          + alpha^2 * sum_{4-neighbor edges} (du^2 + dv^2)
//
// with Ix, Iy central differences of the frame mean (replicated borders)
// and It = b - a.  Each sweep updates every pixel in raster order by the
// closed-form 2x2 solve, so every sweep lowers E.  alpha is expressed for
// intensities in [0,1]; iterations >= 1.
FlowResult horn_schunck(const Tensor& a, const Tensor& b, double alpha,
                        int iterations);

// Gray clip (T,H,W) -> appearance-motion volume (3,T,H,W).  Frame t holds
// the flow from frame t to t+1; the last frame repeats the previous flow
// (zero when T == 1).
Tensor compose_am(const Tensor& gray, double alpha, int iterations);

// Trilinear resample of a (C,T,H,W) volume with half-pixel-center
// coordinate mapping; equal extents reproduce the input exactly.
Tensor resize_trilinear(const Tensor& vol, int64_t t, int64_t h, int64_t w);

// resize_trilinear plus velocity rescaling for appearance-motion volumes:
// channel 1 (Vx) is multiplied by w_new/w_old and channel 2 (Vy) by
// h_new/h_old so velocities stay in output-pixel units.  Requires C == 3.
Tensor warp_am(const Tensor& am, int64_t t, int64_t h, int64_t w);

// Linear resampling along the leading (time) axis of a (T,...) clip with
// the same half-pixel mapping; new_t == T reproduces the input exactly.
Tensor temporal_rescale(const Tensor& clip, int64_t new_t);

}  // namespace vap
