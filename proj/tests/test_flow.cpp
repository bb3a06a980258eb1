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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "vap/flow.hpp"
#include "vap/tensor.hpp"

using namespace vap;

namespace {

Tensor blob_frame(int64_t h, int64_t w, double cx, double cy, double sigma) {
  Tensor f(Shape{h, w});
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const double dx = (static_cast<double>(x) - cx) / sigma;
      const double dy = (static_cast<double>(y) - cy) / sigma;
      f[y * w + x] = static_cast<float>(std::exp(-0.5 * (dx * dx + dy * dy)));
    }
  }
  return f;
}

double median(std::vector<double> v) {
  REQUIRE(!v.empty());
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("grayscale luma weights") {
  Tensor px = Tensor::from_values(Shape{1, 1, 3}, {1.0f, 0.0f, 0.0f});
  CHECK(grayscale(px)[0] == doctest::Approx(0.299).epsilon(1e-6));
  px = Tensor::from_values(Shape{1, 1, 3}, {0.0f, 1.0f, 0.0f});
  CHECK(grayscale(px)[0] == doctest::Approx(0.587).epsilon(1e-6));
  px = Tensor::from_values(Shape{1, 1, 3}, {0.0f, 0.0f, 1.0f});
  CHECK(grayscale(px)[0] == doctest::Approx(0.114).epsilon(1e-6));
  px = Tensor::from_values(Shape{1, 1, 3}, {1.0f, 1.0f, 1.0f});
  CHECK(grayscale(px)[0] == doctest::Approx(1.0).epsilon(1e-6));

  // Clip-shaped input keeps the leading axes.
  Tensor clip = Tensor::random_uniform(Shape{2, 4, 5, 3}, 0.0f, 1.0f, 3);
  Tensor g = grayscale(clip);
  REQUIRE(g.shape() == Shape{2, 4, 5});
  CHECK(g.at({1, 2, 3}) ==
        doctest::Approx(0.299 * clip.at({1, 2, 3, 0}) +
                        0.587 * clip.at({1, 2, 3, 1}) +
                        0.114 * clip.at({1, 2, 3, 2})).epsilon(1e-6));

  CHECK_THROWS_AS(grayscale(Tensor::zeros(Shape{4, 5, 4})), ShapeError);
  CHECK_THROWS_AS(grayscale(Tensor::zeros(Shape{4, 5})), ShapeError);
}

TEST_CASE("horn-schunck energy starts at sum It^2 and never increases") {
  Tensor a = Tensor::random_uniform(Shape{12, 14}, 0.0f, 1.0f, 11);
  // Smooth b = a + structured change.
  Tensor b = a;
  for (int64_t y = 0; y < 12; ++y) {
    for (int64_t x = 0; x < 14; ++x) {
      b[y * 14 + x] += static_cast<float>(
          0.2 * std::sin(0.5 * static_cast<double>(x)) *
          std::cos(0.4 * static_cast<double>(y)));
    }
  }
  FlowResult r = horn_schunck(a, b, 0.06, 40);
  REQUIRE(r.energy.size() == 41);

  double e0 = 0.0;  // zero-flow energy is the pure data term
  for (int64_t i = 0; i < a.size(); ++i) {
    const double it = static_cast<double>(b[i]) - a[i];
    e0 += it * it;
  }
  CHECK(r.energy[0] == doctest::Approx(e0).epsilon(1e-9));
  for (size_t k = 1; k < r.energy.size(); ++k) {
    CHECK(r.energy[k] <= r.energy[k - 1] * (1.0 + 1e-12) + 1e-15);
  }
  CHECK(r.energy.back() < 0.9 * r.energy.front());
}

TEST_CASE("horn-schunck recovers a one-pixel rightward shift") {
  // Gaussian blob moving exactly +1 px/frame in x.  Frozen expectations
  // from the solver study: at alpha=0.06, 200 sweeps, the median Vx over
  // active pixels is ~1.04 and median |Vy| ~0.009.
  const int64_t H = 16, W = 16;
  Tensor a = blob_frame(H, W, 7.0, 8.0, 2.5);
  Tensor b = blob_frame(H, W, 8.0, 8.0, 2.5);
  FlowResult r = horn_schunck(a, b, 0.06, 200);

  double amax = 0.0;
  std::vector<double> act(static_cast<size_t>(H * W));
  for (int64_t i = 0; i < H * W; ++i) {
    act[static_cast<size_t>(i)] = std::abs(static_cast<double>(a[i]) - b[i]);
    amax = std::max(amax, act[static_cast<size_t>(i)]);
  }
  std::vector<double> vxs, vys;
  for (int64_t i = 0; i < H * W; ++i) {
    if (act[static_cast<size_t>(i)] > 0.1 * amax) {
      vxs.push_back(r.flow.vx[i]);
      vys.push_back(std::abs(r.flow.vy[i]));
    }
  }
  CHECK(vxs.size() > 50);
  const double mvx = median(vxs);
  CHECK(mvx > 0.5);
  CHECK(mvx < 1.5);
  CHECK(mvx == doctest::Approx(1.038).epsilon(0.02));
  CHECK(median(vys) < 0.25);

  // Leftward motion flips the sign.
  FlowResult rl = horn_schunck(b, a, 0.06, 200);
  std::vector<double> vxl;
  for (int64_t i = 0; i < H * W; ++i) {
    if (act[static_cast<size_t>(i)] > 0.1 * amax) {
      vxl.push_back(rl.flow.vx[i]);
    }
  }
  CHECK(median(vxl) < -0.5);
  CHECK(median(vxl) > -1.5);
}

TEST_CASE("horn-schunck static scene yields exactly zero flow") {
  Tensor s = blob_frame(16, 16, 8.0, 8.0, 2.5);
  FlowResult r = horn_schunck(s, s, 0.06, 100);
  for (int64_t i = 0; i < r.flow.vx.size(); ++i) {
    CHECK(std::abs(r.flow.vx[i]) < 1e-6);
    CHECK(std::abs(r.flow.vy[i]) < 1e-6);
  }
  // With It == 0 everywhere, zero flow is the exact minimizer.
  CHECK(r.energy.front() == 0.0);
  CHECK(r.energy.back() == 0.0);
}

TEST_CASE("horn-schunck argument validation") {
  Tensor a = Tensor::zeros(Shape{4, 4});
  Tensor b = Tensor::zeros(Shape{4, 5});
  CHECK_THROWS_AS(horn_schunck(a, b, 0.06, 10), ShapeError);
  CHECK_THROWS_AS(horn_schunck(a, a, 0.0, 10), ArgumentError);
  CHECK_THROWS_AS(horn_schunck(a, a, -1.0, 10), ArgumentError);
  CHECK_THROWS_AS(horn_schunck(a, a, 0.06, 0), ArgumentError);
  Tensor nan = a;
  nan[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(horn_schunck(nan, a, 0.06, 10), NumericError);
}

TEST_CASE("compose_am layout and translation content") {
  const int64_t T = 5, H = 12, W = 16;
  Tensor gray(Shape{T, H, W});
  for (int64_t t = 0; t < T; ++t) {
    Tensor f = blob_frame(H, W, 5.0 + static_cast<double>(t), 6.0, 2.0);
    std::copy(f.data(), f.data() + H * W, gray.data() + t * H * W);
  }
  Tensor am = compose_am(gray, 0.06, 120);
  REQUIRE(am.shape() == Shape{3, T, H, W});

  // Channel 0 is the intensity, unchanged.
  for (int64_t i = 0; i < T * H * W; ++i) CHECK(am[i] == gray[i]);

  // The last frame repeats the previous flow plane.
  const int64_t plane = H * W;
  const float* vx = am.data() + T * plane;
  const float* vy = am.data() + 2 * T * plane;
  for (int64_t i = 0; i < plane; ++i) {
    CHECK(vx[(T - 1) * plane + i] == vx[(T - 2) * plane + i]);
    CHECK(vy[(T - 1) * plane + i] == vy[(T - 2) * plane + i]);
  }

  // Median Vx over the moving region of the first pair is ~ +1 px/frame.
  std::vector<double> vxs;
  for (int64_t i = 0; i < plane; ++i) {
    const double change =
        std::abs(static_cast<double>(gray[plane + i]) - gray[i]);
    if (change > 0.05) vxs.push_back(vx[i]);
  }
  CHECK(median(vxs) > 0.5);
  CHECK(median(vxs) < 1.5);

  // Single-frame clip: zero flow channels.
  Tensor one = Tensor::random_uniform(Shape{1, 6, 6}, 0.0f, 1.0f, 9);
  Tensor am1 = compose_am(one, 0.06, 10);
  for (int64_t i = 36; i < am1.size(); ++i) CHECK(am1[i] == 0.0f);
}

TEST_CASE("resize_trilinear identity and interpolation") {
  Tensor vol = Tensor::random_uniform(Shape{2, 3, 5, 7}, -1.0f, 1.0f, 17);
  Tensor same = resize_trilinear(vol, 3, 5, 7);
  for (int64_t i = 0; i < vol.size(); ++i) CHECK(same[i] == vol[i]);

  // Constant volume stays constant at any size.
  Tensor c = Tensor::full(Shape{1, 2, 2, 2}, 0.75f);
  Tensor cr = resize_trilinear(c, 5, 3, 7);
  for (int64_t i = 0; i < cr.size(); ++i) {
    CHECK(cr[i] == doctest::Approx(0.75f).epsilon(1e-6));
  }

  // Half-pixel mapping on a 1D ramp [0,1] widened 2->4:
  // source coords (-0.25, 0.25, 0.75, 1.25) clamp to (0, .25, .75, 1).
  Tensor ramp = Tensor::from_values(Shape{1, 1, 1, 2}, {0.0f, 1.0f});
  Tensor up = resize_trilinear(ramp, 1, 1, 4);
  CHECK(up[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(up[1] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(up[2] == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(up[3] == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(resize_trilinear(vol, 0, 5, 7), ArgumentError);
  CHECK_THROWS_AS(resize_trilinear(Tensor::zeros(Shape{2, 2}), 1, 1, 1),
                  ShapeError);
}

TEST_CASE("warp_am rescales velocities with the spatial ratios") {
  // Constant Vx=2, Vy=3 volume: W 8->4 halves Vx, H 8->16 doubles Vy.
  Tensor am(Shape{3, 2, 8, 8});
  for (int64_t i = 0; i < 2 * 64; ++i) {
    am[i] = 0.5f;                  // intensity
    am[2 * 64 + i] = 2.0f;         // Vx
    am[2 * 2 * 64 + i] = 3.0f;     // Vy
  }
  Tensor out = warp_am(am, 2, 16, 4);
  REQUIRE(out.shape() == Shape{3, 2, 16, 4});
  const int64_t plane = 2 * 16 * 4;
  for (int64_t i = 0; i < plane; ++i) {
    CHECK(out[i] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(out[plane + i] == doctest::Approx(1.0).epsilon(1e-6));      // 2 * 4/8
    CHECK(out[2 * plane + i] == doctest::Approx(6.0).epsilon(1e-6));  // 3 * 16/8
  }
  CHECK_THROWS_AS(warp_am(Tensor::zeros(Shape{2, 2, 4, 4}), 2, 4, 4),
                  ShapeError);
}

TEST_CASE("temporal_rescale endpoints and identity") {
  Tensor clip(Shape{4, 1, 1});
  for (int64_t t = 0; t < 4; ++t) clip[t] = static_cast<float>(t);

  Tensor same = temporal_rescale(clip, 4);
  for (int64_t i = 0; i < 4; ++i) CHECK(same[i] == clip[i]);

  // 4 -> 8: source coords (i+0.5)/2 - 0.5 clamped.
  Tensor up = temporal_rescale(clip, 8);
  const float want[8] = {0.0f, 0.25f, 0.75f, 1.25f, 1.75f, 2.25f, 2.75f, 3.0f};
  for (int64_t i = 0; i < 8; ++i) {
    CHECK(up[i] == doctest::Approx(want[i]).epsilon(1e-6));
  }

  // 4 -> 2: coords 0.5 and 2.5 blend adjacent frames.
  Tensor down = temporal_rescale(clip, 2);
  CHECK(down[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(down[1] == doctest::Approx(2.5).epsilon(1e-6));

  // Works on (T,H,W,C) color clips too.
  Tensor color = Tensor::random_uniform(Shape{6, 3, 4, 3}, 0.0f, 1.0f, 23);
  Tensor half = temporal_rescale(color, 3);
  REQUIRE(half.shape() == Shape{3, 3, 4, 3});

  CHECK_THROWS_AS(temporal_rescale(clip, 0), ArgumentError);
}
