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
#include <set>
#include <utility>
#include <vector>

#include "vap/errors.hpp"
#include "vap/rng.hpp"
#include "vap/synth.hpp"
#include "vap/tensor.hpp"

using namespace vap;

namespace {

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (int64_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

double luma_at(const Tensor& clip, int64_t t, int64_t y, int64_t x) {
  const int64_t H = clip.shape()[1], W = clip.shape()[2];
  const float* p = clip.data() + ((t * H + y) * W + x) * 3;
  return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
}

// Coverage-weighted foreground centroid of one frame: the background luma
// stays in [0.08, 0.12] while sprite parts sit well above 0.23, so the
// ramp weight counts interior pixels fully and anti-aliased rims
// partially (a hard threshold makes whole rim rows flicker in and out).
std::pair<double, double> fg_centroid(const Tensor& clip, int64_t t) {
  const int64_t H = clip.shape()[1], W = clip.shape()[2];
  double sx = 0.0, sy = 0.0, sw = 0.0;
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x) {
      const double w =
          std::clamp((luma_at(clip, t, y, x) - 0.13) / 0.10, 0.0, 1.0);
      sx += w * static_cast<double>(x);
      sy += w * static_cast<double>(y);
      sw += w;
    }
  }
  REQUIRE(sw > 0.0);
  return {sx / sw, sy / sw};
}

ActionSpec base_spec(MotionProgram p) {
  ActionSpec s;
  s.category_id = static_cast<int>(p);
  s.motion_program = p;
  s.speed = 1.2;
  s.direction = 0.0;
  s.limb_phase = 0.4;
  s.cyclic = motion_program_is_cyclic(p);
  s.character_variant = 2;
  return s;
}

}  // namespace

TEST_CASE("synth determinism: same spec and seed give bit-identical clips") {
  ActionSpec s = base_spec(MotionProgram::kWaveLimb);
  auto a = synth_action_clip(s, 64, 64, 16, 77);
  auto b = synth_action_clip(s, 64, 64, 16, 77);
  CHECK(tensors_equal(a.clip, b.clip));
  CHECK(a.annotation.volume.cx == b.annotation.volume.cx);
  CHECK(a.annotation.volume.w == b.annotation.volume.w);
  CHECK(a.annotation.h1_bits == b.annotation.h1_bits);
  CHECK(a.annotation.h2_bits == b.annotation.h2_bits);

  auto c = synth_action_clip(s, 64, 64, 16, 78);
  CHECK_FALSE(tensors_equal(a.clip, c.clip));  // seed moves the texture
}

TEST_CASE("translate attribute bits: horizontal set, vertical clear at direction 0") {
  ActionSpec s = base_spec(MotionProgram::kTranslate);
  s.direction = 0.0;
  Attributes a = derive_attributes(s);
  CHECK(a.h1[0] == 1);  // body-translates-horizontal
  CHECK(a.h1[1] == 0);  // body-translates-vertical

  s.direction = 0.5 * 3.14159265358979323846;
  Attributes b = derive_attributes(s);
  CHECK(b.h1[0] == 0);
  CHECK(b.h1[1] == 1);

  // Annotation stores exactly the derived vector.
  s.direction = 0.0;
  auto r = synth_action_clip(s, 72, 72, 16, 3);
  CHECK(r.annotation.h1_bits == a.h1);
  CHECK(r.annotation.h2_bits == a.h2);
}

TEST_CASE("translate centroid advances speed px/frame within 0.5 px") {
  for (double speed : {0.8, 1.6}) {
    ActionSpec s = base_spec(MotionProgram::kTranslate);
    s.speed = speed;
    auto r = synth_action_clip(s, 72, 72, 16, 42);
    auto first = fg_centroid(r.clip, 0);
    auto prev = first;
    for (int64_t t = 1; t < 16; ++t) {
      auto cur = fg_centroid(r.clip, t);
      CHECK(std::abs((cur.first - prev.first) - speed) < 0.5);
      // Off-axis: the scissor gait bobs the mass centroid a little, but it
      // must not drift.
      CHECK(std::abs(cur.second - first.second) < 2.0);
      prev = cur;
    }
  }
  // Leftward: direction pi reverses the advance.
  ActionSpec s = base_spec(MotionProgram::kTranslate);
  s.speed = 1.2;
  s.direction = 3.14159265358979323846;
  auto r = synth_action_clip(s, 72, 72, 16, 42);
  auto c0 = fg_centroid(r.clip, 0);
  auto c8 = fg_centroid(r.clip, 8);
  CHECK(c8.first - c0.first < -8.0);
}

TEST_CASE("synth validation: short clips, small canvases, bad specs") {
  ActionSpec s = base_spec(MotionProgram::kBounce);
  CHECK_THROWS_AS(synth_action_clip(s, 64, 64, 7, 1), ArgumentError);
  CHECK_THROWS_AS(synth_action_clip(s, 64, 4, 16, 1), ArgumentError);
  CHECK_THROWS_AS(synth_action_clip(s, 16, 16, 16, 1), GeometryError);

  ActionSpec bad = s;
  bad.speed = 0.0;
  CHECK_THROWS_AS(synth_action_clip(bad, 64, 64, 16, 1), ArgumentError);
  bad = s;
  bad.character_variant = -1;
  CHECK_THROWS_AS(synth_action_clip(bad, 64, 64, 16, 1), ArgumentError);

  // A fast long translate outruns the canvas.
  ActionSpec run = base_spec(MotionProgram::kTranslate);
  run.speed = 4.0;
  CHECK_THROWS_AS(synth_action_clip(run, 64, 64, 32, 1), GeometryError);
}

TEST_CASE("annotation volume is centered and bounds the rendered sprite") {
  ActionSpec s = base_spec(MotionProgram::kClap);
  auto r = synth_action_clip(s, 64, 80, 24, 11);
  const Cuboid& v = r.annotation.volume;
  CHECK(v.cx == doctest::Approx((80 - 1) / 2.0));
  CHECK(v.cy == doctest::Approx((64 - 1) / 2.0));
  CHECK(v.ct == doctest::Approx((24 - 1) / 2.0));
  CHECK(v.l == 24.0);
  CHECK(r.annotation.loc_w == 0.0);
  CHECK(r.annotation.loc_h == 0.0);

  // Every foreground pixel lies inside the cuboid's spatial footprint.
  int64_t outside = 0, total = 0;
  for (int64_t t = 0; t < 24; ++t) {
    for (int64_t y = 0; y < 64; ++y) {
      for (int64_t x = 0; x < 80; ++x) {
        if (luma_at(r.clip, t, y, x) <= 0.20) continue;
        ++total;
        const bool inside = std::abs(x - v.cx) <= v.w / 2.0 &&
                            std::abs(y - v.cy) <= v.h / 2.0;
        if (!inside) ++outside;
      }
    }
  }
  CHECK(total > 1000);
  CHECK(outside == 0);
}

TEST_CASE("crop5 offsets are exactly the four corners plus center") {
  Tensor clip = Tensor::random_uniform(Shape{3, 342, 256, 3}, 0.f, 1.f, 5);
  const int64_t t = 30;
  auto crops = crop5(clip, t);
  std::set<std::pair<double, double>> offs;
  for (const auto& c : crops) {
    offs.insert({c.center_dx, c.center_dy});
    CHECK(c.clip.shape() == Shape{3, 342 - 2 * t, 256 - 2 * t, 3});
  }
  std::set<std::pair<double, double>> want = {
      {-30.0, -30.0}, {30.0, -30.0}, {-30.0, 30.0}, {30.0, 30.0}, {0.0, 0.0}};
  CHECK(offs == want);
  // Order contract: corners first (tl, tr, bl, br), center last.
  CHECK(crops[0].center_dx == -30.0);
  CHECK(crops[0].center_dy == -30.0);
  CHECK(crops[1].center_dx == 30.0);
  CHECK(crops[3].center_dy == 30.0);
  CHECK(crops[4].center_dx == 0.0);
}

TEST_CASE("crop5 subclips are pixel-exact regions of the source") {
  Tensor clip = Tensor::random_uniform(Shape{2, 20, 24, 3}, 0.f, 1.f, 9);
  const int64_t t = 4;
  auto crops = crop5(clip, t);
  // s4 (bottom-right): region starts at (2t, 2t).
  const auto& c = crops[3];
  const int64_t h2 = 20 - 2 * t, w2 = 24 - 2 * t;
  for (int64_t tt = 0; tt < 2; ++tt) {
    for (int64_t y = 0; y < h2; ++y) {
      for (int64_t x = 0; x < w2; ++x) {
        for (int64_t ch = 0; ch < 3; ++ch) {
          CHECK(c.clip.at({tt, y, x, ch}) ==
                clip.at({tt, y + 2 * t, x + 2 * t, ch}));
        }
      }
    }
  }
  // Center crop region starts at (t, t).
  const auto& m = crops[4];
  CHECK(m.clip.at({1, 0, 0, 0}) == clip.at({1, t, t, 0}));
  CHECK(m.clip.at({0, h2 - 1, w2 - 1, 2}) ==
        clip.at({0, t + h2 - 1, t + w2 - 1, 2}));

  // Normalized regression targets point back at the source center.
  CHECK(c.loc_w == doctest::Approx(-static_cast<double>(t) / w2));
  CHECK(c.loc_h == doctest::Approx(-static_cast<double>(t) / h2));
  CHECK(m.loc_w == 0.0);
}

TEST_CASE("crop5 degenerate margin and validation") {
  Tensor clip = Tensor::random_uniform(Shape{2, 12, 12, 3}, 0.f, 1.f, 1);
  auto crops = crop5(clip, 0);
  for (const auto& c : crops) {
    CHECK(c.center_dx == 0.0);
    CHECK(c.center_dy == 0.0);
    CHECK(tensors_equal(c.clip, clip));
  }
  CHECK_THROWS_AS(crop5(clip, 6), ArgumentError);   // t >= min/2
  CHECK_THROWS_AS(crop5(clip, -1), ArgumentError);
  Tensor bad = Tensor::zeros(Shape{2, 12, 12});
  CHECK_THROWS_AS(crop5(bad, 1), ShapeError);
}

TEST_CASE("augment yields five deterministic rescaled crops with updated annotations") {
  ActionSpec s = base_spec(MotionProgram::kSway);
  auto src = synth_action_clip(s, 72, 72, 16, 21);
  auto a = augment(src.clip, src.annotation, 99);
  auto b = augment(src.clip, src.annotation, 99);
  REQUIRE(a.size() == 5);
  REQUIRE(b.size() == 5);
  for (size_t i = 0; i < 5; ++i) {
    CHECK(tensors_equal(a[i].clip, b[i].clip));
    CHECK(a[i].annotation.loc_w == b[i].annotation.loc_w);
    // Temporal rescale stays within (0.5, 1.5) of the source length.
    const int64_t nt = a[i].clip.shape()[0];
    CHECK(nt >= 8);
    CHECK(nt <= 24);
    // Crop extents: W - 2t for t in the scaled margin range (3..14 here,
    // clamped by the 72 px canvas).
    const int64_t w2 = a[i].clip.shape()[2];
    CHECK(w2 >= 72 - 2 * 14);
    CHECK(w2 <= 72 - 2 * 3);
    CHECK(a[i].clip.shape()[1] == w2);
    // Attribute bits ride along unchanged.
    CHECK(a[i].annotation.h1_bits == src.annotation.h1_bits);
    CHECK(a[i].annotation.category_id == s.category_id);
  }
  auto c = augment(src.clip, src.annotation, 100);
  bool any_diff = false;
  for (size_t i = 0; i < 5; ++i) {
    any_diff = any_diff || !tensors_equal(a[i].clip, c[i].clip);
  }
  CHECK(any_diff);
}

TEST_CASE("augment loc targets recover the action center in crop units") {
  ActionSpec s = base_spec(MotionProgram::kPoint);
  auto src = synth_action_clip(s, 72, 72, 16, 4);
  auto samples = augment(src.clip, src.annotation, 7);
  // Source action is centered, so each loc target must be the negated crop
  // offset over the crop extent: the four corners get +-t/w', the center 0.
  const int64_t w2 = samples[0].clip.shape()[2];
  const double t = (72 - w2) / 2.0;
  const double expect = t / w2;
  CHECK(samples[0].annotation.loc_w == doctest::Approx(expect));   // tl: -(-t)/w
  CHECK(samples[0].annotation.loc_h == doctest::Approx(expect));
  CHECK(samples[1].annotation.loc_w == doctest::Approx(-expect));  // tr
  CHECK(samples[1].annotation.loc_h == doctest::Approx(expect));
  CHECK(samples[2].annotation.loc_w == doctest::Approx(expect));   // bl
  CHECK(samples[2].annotation.loc_h == doctest::Approx(-expect));
  CHECK(samples[3].annotation.loc_w == doctest::Approx(-expect));  // br
  CHECK(samples[4].annotation.loc_w == doctest::Approx(0.0));
  CHECK(samples[4].annotation.loc_h == doctest::Approx(0.0));
  // Denormalizing recovers the action center inside each crop.
  for (const auto& smp : samples) {
    const int64_t h = smp.clip.shape()[1], w = smp.clip.shape()[2];
    const double crop_cx = (w - 1) / 2.0, crop_cy = (h - 1) / 2.0;
    CHECK(crop_cx + smp.annotation.loc_w * w ==
          doctest::Approx(smp.annotation.volume.cx));
    CHECK(crop_cy + smp.annotation.loc_h * h ==
          doctest::Approx(smp.annotation.volume.cy));
  }
}

TEST_CASE("attribute re-derivation matches stored bits for sampled specs") {
  Rng rng(1234);
  const int64_t lengths[4] = {16, 24, 32, 48};
  int rendered = 0;
  for (int cat = 0; cat < 10; ++cat) {
    for (int rep = 0; rep < 3; ++rep) {
      const int64_t T = lengths[(cat + rep) % 4];
      ActionSpec s = sample_action_spec(cat, 72, 72, T, rng);
      CHECK(s.motion_program == motion_program_for_category(cat));
      auto r = synth_action_clip(s, 72, 72, T, 500 + cat * 10 + rep);
      Attributes a = derive_attributes(s);
      CHECK(r.annotation.h1_bits == a.h1);
      CHECK(r.annotation.h2_bits == a.h2);
      ++rendered;
    }
  }
  CHECK(rendered == 30);
}

TEST_CASE("every attribute column varies across the ten programs") {
  Rng rng(88);
  std::vector<int> h1_on(kNumH1, 0), h2_on(kNumH2, 0);
  int total = 0;
  for (int cat = 0; cat < 10; ++cat) {
    for (int rep = 0; rep < 12; ++rep) {
      ActionSpec s = sample_action_spec(cat, 72, 72, 24, rng);
      Attributes a = derive_attributes(s);
      for (int b = 0; b < kNumH1; ++b) h1_on[b] += a.h1[b];
      for (int b = 0; b < kNumH2; ++b) h2_on[b] += a.h2[b];
      ++total;
    }
  }
  for (int b = 0; b < kNumH1; ++b) {
    INFO("h1 bit ", b, " (", h1_bit_name(b), ")");
    CHECK(h1_on[b] > 0);
    CHECK(h1_on[b] < total);
  }
  for (int b = 0; b < kNumH2; ++b) {
    INFO("h2 bit ", b, " (", h2_bit_name(b), ")");
    CHECK(h2_on[b] > 0);
    CHECK(h2_on[b] < total);
  }
}

TEST_CASE("compose: single centered action matches its measured bounding box") {
  std::vector<PlacedAction> actions;
  PlacedAction pa;
  pa.spec = base_spec(MotionProgram::kKickLimb);
  pa.x = 47.5;
  pa.y = 39.5;
  pa.t0 = 4;
  pa.length = 16;
  actions.push_back(pa);
  auto res = compose_multiaction_video(actions, 80, 96, 32,
                                       BackgroundKind::kNoise, 314);
  REQUIRE(res.annotations.size() == 1);
  const Cuboid& v = res.annotations[0].volume;
  CHECK(v.cx == doctest::Approx(47.5));
  CHECK(v.cy == doctest::Approx(39.5));
  CHECK(v.ct == doctest::Approx(4 + 7.5));
  CHECK(v.l == 16.0);

  // Measure the rendered foreground against a same-seed empty render.
  auto empty = compose_multiaction_video({}, 80, 96, 32,
                                         BackgroundKind::kNoise, 314);
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  int64_t t_first = -1, t_last = -1, inside = 0, total = 0;
  for (int64_t t = 0; t < 32; ++t) {
    for (int64_t y = 0; y < 80; ++y) {
      for (int64_t x = 0; x < 96; ++x) {
        const int64_t base = ((t * 80 + y) * 96 + x) * 3;
        double d = 0.0;
        for (int64_t ch = 0; ch < 3; ++ch) {
          d = std::max(d, std::abs(static_cast<double>(res.video[base + ch]) -
                                   empty.video[base + ch]));
        }
        if (d < 0.02) continue;
        ++total;
        x0 = std::min(x0, static_cast<double>(x));
        x1 = std::max(x1, static_cast<double>(x));
        y0 = std::min(y0, static_cast<double>(y));
        y1 = std::max(y1, static_cast<double>(y));
        if (t_first < 0) t_first = t;
        t_last = t;
        const bool in = std::abs(x - v.cx) <= v.w / 2.0 &&
                        std::abs(y - v.cy) <= v.h / 2.0 &&
                        std::abs(t - v.ct) <= v.l / 2.0;
        if (in) ++inside;
      }
    }
  }
  REQUIRE(total > 500);
  // Annotation cuboid contains all foreground and is tight to 1 px.
  CHECK(static_cast<double>(inside) / total >= 0.95);
  CHECK(std::abs((v.cx - v.w / 2.0) - x0) <= 1.5);
  CHECK(std::abs((v.cx + v.w / 2.0) - x1) <= 1.5);
  CHECK(std::abs((v.cy - v.h / 2.0) - y0) <= 1.5);
  CHECK(std::abs((v.cy + v.h / 2.0) - y1) <= 1.5);
  CHECK(t_first == 4);
  CHECK(t_last == 19);
}

TEST_CASE("compose: zero actions, cardinality, backgrounds, determinism") {
  auto empty = compose_multiaction_video({}, 48, 48, 16,
                                         BackgroundKind::kFlat, 2);
  CHECK(empty.annotations.empty());
  CHECK(empty.video.shape() == Shape{16, 48, 48, 3});
  for (int64_t i = 0; i < empty.video.size(); ++i) {
    CHECK(empty.video[i] == 0.10f);
  }

  std::vector<PlacedAction> actions;
  for (int k = 0; k < 3; ++k) {
    PlacedAction pa;
    pa.spec = base_spec(static_cast<MotionProgram>(2 + k));
    pa.spec.category_id = 2 + k;
    pa.x = 24.0 + 32.0 * k;
    pa.y = 30.0;
    pa.t0 = 8 * k;
    pa.length = 16;
    actions.push_back(pa);
  }
  auto a = compose_multiaction_video(actions, 64, 112, 48,
                                     BackgroundKind::kDistractors, 9);
  auto b = compose_multiaction_video(actions, 64, 112, 48,
                                     BackgroundKind::kDistractors, 9);
  REQUIRE(a.annotations.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.annotations[static_cast<size_t>(k)].category_id == 2 + k);
  }
  CHECK(tensors_equal(a.video, b.video));

  // Distractor background differs from plain noise with the same seed.
  auto noise = compose_multiaction_video({}, 64, 112, 48,
                                         BackgroundKind::kNoise, 9);
  auto dis = compose_multiaction_video({}, 64, 112, 48,
                                       BackgroundKind::kDistractors, 9);
  CHECK_FALSE(tensors_equal(noise.video, dis.video));
}

TEST_CASE("compose placement validation") {
  PlacedAction pa;
  pa.spec = base_spec(MotionProgram::kBounce);
  pa.x = 4.0;  // sprite box sticks out on the left
  pa.y = 24.0;
  pa.t0 = 0;
  pa.length = 16;
  CHECK_THROWS_AS(compose_multiaction_video({pa}, 48, 48, 16,
                                            BackgroundKind::kFlat, 1),
                  GeometryError);
  pa.x = 24.0;
  pa.t0 = 8;  // frames [8, 24) exceed length 16
  CHECK_THROWS_AS(compose_multiaction_video({pa}, 48, 48, 16,
                                            BackgroundKind::kFlat, 1),
                  GeometryError);
  pa.t0 = 0;
  pa.length = 4;
  CHECK_THROWS_AS(compose_multiaction_video({pa}, 48, 48, 16,
                                            BackgroundKind::kFlat, 1),
                  ArgumentError);
}

TEST_CASE("motion program names round-trip") {
  for (int i = 0; i < kNumMotionPrograms; ++i) {
    MotionProgram p = static_cast<MotionProgram>(i);
    CHECK(motion_program_from_name(motion_program_name(p)) == p);
  }
  CHECK_THROWS_AS(motion_program_from_name("cartwheel"), ArgumentError);
  CHECK(motion_program_for_category(13) == MotionProgram::kKickLimb);
}
