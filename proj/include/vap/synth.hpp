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
// Procedural action-clip generator.  Renders an articulated 2D puppet
// executing one of ten motion programs, with attribute labels derived from
// the generator parameters by the rule table in docs/attributes.md (never
// hand-labeled).  Also provides the five-crop spatial augmentation, the
// temporal-rescale augmentation wrapper, and multi-action composite video
// generation for parsing tests.
//
// Clip conventions follow flow.hpp: color clips are (T,H,W,3) float in
// [0,1], x = column, y = row, t = frame.  Angles are radians; direction 0
// points toward +x (rightward), pi/2 toward +y (downward).

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vap/rng.hpp"
#include "vap/tensor.hpp"

namespace vap {

inline constexpr int kNumH1 = 19;  // low-level (limb/body) attribute bits
inline constexpr int kNumH2 = 14;  // high-level (global) attribute bits

// The ten motion programs.  Enum values are stable and used as the default
// category <-> program mapping for generated datasets.
enum class MotionProgram : int {
  kTranslate = 0,   // walks along `direction` at `speed` px/frame
  kJumpArc = 1,     // single ballistic arc while advancing horizontally
  kWaveLimb = 2,    // left arm overhead, oscillating
  kKickLimb = 3,    // right leg kicks forward repeatedly
  kSpin = 4,        // whole body rotates in place, arms in T pose
  kCrouchWalk = 5,  // lowered, compressed gait along `direction`
  kClap = 6,        // both arms swing symmetrically to overhead
  kPoint = 7,       // right arm extended horizontally, held static
  kBounce = 8,      // vertical hop in place
  kSway = 9,        // lateral rock with torso tilt
};
inline constexpr int kNumMotionPrograms = 10;

const char* motion_program_name(MotionProgram p);
// Inverse of motion_program_name; throws ArgumentError on unknown names.
MotionProgram motion_program_from_name(const std::string& name);
inline MotionProgram motion_program_for_category(int category_id) {
  return static_cast<MotionProgram>(((category_id % kNumMotionPrograms) +
                                     kNumMotionPrograms) %
                                    kNumMotionPrograms);
}

// Everything the generator needs to render one action.  The attribute
// vector is a pure function of this struct (derive_attributes).
struct ActionSpec {
  int category_id = 0;
  MotionProgram motion_program = MotionProgram::kTranslate;
  double speed = 1.0;      // px/frame for translating programs, tempo else
  double direction = 0.0;  // motion heading; also facing (cos<0 mirrors)
  double limb_phase = 0.0; // initial phase of the limb oscillators
  bool cyclic = true;      // pose sequence repeats a cycle within the clip
  int character_variant = 0;  // palette + body-size selector, 0..9 cycle
};

inline constexpr int kNumCharacterVariants = 10;

// Axis-aligned spatio-temporal box: center (cx,cy) px, ct frames, extents
// (w,h) px and l frames.
struct Cuboid {
  double cx = 0.0, cy = 0.0, ct = 0.0;
  double w = 0.0, h = 0.0, l = 0.0;
};

struct Attributes {
  std::array<uint8_t, kNumH1> h1{};
  std::array<uint8_t, kNumH2> h2{};
};

// The published rule table (docs/attributes.md): 19+14 bits computed from
// the spec alone.  Deterministic; the generator stores exactly this.
Attributes derive_attributes(const ActionSpec& spec);
const char* h1_bit_name(int bit);  // 0..18
const char* h2_bit_name(int bit);  // 0..13

struct ActionAnnotation {
  Cuboid volume;  // tight bound of the rendered sprite across its frames
  int category_id = 0;
  std::array<uint8_t, kNumH1> h1_bits{};
  std::array<uint8_t, kNumH2> h2_bits{};
  // Regression target: (action center - crop center) / crop extent, zero
  // for an uncropped aligned clip.
  double loc_w = 0.0;
  double loc_h = 0.0;
};

struct SynthResult {
  Tensor clip;  // (T, H, W, 3) in [0,1]
  ActionAnnotation annotation;
};

// Renders `spec` centered on a (canvas_h, canvas_w) canvas for `length`
// frames over a flat lightly-textured background.  The sprite's bounding
// cuboid (including its whole trajectory) is centered in the canvas.
// Throws ArgumentError for length < 8 or a non-finite/non-positive speed,
// GeometryError when the sprite or its trajectory does not fit the canvas.
// Bit-identical for equal (spec, canvas, length, seed).
SynthResult synth_action_clip(const ActionSpec& spec, int64_t canvas_h,
                              int64_t canvas_w, int64_t length,
                              uint64_t seed);

// One of the five spatial crops.  (center_dx, center_dy) is the crop
// center's shift from the source-clip center in pixels — the five values
// are exactly (-t,-t), (t,-t), (-t,t), (t,t), (0,0).  (loc_w, loc_h) is
// the normalized regression target for a source whose action sits at the
// clip center: (source_center - crop_center) / crop extent.
struct CropItem {
  Tensor clip;  // (T, H-2t, W-2t, 3)
  double center_dx = 0.0;
  double center_dy = 0.0;
  double loc_w = 0.0;
  double loc_h = 0.0;
};

// Five pixel-exact subclips of width W-2t and height H-2t (no resampling).
// Requires 0 <= t < min(H, W)/2; ArgumentError otherwise.
std::array<CropItem, 5> crop5(const Tensor& clip, int64_t t);

struct AugmentedSample {
  Tensor clip;
  ActionAnnotation annotation;
};

// Training augmentation: draws the crop margin t uniformly from the range
// (10, 50) scaled by W/256 (clamped so crops keep at least 8 px), applies
// crop5, then temporally rescales every subclip by an independent factor
// p in (0.5, 1.5) (result length floored at 8 frames).  Annotations are
// re-expressed in crop coordinates with loc targets from the action
// center.  Returns exactly five samples; deterministic under seed.
std::vector<AugmentedSample> augment(const Tensor& clip,
                                     const ActionAnnotation& annotation,
                                     uint64_t seed);

enum class BackgroundKind : int {
  kFlat = 0,         // uniform dark gray
  kNoise = 1,        // static per-pixel texture
  kDistractors = 2,  // static texture plus a few inert shapes
};

struct PlacedAction {
  ActionSpec spec;
  double x = 0.0;      // desired bounding-cuboid center, px
  double y = 0.0;
  int64_t t0 = 0;      // first frame
  int64_t length = 0;  // frames; >= 8
};

struct ComposeResult {
  Tensor video;  // (length, H, W, 3)
  std::vector<ActionAnnotation> annotations;  // one per action, input order
};

// Renders every action at its placement over the chosen background
// (backgrounds are static across frames so they carry no motion).  Actions
// may overlap; later list entries draw on top.  Annotations carry exact
// bounding cuboids.  Throws GeometryError when an action's bounding box
// leaves the canvas or its frame range leaves [0, length).
ComposeResult compose_multiaction_video(const std::vector<PlacedAction>& actions,
                                        int64_t canvas_h, int64_t canvas_w,
                                        int64_t length, BackgroundKind background,
                                        uint64_t seed);

// Draws per-clip generator parameters for a category: program is
// category_id mod 10, speed respects the canvas span available for the
// trajectory, direction is axis-aligned-biased for translating programs
// and a facing choice for stationary ones.  Used by dataset generation and
// exposed for tests.
ActionSpec sample_action_spec(int category_id, int64_t canvas_h,
                              int64_t canvas_w, int64_t length, Rng& rng);

// Whether a program's pose sequence repeats within a clip (the value the
// sampler assigns to ActionSpec::cyclic).
bool motion_program_is_cyclic(MotionProgram p);

}  // namespace vap
