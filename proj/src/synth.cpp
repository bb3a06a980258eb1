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

#include "vap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "vap/errors.hpp"
#include "vap/flow.hpp"

namespace vap {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Nominal body height in px at variant scale 1.  The rendered sprite spans
// roughly 1.08*B vertically (head top to feet) and up to 0.95*B across.
constexpr double kBaseBody = 24.0;

const double kVariantScale[kNumCharacterVariants] = {
    1.00, 0.86, 1.10, 0.94, 1.18, 0.90, 1.04, 0.82, 1.14, 0.98};

// Five palettes: head, torso, limb base color.  Limb left/right shades are
// derived so the two sides stay distinguishable under mirroring.  All part
// lumas sit well above the 0.12 background so foreground masks are easy.
const float kPalettes[5][3][3] = {
    {{0.92f, 0.80f, 0.62f}, {0.85f, 0.25f, 0.22f}, {0.25f, 0.45f, 0.90f}},
    {{0.85f, 0.85f, 0.55f}, {0.25f, 0.70f, 0.30f}, {0.80f, 0.50f, 0.20f}},
    {{0.95f, 0.75f, 0.70f}, {0.30f, 0.40f, 0.85f}, {0.75f, 0.75f, 0.25f}},
    {{0.80f, 0.70f, 0.90f}, {0.75f, 0.45f, 0.65f}, {0.35f, 0.65f, 0.60f}},
    {{0.90f, 0.88f, 0.80f}, {0.55f, 0.35f, 0.20f}, {0.60f, 0.30f, 0.75f}}};

int norm_variant(int v) {
  return ((v % kNumCharacterVariants) + kNumCharacterVariants) %
         kNumCharacterVariants;
}

struct Palette {
  float head[3], torso[3], limb_l[3], limb_r[3];
};

float clamp01(double v) {
  return static_cast<float>(std::clamp(v, 0.05, 1.0));
}

Palette palette_for(int variant, uint64_t jitter_seed) {
  const auto& base = kPalettes[norm_variant(variant) % 5];
  Rng jr(jitter_seed);
  Palette p;
  float limb[3];
  float* parts[3] = {p.head, p.torso, limb};
  for (int k = 0; k < 3; ++k) {
    for (int c = 0; c < 3; ++c) {
      parts[k][c] = clamp01(base[k][c] + jr.uniform(-0.04, 0.04));
    }
  }
  for (int c = 0; c < 3; ++c) {
    p.limb_l[c] = clamp01(limb[c] * 1.15);
    p.limb_r[c] = clamp01(limb[c] * 0.85);
  }
  return p;
}

// Body configuration for one frame.  Limb angles are measured from
// straight-down in the body frame; positive swings toward +x (the facing
// direction before mirroring).
struct Pose {
  double cx = 0.0, cy = 0.0;  // body-center trajectory offset, px
  double rot = 0.0;           // whole-body rotation about the center
  double torso_sy = 1.0;      // vertical compression (crouch)
  double leg_len = 1.0;
  double arm_len_l = 1.0, arm_len_r = 1.0;
  double arm_l = 0.0, arm_r = 0.0;
  double leg_l = 0.0, leg_r = 0.0;
};

double deg(double d) { return d * kPi / 180.0; }

Pose pose_at(const ActionSpec& s, int64_t t, int64_t T, double B) {
  Pose p;
  const double phase = s.limb_phase;
  const double osc = s.speed * 2.0 * kPi / 24.0;         // oscillation tempo
  const double gait = (0.6 + s.speed) * 2.0 * kPi / 16.0;  // stride tempo
  const double tau = T > 1 ? static_cast<double>(t) / (T - 1) : 0.0;
  switch (s.motion_program) {
    case MotionProgram::kTranslate: {
      p.cx = s.speed * std::cos(s.direction) * t;
      p.cy = s.speed * std::sin(s.direction) * t;
      double g = std::sin(gait * t + phase);
      p.leg_l = deg(20) * g;
      p.leg_r = -deg(20) * g;
      p.arm_l = -deg(12) * g;
      p.arm_r = deg(12) * g;
      break;
    }
    case MotionProgram::kJumpArc: {
      double arc = 4.0 * tau * (1.0 - tau);
      p.cx = s.speed * std::cos(s.direction) * t;
      p.cy = -0.45 * B * arc;
      p.leg_l = -(deg(10) + deg(30) * arc);
      p.leg_r = deg(10) + deg(30) * arc;
      p.arm_l = -(deg(120) + deg(40) * arc);
      p.arm_r = deg(120) + deg(40) * arc;
      break;
    }
    case MotionProgram::kWaveLimb: {
      p.arm_l = -(deg(150) + deg(25) * std::sin(osc * t + phase));
      p.arm_r = deg(8);
      p.leg_l = -deg(3);
      p.leg_r = deg(3);
      break;
    }
    case MotionProgram::kKickLimb: {
      double k = std::max(0.0, std::sin(osc * t + phase));
      p.leg_r = deg(5) + deg(65) * k;
      p.leg_l = -deg(5);
      p.arm_l = -deg(20);
      p.arm_r = deg(20);
      break;
    }
    case MotionProgram::kSpin: {
      p.rot = s.speed * 2.0 * kPi / 40.0 * t + phase;
      p.arm_l = -deg(90);
      p.arm_r = deg(90);
      p.leg_l = -deg(6);
      p.leg_r = deg(6);
      break;
    }
    case MotionProgram::kCrouchWalk: {
      p.cx = 0.8 * s.speed * std::cos(s.direction) * t;
      p.cy = 0.14 * B;
      p.torso_sy = 0.78;
      p.leg_len = 0.72;
      double g = std::sin(gait * t + phase);
      p.leg_l = deg(24) * g;
      p.leg_r = -deg(24) * g;
      p.arm_l = deg(28) - deg(10) * g;
      p.arm_r = deg(28) + deg(10) * g;
      break;
    }
    case MotionProgram::kClap: {
      double u = 0.5 + 0.5 * std::sin(osc * t + phase);
      p.arm_l = -(deg(90) + deg(70) * u);
      p.arm_r = deg(90) + deg(70) * u;
      p.leg_l = -deg(4);
      p.leg_r = deg(4);
      break;
    }
    case MotionProgram::kPoint: {
      p.arm_r = deg(90);
      p.arm_len_r = 1.3;
      p.arm_l = -deg(6);
      p.leg_l = -deg(3);
      p.leg_r = deg(3);
      break;
    }
    case MotionProgram::kBounce: {
      double b = std::abs(std::sin(osc * t + phase));
      p.cy = -0.11 * B * b;
      p.arm_l = -(deg(25) + deg(12) * b);
      p.arm_r = deg(25) + deg(12) * b;
      p.leg_l = -deg(5);
      p.leg_r = deg(5);
      break;
    }
    case MotionProgram::kSway: {
      double g = std::sin(osc * t + phase);
      p.cx = 0.13 * B * g;
      p.rot = deg(9) * g;
      p.arm_l = -deg(18);
      p.arm_r = deg(18);
      p.leg_l = -deg(8);
      p.leg_r = deg(8);
      break;
    }
  }
  return p;
}

struct Capsule {
  double x0, y0, x1, y1, r;
  const float* col;
};

// Six-capsule puppet: legs, torso, head, arms (draw order back to front).
std::vector<Capsule> body_capsules(const Pose& pose, double B, bool mirror,
                                   const Palette& pal) {
  const double neck_y = -0.21 * B * pose.torso_sy;
  const double hip_y = 0.13 * B * pose.torso_sy;
  const double sh_y = -0.175 * B * pose.torso_sy;
  const double head_y = neck_y - 0.135 * B;
  const double arm_len = 0.32 * B;
  const double leg_len = 0.43 * B * pose.leg_len;

  auto limb_tip = [](double jx, double jy, double len, double ang) {
    return std::pair<double, double>(jx + len * std::sin(ang),
                                     jy + len * std::cos(ang));
  };
  auto [alx, aly] =
      limb_tip(-0.105 * B, sh_y, arm_len * pose.arm_len_l, pose.arm_l);
  auto [arx, ary] =
      limb_tip(0.105 * B, sh_y, arm_len * pose.arm_len_r, pose.arm_r);
  auto [llx, lly] = limb_tip(-0.065 * B, hip_y, leg_len, pose.leg_l);
  auto [lrx, lry] = limb_tip(0.065 * B, hip_y, leg_len, pose.leg_r);

  std::vector<Capsule> caps = {
      {-0.065 * B, hip_y, llx, lly, 0.058 * B, pal.limb_l},
      {0.065 * B, hip_y, lrx, lry, 0.058 * B, pal.limb_r},
      {0.0, neck_y, 0.0, hip_y, 0.105 * B, pal.torso},
      {0.0, head_y, 0.0, head_y, 0.115 * B, pal.head},
      {-0.105 * B, sh_y, alx, aly, 0.048 * B, pal.limb_l},
      {0.105 * B, sh_y, arx, ary, 0.048 * B, pal.limb_r},
  };
  const double cr = std::cos(pose.rot), sr = std::sin(pose.rot);
  for (Capsule& c : caps) {
    double* xs[2] = {&c.x0, &c.x1};
    double* ys[2] = {&c.y0, &c.y1};
    for (int e = 0; e < 2; ++e) {
      double x = mirror ? -*xs[e] : *xs[e];
      double y = *ys[e];
      *xs[e] = x * cr - y * sr + pose.cx;
      *ys[e] = x * sr + y * cr + pose.cy;
    }
  }
  return caps;
}

struct Box {
  double x0 = 1e30, y0 = 1e30, x1 = -1e30, y1 = -1e30;
  void add(const Capsule& c) {
    // r + 1 covers the half-pixel anti-alias band with margin to spare, so
    // every pixel the capsule touches lies strictly inside the box.
    double pad = c.r + 1.0;
    x0 = std::min({x0, c.x0 - pad, c.x1 - pad});
    x1 = std::max({x1, c.x0 + pad, c.x1 + pad});
    y0 = std::min({y0, c.y0 - pad, c.y1 - pad});
    y1 = std::max({y1, c.y0 + pad, c.y1 + pad});
  }
};

void draw_capsule(float* frame, int64_t H, int64_t W, const Capsule& c) {
  int64_t px0 = std::max<int64_t>(
      0, static_cast<int64_t>(std::floor(std::min(c.x0, c.x1) - c.r - 1)));
  int64_t px1 = std::min<int64_t>(
      W - 1, static_cast<int64_t>(std::ceil(std::max(c.x0, c.x1) + c.r + 1)));
  int64_t py0 = std::max<int64_t>(
      0, static_cast<int64_t>(std::floor(std::min(c.y0, c.y1) - c.r - 1)));
  int64_t py1 = std::min<int64_t>(
      H - 1, static_cast<int64_t>(std::ceil(std::max(c.y0, c.y1) + c.r + 1)));
  const double vx = c.x1 - c.x0, vy = c.y1 - c.y0;
  const double len2 = vx * vx + vy * vy;
  for (int64_t py = py0; py <= py1; ++py) {
    for (int64_t px = px0; px <= px1; ++px) {
      double proj = 0.0;
      if (len2 > 0.0) {
        proj = std::clamp(((px - c.x0) * vx + (py - c.y0) * vy) / len2, 0.0,
                          1.0);
      }
      double dx = px - (c.x0 + proj * vx);
      double dy = py - (c.y0 + proj * vy);
      double cov = std::clamp(c.r + 0.5 - std::sqrt(dx * dx + dy * dy), 0.0,
                              1.0);
      if (cov <= 0.0) continue;
      float* px3 = frame + (py * W + px) * 3;
      for (int ch = 0; ch < 3; ++ch) {
        px3[ch] = static_cast<float>(px3[ch] * (1.0 - cov) + c.col[ch] * cov);
      }
    }
  }
}

std::vector<float> make_background(int64_t H, int64_t W, BackgroundKind kind,
                                   uint64_t seed) {
  std::vector<float> bg(static_cast<size_t>(H * W * 3), 0.10f);
  Rng rng(seed);
  if (kind == BackgroundKind::kNoise || kind == BackgroundKind::kDistractors) {
    double amp = kind == BackgroundKind::kNoise ? 0.02 : 0.015;
    for (int64_t i = 0; i < H * W; ++i) {
      float v = static_cast<float>(0.10 + rng.uniform(-amp, amp));
      bg[i * 3] = bg[i * 3 + 1] = bg[i * 3 + 2] = v;
    }
  }
  if (kind == BackgroundKind::kDistractors) {
    int64_t n = 3 + static_cast<int64_t>(rng.uniform_int(4));
    for (int64_t k = 0; k < n; ++k) {
      float gray = static_cast<float>(rng.uniform(0.18, 0.38));
      float col[3] = {clamp01(gray + rng.uniform(-0.05, 0.05)),
                      clamp01(gray + rng.uniform(-0.05, 0.05)),
                      clamp01(gray + rng.uniform(-0.05, 0.05))};
      double x = rng.uniform(4.0, W - 4.0), y = rng.uniform(4.0, H - 4.0);
      double r = rng.uniform(1.5, 4.5);
      double dx = rng.uniform(-6.0, 6.0), dy = rng.uniform(-6.0, 6.0);
      Capsule c{x, y, x + dx, y + dy, r, col};
      draw_capsule(bg.data(), H, W, c);
    }
  }
  return bg;
}

void validate_spec(const ActionSpec& s, const char* where) {
  auto fail = [&](const std::string& msg) {
    throw ArgumentError(std::string(where) + ": " + msg);
  };
  if (s.category_id < 0) {
    fail("category_id must be >= 0, got " + std::to_string(s.category_id));
  }
  if (!std::isfinite(s.speed) || s.speed <= 0.0 || s.speed > 100.0) {
    fail("speed must be finite and in (0, 100], got " +
         std::to_string(s.speed));
  }
  if (!std::isfinite(s.direction) || !std::isfinite(s.limb_phase)) {
    fail("direction and limb_phase must be finite");
  }
  if (s.character_variant < 0) {
    fail("character_variant must be >= 0, got " +
         std::to_string(s.character_variant));
  }
}

struct RenderedAction {
  std::vector<std::vector<Capsule>> frames;  // one capsule set per frame
  Box box;                                   // union over frames
};

// Builds capsule sets for all frames with the trajectory's bounding box
// centered at (center_x, center_y).
RenderedAction layout_action(const ActionSpec& spec, int64_t length,
                             double center_x, double center_y,
                             uint64_t jitter_seed, const Palette& pal) {
  const double B = kBaseBody * kVariantScale[norm_variant(spec.character_variant)];
  const bool mirror = std::cos(spec.direction) < -1e-9;
  (void)jitter_seed;
  RenderedAction out;
  out.frames.reserve(static_cast<size_t>(length));
  for (int64_t t = 0; t < length; ++t) {
    Pose pose = pose_at(spec, t, length, B);
    out.frames.push_back(body_capsules(pose, B, mirror, pal));
    for (const Capsule& c : out.frames.back()) out.box.add(c);
  }
  const double sx = center_x - 0.5 * (out.box.x0 + out.box.x1);
  const double sy = center_y - 0.5 * (out.box.y0 + out.box.y1);
  for (auto& caps : out.frames) {
    for (Capsule& c : caps) {
      c.x0 += sx;
      c.x1 += sx;
      c.y0 += sy;
      c.y1 += sy;
    }
  }
  out.box.x0 += sx;
  out.box.x1 += sx;
  out.box.y0 += sy;
  out.box.y1 += sy;
  return out;
}

ActionAnnotation annotation_for(const ActionSpec& spec, const Box& box,
                                double ct, double l) {
  ActionAnnotation ann;
  ann.volume = Cuboid{0.5 * (box.x0 + box.x1), 0.5 * (box.y0 + box.y1), ct,
                      box.x1 - box.x0, box.y1 - box.y0, l};
  ann.category_id = spec.category_id;
  Attributes a = derive_attributes(spec);
  ann.h1_bits = a.h1;
  ann.h2_bits = a.h2;
  return ann;
}

}  // namespace

const char* motion_program_name(MotionProgram p) {
  switch (p) {
    case MotionProgram::kTranslate: return "translate";
    case MotionProgram::kJumpArc: return "jump-arc";
    case MotionProgram::kWaveLimb: return "wave-limb";
    case MotionProgram::kKickLimb: return "kick-limb";
    case MotionProgram::kSpin: return "spin";
    case MotionProgram::kCrouchWalk: return "crouch-walk";
    case MotionProgram::kClap: return "clap";
    case MotionProgram::kPoint: return "point";
    case MotionProgram::kBounce: return "bounce";
    case MotionProgram::kSway: return "sway";
  }
  return "unknown";
}

MotionProgram motion_program_from_name(const std::string& name) {
  for (int i = 0; i < kNumMotionPrograms; ++i) {
    MotionProgram p = static_cast<MotionProgram>(i);
    if (name == motion_program_name(p)) return p;
  }
  throw ArgumentError("unknown motion program \"" + name + "\"");
}

bool motion_program_is_cyclic(MotionProgram p) {
  switch (p) {
    case MotionProgram::kJumpArc:
    case MotionProgram::kPoint:
      return false;
    default:
      return true;
  }
}

const char* h1_bit_name(int bit) {
  static const char* names[kNumH1] = {
      "body-translates-horizontal", "body-translates-vertical",
      "body-oscillates-horizontal", "body-oscillates-vertical",
      "whole-body-rotation",        "torso-tilt-oscillation",
      "crouched-posture",           "left-arm-oscillates",
      "right-arm-oscillates",       "left-arm-overhead",
      "right-arm-overhead",         "left-arm-horizontal-hold",
      "right-arm-horizontal-hold",  "left-leg-oscillates",
      "right-leg-oscillates",       "legs-splayed",
      "arms-mirror-synced",         "single-limb-action",
      "static-hold"};
  if (bit < 0 || bit >= kNumH1) {
    throw ArgumentError("h1 bit index out of range: " + std::to_string(bit));
  }
  return names[bit];
}

const char* h2_bit_name(int bit) {
  static const char* names[kNumH2] = {
      "fast-tempo",        "slow-tempo",        "cyclic-motion",
      "ballistic-arc",     "ground-contact-change", "net-displacement",
      "stationary-base",   "rotational-motion", "bilateral-symmetric",
      "single-limb-dominant", "upper-body-dominant", "lower-body-dominant",
      "moves-rightward",   "moves-leftward"};
  if (bit < 0 || bit >= kNumH2) {
    throw ArgumentError("h2 bit index out of range: " + std::to_string(bit));
  }
  return names[bit];
}

Attributes derive_attributes(const ActionSpec& s) {
  using MP = MotionProgram;
  const MP p = s.motion_program;
  const bool tr = p == MP::kTranslate, ja = p == MP::kJumpArc,
             wv = p == MP::kWaveLimb, kk = p == MP::kKickLimb,
             sp = p == MP::kSpin, cw = p == MP::kCrouchWalk,
             cl = p == MP::kClap, pt = p == MP::kPoint,
             bn = p == MP::kBounce, sw = p == MP::kSway;
  const double eps = 1e-9;
  const double cd = std::cos(s.direction), sd = std::sin(s.direction);
  const bool translating = tr || ja || cw;
  const bool moves_x = (tr && std::abs(cd) > eps) || ja || cw;
  const bool moves_y = tr && std::abs(sd) > eps;

  Attributes a;
  a.h1[0] = moves_x;
  a.h1[1] = moves_y;
  a.h1[2] = sw;
  a.h1[3] = bn;
  a.h1[4] = sp;
  a.h1[5] = sw;
  a.h1[6] = cw;
  a.h1[7] = wv || cl || tr || cw;
  a.h1[8] = cl || tr || cw;
  a.h1[9] = wv || cl || ja;
  a.h1[10] = cl || ja;
  a.h1[11] = sp;
  a.h1[12] = sp || pt;
  a.h1[13] = tr || cw;
  a.h1[14] = tr || cw || kk;
  a.h1[15] = ja;
  a.h1[16] = cl || ja;
  a.h1[17] = wv || kk || pt;
  a.h1[18] = pt;

  a.h2[0] = s.speed > 1.4;
  a.h2[1] = s.speed < 0.9;
  a.h2[2] = s.cyclic;
  a.h2[3] = ja;
  a.h2[4] = ja || kk || bn;
  a.h2[5] = translating;
  a.h2[6] = !translating;
  a.h2[7] = sp;
  a.h2[8] = cl || ja || bn;
  a.h2[9] = wv || kk || pt;
  a.h2[10] = wv || cl || pt;
  a.h2[11] = kk || cw;
  a.h2[12] = translating && cd > eps;
  a.h2[13] = translating && cd < -eps;
  return a;
}

SynthResult synth_action_clip(const ActionSpec& spec, int64_t canvas_h,
                              int64_t canvas_w, int64_t length,
                              uint64_t seed) {
  validate_spec(spec, "synth_action_clip");
  if (length < 8) {
    throw ArgumentError("synth_action_clip: length must be >= 8, got " +
                        std::to_string(length));
  }
  if (canvas_h < 8 || canvas_w < 8) {
    throw ArgumentError("synth_action_clip: canvas must be at least 8x8, got " +
                        std::to_string(canvas_w) + "x" +
                        std::to_string(canvas_h));
  }
  Palette pal = palette_for(spec.character_variant, mix_seed(seed, 7));
  RenderedAction act = layout_action(spec, length, (canvas_w - 1) / 2.0,
                                     (canvas_h - 1) / 2.0, 0, pal);
  if (act.box.x0 < 0.0 || act.box.x1 > canvas_w - 1.0 || act.box.y0 < 0.0 ||
      act.box.y1 > canvas_h - 1.0) {
    throw GeometryError(
        "synth_action_clip: sprite trajectory box " +
        std::to_string(act.box.x1 - act.box.x0) + "x" +
        std::to_string(act.box.y1 - act.box.y0) + " px exceeds canvas " +
        std::to_string(canvas_w) + "x" + std::to_string(canvas_h) +
        " (program " + motion_program_name(spec.motion_program) + ")");
  }
  std::vector<float> bg =
      make_background(canvas_h, canvas_w, BackgroundKind::kNoise,
                      mix_seed(seed, 13));
  SynthResult out;
  out.clip = Tensor::zeros(Shape{length, canvas_h, canvas_w, 3});
  const int64_t frame_n = canvas_h * canvas_w * 3;
  for (int64_t t = 0; t < length; ++t) {
    float* frame = out.clip.data() + t * frame_n;
    std::memcpy(frame, bg.data(), static_cast<size_t>(frame_n) * sizeof(float));
    for (const Capsule& c : act.frames[static_cast<size_t>(t)]) {
      draw_capsule(frame, canvas_h, canvas_w, c);
    }
  }
  out.annotation = annotation_for(spec, act.box, (length - 1) / 2.0,
                                  static_cast<double>(length));
  return out;
}

std::array<CropItem, 5> crop5(const Tensor& clip, int64_t t) {
  if (clip.rank() != 4 || clip.shape()[3] != 3) {
    throw ShapeError("crop5: clip must be (T,H,W,3), got " +
                     clip.shape().str());
  }
  const int64_t T = clip.shape()[0], H = clip.shape()[1], W = clip.shape()[2];
  if (t < 0 || 2 * t >= std::min(H, W)) {
    throw ArgumentError("crop5: margin t=" + std::to_string(t) +
                        " must satisfy 0 <= t < min(H,W)/2 for a " +
                        std::to_string(W) + "x" + std::to_string(H) + " clip");
  }
  const int64_t w2 = W - 2 * t, h2 = H - 2 * t;
  const int dxs[5] = {-1, 1, -1, 1, 0};
  const int dys[5] = {-1, -1, 1, 1, 0};
  std::array<CropItem, 5> out;
  for (int i = 0; i < 5; ++i) {
    const int64_t dx = dxs[i] * t, dy = dys[i] * t;
    const int64_t x0 = t + dx, y0 = t + dy;
    CropItem& item = out[static_cast<size_t>(i)];
    item.clip = Tensor::zeros(Shape{T, h2, w2, 3});
    for (int64_t tt = 0; tt < T; ++tt) {
      for (int64_t yy = 0; yy < h2; ++yy) {
        const float* src =
            clip.data() + ((tt * H + y0 + yy) * W + x0) * 3;
        float* dst = item.clip.data() + ((tt * h2 + yy) * w2) * 3;
        std::memcpy(dst, src, static_cast<size_t>(w2) * 3 * sizeof(float));
      }
    }
    item.center_dx = static_cast<double>(dx);
    item.center_dy = static_cast<double>(dy);
    item.loc_w = -static_cast<double>(dx) / w2;
    item.loc_h = -static_cast<double>(dy) / h2;
  }
  return out;
}

std::vector<AugmentedSample> augment(const Tensor& clip,
                                     const ActionAnnotation& annotation,
                                     uint64_t seed) {
  if (clip.rank() != 4 || clip.shape()[3] != 3) {
    throw ShapeError("augment: clip must be (T,H,W,3), got " +
                     clip.shape().str());
  }
  const int64_t T = clip.shape()[0], H = clip.shape()[1], W = clip.shape()[2];
  const int64_t t_lo =
      std::max<int64_t>(1, std::llround(10.0 * W / 256.0));
  const int64_t t_hi = std::min<int64_t>(std::llround(50.0 * W / 256.0),
                                         (std::min(H, W) - 8) / 2);
  if (t_hi < t_lo) {
    throw ArgumentError("augment: clip " + std::to_string(W) + "x" +
                        std::to_string(H) +
                        " is too small for the crop-margin range");
  }
  Rng rng(seed);
  const int64_t t =
      t_lo + static_cast<int64_t>(rng.uniform_int(
                 static_cast<uint64_t>(t_hi - t_lo + 1)));
  auto crops = crop5(clip, t);
  std::vector<AugmentedSample> out;
  out.reserve(5);
  for (auto& crop : crops) {
    const double p = rng.uniform(0.5, 1.5);
    const int64_t nt = std::max<int64_t>(8, std::llround(T * p));
    AugmentedSample s;
    s.clip = temporal_rescale(crop.clip, nt);
    s.annotation = annotation;
    const int64_t h2 = crop.clip.shape()[1], w2 = crop.clip.shape()[2];
    const double x0 = t + crop.center_dx, y0 = t + crop.center_dy;
    Cuboid& v = s.annotation.volume;
    v.cx = annotation.volume.cx - x0;
    v.cy = annotation.volume.cy - y0;
    v.ct = (annotation.volume.ct + 0.5) * nt / T - 0.5;
    v.l = annotation.volume.l * static_cast<double>(nt) / T;
    s.annotation.loc_w = (v.cx - (w2 - 1) / 2.0) / w2;
    s.annotation.loc_h = (v.cy - (h2 - 1) / 2.0) / h2;
    out.push_back(std::move(s));
  }
  return out;
}

ComposeResult compose_multiaction_video(const std::vector<PlacedAction>& actions,
                                        int64_t canvas_h, int64_t canvas_w,
                                        int64_t length, BackgroundKind background,
                                        uint64_t seed) {
  if (canvas_h < 8 || canvas_w < 8 || length < 1) {
    throw ArgumentError("compose_multiaction_video: canvas must be >= 8x8 and "
                        "length >= 1, got " +
                        std::to_string(canvas_w) + "x" +
                        std::to_string(canvas_h) + "x" +
                        std::to_string(length));
  }
  ComposeResult out;
  out.video = Tensor::zeros(Shape{length, canvas_h, canvas_w, 3});
  std::vector<float> bg =
      make_background(canvas_h, canvas_w, background, mix_seed(seed, 1));
  const int64_t frame_n = canvas_h * canvas_w * 3;
  for (int64_t t = 0; t < length; ++t) {
    std::memcpy(out.video.data() + t * frame_n, bg.data(),
                static_cast<size_t>(frame_n) * sizeof(float));
  }
  for (size_t i = 0; i < actions.size(); ++i) {
    const PlacedAction& pa = actions[i];
    const std::string tag =
        "compose_multiaction_video: action " + std::to_string(i);
    validate_spec(pa.spec, tag.c_str());
    if (pa.length < 8) {
      throw ArgumentError(tag + ": length must be >= 8, got " +
                          std::to_string(pa.length));
    }
    if (pa.t0 < 0 || pa.t0 + pa.length > length) {
      throw GeometryError(tag + ": frames [" + std::to_string(pa.t0) + ", " +
                          std::to_string(pa.t0 + pa.length) +
                          ") fall outside the video's [0, " +
                          std::to_string(length) + ")");
    }
    Palette pal = palette_for(pa.spec.character_variant,
                              mix_seed(seed, 100 + static_cast<uint64_t>(i)));
    RenderedAction act = layout_action(pa.spec, pa.length, pa.x, pa.y, 0, pal);
    if (act.box.x0 < 0.0 || act.box.x1 > canvas_w - 1.0 || act.box.y0 < 0.0 ||
        act.box.y1 > canvas_h - 1.0) {
      throw GeometryError(tag + ": placement (" + std::to_string(pa.x) + ", " +
                          std::to_string(pa.y) + ") puts its box outside the " +
                          std::to_string(canvas_w) + "x" +
                          std::to_string(canvas_h) + " canvas");
    }
    for (int64_t k = 0; k < pa.length; ++k) {
      float* frame = out.video.data() + (pa.t0 + k) * frame_n;
      for (const Capsule& c : act.frames[static_cast<size_t>(k)]) {
        draw_capsule(frame, canvas_h, canvas_w, c);
      }
    }
    out.annotations.push_back(annotation_for(
        pa.spec, act.box, pa.t0 + (pa.length - 1) / 2.0,
        static_cast<double>(pa.length)));
  }
  return out;
}

ActionSpec sample_action_spec(int category_id, int64_t canvas_h,
                              int64_t canvas_w, int64_t length, Rng& rng) {
  ActionSpec s;
  s.category_id = category_id;
  s.motion_program = motion_program_for_category(category_id);
  s.cyclic = motion_program_is_cyclic(s.motion_program);
  s.character_variant = static_cast<int>(rng.uniform_int(kNumCharacterVariants));
  s.limb_phase = rng.uniform(0.0, 2.0 * kPi);

  using MP = MotionProgram;
  const MP p = s.motion_program;
  const bool translating =
      p == MP::kTranslate || p == MP::kJumpArc || p == MP::kCrouchWalk;
  if (p == MP::kTranslate) {
    uint64_t roll = rng.uniform_int(10);
    if (roll < 6) {
      s.direction = rng.uniform_int(2) ? kPi : 0.0;
    } else if (roll < 8) {
      s.direction = rng.uniform_int(2) ? 1.5 * kPi : 0.5 * kPi;
    } else {
      s.direction = 0.25 * kPi + 0.5 * kPi * static_cast<double>(rng.uniform_int(4));
    }
  } else {
    s.direction = rng.uniform_int(2) ? kPi : 0.0;
  }

  if (translating) {
    // Keep the whole trajectory inside the canvas: budget the spans left
    // after the sprite's own extents, then cap the per-frame step.
    const double span_x = std::max(4.0, static_cast<double>(canvas_w) - 34.0);
    const double span_y = std::max(4.0, static_cast<double>(canvas_h) - 38.0);
    const double gain = p == MP::kCrouchWalk ? 0.8 : 1.0;
    const double steps = static_cast<double>(std::max<int64_t>(1, length - 1));
    double limit = 1e9;
    const double cd = std::abs(std::cos(s.direction));
    const double sd = p == MP::kTranslate ? std::abs(std::sin(s.direction)) : 0.0;
    if (cd > 1e-9) limit = std::min(limit, span_x / (cd * gain * steps));
    if (sd > 1e-9) limit = std::min(limit, span_y / (sd * gain * steps));
    double hi = std::max(0.3, std::min(2.2, 0.9 * limit));
    double lo = std::max(0.25, 0.4 * hi);
    s.speed = rng.uniform(lo, hi);
  } else {
    s.speed = rng.uniform(0.7, 2.3);
  }
  return s;
}

}  // namespace vap
