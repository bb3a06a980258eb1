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
// Test-time multi-action parsing.  Proposals (sliding-window or loaded
// from a file) are cut out of the video volume, warped to the network
// input, scored by the model, refined by the location head and reduced by
// per-category non-maximum suppression into Detection records.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vap/dataset.hpp"
#include "vap/model.hpp"
#include "vap/synth.hpp"
#include "vap/tensor.hpp"

namespace vap {

// Candidate action cuboid; centers (x, y, t) with extents (w, h, l).
struct Proposal {
  std::string video_id;
  double x = 0.0, y = 0.0, t = 0.0;
  double w = 1.0, h = 1.0, l = 1.0;
};

// Scored, refined, non-background parse output.
struct Detection {
  std::string video_id;
  double x = 0.0, y = 0.0, t = 0.0;  // refined center; t is the proposal's
  double w = 1.0, h = 1.0, l = 1.0;
  int category_id = 0;
  double score = 0.0;  // in [0,1]
  std::array<double, kNumH1> h1_probs{};
  std::array<double, kNumH2> h2_probs{};
};

Cuboid proposal_cuboid(const Proposal& p);
Cuboid detection_cuboid(const Detection& d);

// One cuboid size of the proposal grid.
struct ProposalScale {
  double w = 1.0, h = 1.0, l = 1.0;
};

// Regular grid of cuboids fully inside the video: per scale, centers step
// by round(stride * extent) (at least one pixel/frame) along each axis.
// ArgumentError on an empty scale list, a scale exceeding the video, or a
// non-positive stride.
std::vector<Proposal> sliding_window_proposals(
    const std::string& video_id, int64_t width, int64_t height,
    int64_t frames, const std::vector<ProposalScale>& scales,
    double stride_w, double stride_h, double stride_l);

// Stock scale triple clamped to the video dimensions (deduplicated when
// clamping collapses two scales); with the default 0.5 strides this lands
// in the hundreds of proposals on typical composite-video dimensions.
std::vector<ProposalScale> default_proposal_scales(int64_t width,
                                                   int64_t height,
                                                   int64_t frames);

// Text form: one proposal per line, "video_id x y t w h l", tab-separated.
// Lines starting with '#' are skipped.
struct ProposalLoad {
  std::vector<Proposal> proposals;
  int clipped = 0;  // how many volumes had to be pulled back into bounds
};

// Reads and validates proposals against the video bounds: volumes poking
// past an edge are clipped (and counted); extents below one pixel/frame
// are raised to one.  ParseError with the 1-based line number on malformed
// lines; GeometryError naming the line when a volume misses the video
// entirely.  An empty file is an empty list.
ProposalLoad load_proposals(const std::string& path, int64_t width,
                            int64_t height, int64_t frames);
void save_proposals(const std::string& path,
                    const std::vector<Proposal>& proposals);

// Detection files append category, score and the attribute probabilities
// to the proposal fields (42 columns).
void save_detections(const std::string& path,
                     const std::vector<Detection>& detections);
std::vector<Detection> load_detections(const std::string& path);

// Shifts the proposal center by the location-head output scaled by the
// proposal extents; the temporal coordinate passes through unchanged.
// ArgumentError on non-finite offsets.
Cuboid refine_location(const Proposal& p, double loc_w, double loc_h);
// Raw-pixel variant: adds the shifts directly.
Cuboid refine_location_raw(const Proposal& p, double shift_x, double shift_y);

// Axis-aligned intersection volume over union volume, in [0,1].
// GeometryError on non-positive extents.
double iou_3d(const Cuboid& a, const Cuboid& b);

// Greedy per-category suppression: walk detections by descending score
// (ties keep input order) and keep one iff its IoU with every kept
// detection of the same category is <= iou_threshold.  Output preserves
// that walk order.  ArgumentError on a non-finite score or a threshold
// outside [0,1].
std::vector<Detection> nms(const std::vector<Detection>& detections,
                           double iou_threshold);

// Integer-box crop of a (3, T, H, W) appearance-motion volume starting at
// (t0, y0, x0); regions outside the volume are zero (zero intensity, zero
// velocity), so edge boxes stay usable.
Tensor extract_am_subvolume(const Tensor& am, int64_t x0, int64_t y0,
                            int64_t t0, int64_t w, int64_t h, int64_t l);

struct ParseConfig {
  MaterializeOptions input;  // network geometry and flow parameters
  double nms_iou = 0.3;
  int64_t batch_size = 20;
};

// Full parse of one video (T, H, W, 3): appearance-motion is composed once
// for the whole video, each proposal's subvolume is cut from it, warped to
// the network input and scored; background-argmax proposals are dropped,
// survivors keep the maximum non-background class probability as score,
// their centers are refined by the location head, and per-category NMS
// produces the result.  Deterministic for a fixed checkpoint and proposal
// list.  ConfigError when the model has no background class.
std::vector<Detection> parse_video(const Model& model,
                                   const std::string& video_id,
                                   const Tensor& video,
                                   const std::vector<Proposal>& proposals,
                                   const ParseConfig& cfg);

}  // namespace vap
