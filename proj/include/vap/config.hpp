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
// Run configuration: one flat, line-oriented "key = value" file drives
// every subcommand.  Unknown keys are rejected, and canonical_text echoes
// the complete effective configuration (every key, fixed order, doubles in
// round-trip precision) so the echo file alone reproduces a run.

#pragma once

#include <cstdint>
#include <string>

#include "vap/dataset.hpp"
#include "vap/model.hpp"

namespace vap {

struct RunConfig {
  // General.
  std::string profile = "toy";  // "toy" or "paper"
  uint64_t seed = 0;
  std::string data_root;
  std::string checkpoint;
  std::string output_dir;
  std::string proposals;     // optional proposal file for parse
  std::string detections;    // detection file for eval
  std::string ground_truth;  // ground-truth file for eval
  std::string clip;          // clip path for inspect

  // Aligned-clip dataset generation.
  int64_t synth_categories = 10;
  int64_t synth_clips_per_category = 40;
  int64_t synth_canvas = 72;
  double train_fraction = 0.9;

  // Composite-video generation (plus their aligned fine-tuning clips).
  int64_t compose_categories = 5;
  int64_t compose_train_clips_per_category = 40;
  int64_t compose_background_clips = 40;
  int64_t compose_videos = 24;
  int64_t compose_canvas_h = 96;
  int64_t compose_canvas_w = 128;
  int64_t compose_length = 48;
  int64_t compose_min_actions = 1;
  int64_t compose_max_actions = 3;
  std::string compose_background = "noise";  // flat | noise | distractors

  // Input materialization.
  double flow_alpha = 0.06;
  int64_t flow_iterations = 40;
  bool zero_motion = false;  // intensity-only ablation input

  // Optimization.  batch_size defaults to 20 under the toy profile and 40
  // under the paper profile.
  int64_t batch_size = 20;
  int64_t max_iterations = 1000;
  double base_lr = 0.005;
  double lr_decay = 0.3;
  int64_t lr_step = 50000;
  double momentum = 0.9;
  int64_t checkpoint_every = 0;

  // Joint-loss weights.
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double beta = 0.5;

  // Parsing.
  double nms_iou = 0.3;
  double proposal_stride = 0.5;
  bool overlay = false;

  // Evaluation.
  double precision_fraction = 0.125;
  double recall_fraction = 0.125;
  double hit_threshold = 0.6;
  std::string attributes_from = "matched";  // matched | gt_crops

  // Inspection.
  std::string inspect_layer = "conv2";

  void validate() const;  // ConfigError on out-of-range values

  // Complete effective configuration, one key per line, fixed order.
  // parse_run_config(canonical_text()) reproduces the struct exactly.
  std::string canonical_text() const;
};

// Parses "key = value" lines ('#' comments and blank lines skipped).
// Unknown or duplicate keys raise ConfigError naming the line; values are
// type-checked per key.  Profile-dependent defaults (batch_size) follow
// the file's profile before explicit keys override them.
RunConfig parse_run_config(const std::string& text);

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

// Network shape for this run: the profile template with the run's loss
// weights applied.
ModelConfig model_config_for(const RunConfig& cfg, int64_t categories,
                             bool include_background);

// Input materialization options for this run (input size from profile).
MaterializeOptions materialize_options_for(const RunConfig& cfg);

}  // namespace vap
