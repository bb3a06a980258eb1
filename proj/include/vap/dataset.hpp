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
// Corpus generation, manifests, sample materialization and the training
// loop.  A generated dataset directory holds one tensor blob per clip, a
// specs.tsv with the generating parameters, and an all.manifest that ties
// each clip path to its annotation.  Everything downstream (splits, cached
// network inputs, batches) is a pure function of (files, seed), so a rerun
// with the same inputs reproduces artifacts byte for byte.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vap/model.hpp"
#include "vap/synth.hpp"
#include "vap/tensor.hpp"

namespace vap {

struct ManifestEntry {
  std::string path;  // clip blob, relative to the manifest's directory
  ActionAnnotation annotation;
};

struct DatasetManifest {
  std::string split = "all";  // all / train / test
  uint64_t seed = 0;
  std::vector<ManifestEntry> entries;
};

// Tab-separated text form with a fixed header line; stable across reruns.
std::string manifest_to_text(const DatasetManifest& m);
// ParseError messages carry the 1-based line number of the offending line.
DatasetManifest manifest_from_text(const std::string& text);
void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

struct SynthDatasetConfig {
  int num_categories = 10;
  int clips_per_category = 40;
  int64_t canvas_h = 72, canvas_w = 72;
  uint64_t seed = 0;
};

// Renders the corpus into root/: clip_NNNN.aptn blobs, specs.tsv, and
// all.manifest.  Returns the written manifest.  Clip lengths are drawn per
// clip from {16, 24, 32, 48}.  ArgumentError on a non-positive category or
// clip count.
DatasetManifest generate_dataset(const std::string& root,
                                 const SynthDatasetConfig& cfg);

struct SplitManifests {
  DatasetManifest train, test;
};

// Shuffles root/all.manifest with the seeded stream and cuts it at
// round(n * train_fraction).  Every entry lands in exactly one half.
// DataError when the manifest is missing or empty; ArgumentError for a
// fraction outside (0, 1).
SplitManifests build_manifest(const std::string& root, double train_fraction,
                              uint64_t seed);

// One network-ready sample.
struct TrainSample {
  Tensor input;  // (3, T, H, W) at the network input geometry
  int category = 0;
  std::array<uint8_t, kNumH1> h1{};
  std::array<uint8_t, kNumH2> h2{};
  float loc_w = 0.f, loc_h = 0.f;
};

struct MaterializeOptions {
  int64_t in_t = 8, in_h = 32, in_w = 32;  // network input geometry
  double flow_alpha = 0.06;
  int flow_iterations = 40;
  // Appearance-only ablation: zero the two velocity planes after warping,
  // leaving the architecture and intensity plane untouched.
  bool zero_motion = false;
};

// Training view: the five seeded random crops with temporal rescale.
std::vector<TrainSample> materialize_train(const Tensor& clip,
                                           const ActionAnnotation& ann,
                                           const MaterializeOptions& opt,
                                           uint64_t seed);

// Deterministic margin used by the evaluation view: midway through the
// training crop range for this canvas.
int64_t eval_crop_margin(int64_t h, int64_t w);

// Evaluation view: the four corner crops plus the center crop at
// eval_crop_margin, original frame count.  Location targets are recomputed
// from the annotation for each crop.
std::vector<TrainSample> materialize_eval(const Tensor& clip,
                                          const ActionAnnotation& ann,
                                          const MaterializeOptions& opt);

// Loads every entry of m (paths resolved against root) and materializes it.
// Entry i expands to samples 5i..5i+4 in order.  Per-entry augmentation
// seeds derive from (seed, entry index), so the cache is independent of
// split membership elsewhere.
std::vector<TrainSample> materialize_manifest(const std::string& root,
                                              const DatasetManifest& m,
                                              const MaterializeOptions& opt,
                                              bool train_view, uint64_t seed);

// Fills x (B, 3, T, H, W) and t with rows drawn from samples by the
// (seed, iteration) stream; any iteration's batch is reproducible without
// replaying the ones before it.
void assemble_batch(const std::vector<TrainSample>& samples,
                    int64_t batch_size, uint64_t seed, int64_t iteration,
                    Tensor* x, Targets* t);

struct TrainRunConfig {
  int64_t batch_size = 20;
  int64_t max_iterations = 1000;
  int64_t start_iteration = 0;  // resume point; batches are keyed by index
  double base_lr = 0.005;
  double lr_decay = 0.3;
  int64_t lr_step = 50000;
  double momentum = 0.9;
  uint64_t seed = 0;              // batch stream
  int64_t checkpoint_every = 0;   // 0 = final checkpoint only
  std::string checkpoint_path;    // empty = keep the model in memory only
  std::string loss_log_path;      // CSV; empty = no log
};

// SGD over materialized samples.  Writes one CSV row per iteration
// (iteration, lr, L_cat, L_H1, L_H2, L_bbox, total), periodic checkpoints
// at multiples of checkpoint_every, and a final checkpoint at
// max_iterations.  Returns the last breakdown (zeros when no iteration
// ran).  NumericError on a non-finite loss, naming the iteration and the
// per-head values.
LossBreakdown train_model(Model* model,
                          const std::vector<TrainSample>& samples,
                          const TrainRunConfig& cfg);

// Batched forward over all samples; rows concatenated in sample order.
HeadOutputs predict_all(const Model& model,
                        const std::vector<TrainSample>& samples,
                        int64_t batch_size);

}  // namespace vap
