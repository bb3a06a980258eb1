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
// Detection and attribute metrics.  Detections match ground truth under
// fractional volume-overlap rules (precision side normalized by the
// detection volume, recall side by the ground-truth volume); ranked match
// flags turn into per-category average precision and MAP; attribute
// probabilities score per-column ROC AUC with mean/std and hit counts per
// level.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vap/parsing.hpp"
#include "vap/synth.hpp"
#include "vap/tensor.hpp"

namespace vap {

// Volume-overlap thresholds; both default to one-eighth.
struct MatchRule {
  double precision_fraction = 0.125;
  double recall_fraction = 0.125;
};

// One annotated action of one video.
struct GroundTruth {
  std::string video_id;
  int category_id = 0;
  Cuboid volume;
  std::array<uint8_t, kNumH1> h1_bits{};
  std::array<uint8_t, kNumH2> h2_bits{};
};

// Text form: "video_id x y t w h l category h1bits h2bits" per line,
// tab-separated, bits as 0/1 strings.
void save_ground_truth(const std::string& path,
                       const std::vector<GroundTruth>& gts);
std::vector<GroundTruth> load_ground_truth(const std::string& path);

struct MatchResult {
  std::vector<uint8_t> detection_tp;  // per detection, in the given order
  std::vector<int64_t> matched_gt;    // claimed GT index, -1 for FP
  std::vector<uint8_t> gt_covered;    // per ground truth
};

// Greedy matching over score-descending detections (ArgumentError if the
// list is not sorted that way).  A detection is TP when the intersection
// with some unclaimed same-video same-category GT is at least
// precision_fraction of the detection volume; each detection claims its
// largest-overlap qualifying GT, and each GT is claimable once.  A GT
// counts as covered when any detection of its video and category overlaps
// it by at least recall_fraction of the GT volume (independent of
// claiming).  Detections of categories absent from the GT set are FPs.
MatchResult match_detections(const std::vector<Detection>& detections,
                             const std::vector<GroundTruth>& gts,
                             const MatchRule& rule);

// All-points average precision with the monotone envelope: walk the ranked
// flags, take precision at each recall step, and integrate the envelope.
// Zero ground truths yield 0.  ArgumentError when flags claim more true
// positives than ground truths exist.
double average_precision(const std::vector<uint8_t>& ranked_tp_flags,
                         int64_t num_ground_truths);

// Unweighted mean over categories; ArgumentError on an empty map.
double map_score(const std::map<int, double>& per_category_ap);

// Mann-Whitney AUC: P(score+ > score-) + 0.5 P(equal).  Exact pair
// counting at desk scale, rank-sum with tie averaging when the pair count
// grows large; both are exact.  Returns nullopt when only one class is
// present.  ArgumentError on size mismatch, empty input or non-finite
// scores.
std::optional<double> roc_auc(const std::vector<double>& scores,
                              const std::vector<uint8_t>& labels);

struct AttributeLevelReport {
  std::vector<double> auc;        // per column; meaningful iff defined[i]
  std::vector<uint8_t> defined;   // 0 for all-constant label columns
  double mean_auc = 0.0;          // over defined columns
  double std_auc = 0.0;           // population std over defined columns
  int hits = 0;                   // defined columns with AUC >= threshold
  int defined_count = 0;
  int excluded_count = 0;
};

struct AttributeReport {
  AttributeLevelReport h1, h2;
  double hit_threshold = 0.6;
};

// Per-attribute AUC of aligned probability rows against label rows.
// probs are (N, 19) and (N, 14); bits vectors must have N entries.
AttributeReport attribute_report(
    const Tensor& h1_probs, const Tensor& h2_probs,
    const std::vector<std::array<uint8_t, kNumH1>>& h1_bits,
    const std::vector<std::array<uint8_t, kNumH2>>& h2_bits,
    double hit_threshold = 0.6);

struct CategoryEval {
  int category_id = 0;
  int64_t num_gts = 0;
  int64_t num_detections = 0;
  int64_t true_positives = 0;
  double ap = 0.0;
};

struct PrPoint {
  int category_id = 0;
  double recall = 0.0;
  double precision = 0.0;
};

struct DetectionEval {
  std::vector<CategoryEval> per_category;  // ascending category id
  double map = 0.0;
  int64_t num_gts = 0;
  int64_t gts_covered = 0;
  std::vector<PrPoint> pr_points;  // raw ranked points per category
};

// Sorts detections by descending score, matches, and reduces to
// per-category AP / MAP / coverage.  Categories are taken from the GT set;
// detections of unknown categories only ever count against precision.
DetectionEval evaluate_detections(const std::vector<Detection>& detections,
                                  const std::vector<GroundTruth>& gts,
                                  const MatchRule& rule);

// Human-readable tables (detection part, plus attributes when non-null).
std::string format_eval_report(const DetectionEval& det,
                               const AttributeReport* attrs);

// Machine-readable artifacts.
void write_category_csv(const std::string& path, const DetectionEval& det);
void write_attribute_csv(const std::string& path, const AttributeReport& at);
void write_pr_csv(const std::string& path, const DetectionEval& det);

}  // namespace vap
