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

#include "vap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include "vap/errors.hpp"
#include "vap/io_util.hpp"

namespace vap {
namespace {

std::string fmt_g(double v) { return io::format_g17(v); }

struct Interval {
  double lo, hi;
};

Interval axis_interval(double center, double extent) {
  return {center - extent / 2.0, center + extent / 2.0};
}

// Volume and pairwise intersection from the same interval endpoints, so a
// cuboid intersected with itself reproduces its own volume bit for bit.
double cuboid_volume(const Cuboid& c) {
  const Interval x = axis_interval(c.cx, c.w);
  const Interval y = axis_interval(c.cy, c.h);
  const Interval t = axis_interval(c.ct, c.l);
  return (x.hi - x.lo) * (y.hi - y.lo) * (t.hi - t.lo);
}

double cuboid_intersection(const Cuboid& a, const Cuboid& b) {
  double vol = 1.0;
  auto axis = [&vol](double ca, double ea, double cb, double eb) {
    const Interval ia = axis_interval(ca, ea);
    const Interval ib = axis_interval(cb, eb);
    const double lo = std::max(ia.lo, ib.lo);
    const double hi = std::min(ia.hi, ib.hi);
    vol *= std::max(0.0, hi - lo);
  };
  axis(a.cx, a.w, b.cx, b.w);
  axis(a.cy, a.h, b.cy, b.h);
  axis(a.ct, a.l, b.ct, b.l);
  return vol;
}

void check_cuboid(const Cuboid& c, const char* what) {
  if (!(std::isfinite(c.cx) && std::isfinite(c.cy) && std::isfinite(c.ct) &&
        std::isfinite(c.w) && std::isfinite(c.h) && std::isfinite(c.l))) {
    throw GeometryError(std::string(what) + ": non-finite cuboid");
  }
  if (!(c.w > 0.0 && c.h > 0.0 && c.l > 0.0)) {
    throw GeometryError(std::string(what) + ": non-positive cuboid extent");
  }
}

void check_rule(const MatchRule& rule) {
  auto ok = [](double f) { return std::isfinite(f) && f > 0.0 && f <= 1.0; };
  if (!ok(rule.precision_fraction) || !ok(rule.recall_fraction)) {
    throw ArgumentError("match rule fractions must lie in (0, 1]");
  }
}

std::string bits_to_string(const uint8_t* bits, int n) {
  std::string s(static_cast<size_t>(n), '0');
  for (int i = 0; i < n; ++i) s[static_cast<size_t>(i)] = bits[i] ? '1' : '0';
  return s;
}

void parse_bits(const std::string& field, uint8_t* out, int n,
                const std::string& where) {
  if (static_cast<int>(field.size()) != n) {
    throw ParseError(where + ": expected " + std::to_string(n) +
                     " attribute bits, got " + std::to_string(field.size()));
  }
  for (int i = 0; i < n; ++i) {
    const char c = field[static_cast<size_t>(i)];
    if (c != '0' && c != '1') {
      throw ParseError(where + ": attribute bits must be 0 or 1");
    }
    out[i] = static_cast<uint8_t>(c - '0');
  }
}

double parse_double_field(const std::string& field, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size() || !std::isfinite(v)) {
      throw ParseError(where + ": bad number '" + field + "'");
    }
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError(where + ": bad number '" + field + "'");
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

// Exact rank-sum AUC with average ranks over tie runs.
double auc_by_ranks(const std::vector<std::pair<double, uint8_t>>& sorted,
                    int64_t n_pos, int64_t n_neg) {
  const int64_t n = static_cast<int64_t>(sorted.size());
  double rank_sum_pos = 0.0;
  int64_t i = 0;
  while (i < n) {
    int64_t j = i;
    while (j < n && sorted[static_cast<size_t>(j)].first ==
                        sorted[static_cast<size_t>(i)].first) {
      ++j;
    }
    // 1-based ranks i+1 .. j share the average rank.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (int64_t k = i; k < j; ++k) {
      if (sorted[static_cast<size_t>(k)].second) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace

void save_ground_truth(const std::string& path,
                       const std::vector<GroundTruth>& gts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# video_id\tx\ty\tt\tw\th\tl\tcategory\th1\th2\n";
  for (const GroundTruth& g : gts) {
    if (g.video_id.empty() || g.video_id.find('\t') != std::string::npos) {
      throw ArgumentError("ground truth video id must be non-empty and "
                          "tab-free");
    }
    check_cuboid(g.volume, "save_ground_truth");
    if (g.category_id < 0) {
      throw ArgumentError("ground truth category must be non-negative");
    }
    out << g.video_id << '\t' << fmt_g(g.volume.cx) << '\t'
        << fmt_g(g.volume.cy) << '\t' << fmt_g(g.volume.ct) << '\t'
        << fmt_g(g.volume.w) << '\t' << fmt_g(g.volume.h) << '\t'
        << fmt_g(g.volume.l) << '\t' << g.category_id << '\t'
        << bits_to_string(g.h1_bits.data(), kNumH1) << '\t'
        << bits_to_string(g.h2_bits.data(), kNumH2) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<GroundTruth> load_ground_truth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<GroundTruth> gts;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path + " line " + std::to_string(line_no);
    const std::vector<std::string> f = split_tabs(line);
    if (f.size() != 10) {
      throw ParseError(where + ": expected 10 tab-separated fields, got " +
                       std::to_string(f.size()));
    }
    GroundTruth g;
    g.video_id = f[0];
    if (g.video_id.empty()) throw ParseError(where + ": empty video id");
    g.volume.cx = parse_double_field(f[1], where);
    g.volume.cy = parse_double_field(f[2], where);
    g.volume.ct = parse_double_field(f[3], where);
    g.volume.w = parse_double_field(f[4], where);
    g.volume.h = parse_double_field(f[5], where);
    g.volume.l = parse_double_field(f[6], where);
    if (!(g.volume.w > 0.0 && g.volume.h > 0.0 && g.volume.l > 0.0)) {
      throw ParseError(where + ": cuboid extents must be positive");
    }
    const double cat = parse_double_field(f[7], where);
    if (cat < 0.0 || cat != std::floor(cat)) {
      throw ParseError(where + ": bad category '" + f[7] + "'");
    }
    g.category_id = static_cast<int>(cat);
    parse_bits(f[8], g.h1_bits.data(), kNumH1, where);
    parse_bits(f[9], g.h2_bits.data(), kNumH2, where);
    gts.push_back(std::move(g));
  }
  return gts;
}

MatchResult match_detections(const std::vector<Detection>& detections,
                             const std::vector<GroundTruth>& gts,
                             const MatchRule& rule) {
  check_rule(rule);
  const int64_t nd = static_cast<int64_t>(detections.size());
  const int64_t ng = static_cast<int64_t>(gts.size());
  for (int64_t i = 0; i < nd; ++i) {
    if (!std::isfinite(detections[static_cast<size_t>(i)].score)) {
      throw ArgumentError("match_detections: non-finite detection score");
    }
    check_cuboid(detection_cuboid(detections[static_cast<size_t>(i)]),
                 "match_detections");
    if (i > 0 && detections[static_cast<size_t>(i)].score >
                     detections[static_cast<size_t>(i - 1)].score) {
      throw ArgumentError(
          "match_detections: detections must be sorted by descending score");
    }
  }
  for (const GroundTruth& g : gts) check_cuboid(g.volume, "match_detections");

  MatchResult res;
  res.detection_tp.assign(static_cast<size_t>(nd), 0);
  res.matched_gt.assign(static_cast<size_t>(nd), -1);
  res.gt_covered.assign(static_cast<size_t>(ng), 0);

  std::vector<uint8_t> claimed(static_cast<size_t>(ng), 0);
  for (int64_t d = 0; d < nd; ++d) {
    const Detection& det = detections[static_cast<size_t>(d)];
    const Cuboid dc = detection_cuboid(det);
    const double dvol = cuboid_volume(dc);
    double best_frac = -1.0;
    int64_t best_g = -1;
    for (int64_t g = 0; g < ng; ++g) {
      const GroundTruth& gt = gts[static_cast<size_t>(g)];
      if (claimed[static_cast<size_t>(g)]) continue;
      if (gt.category_id != det.category_id || gt.video_id != det.video_id) {
        continue;
      }
      const double frac = cuboid_intersection(dc, gt.volume) / dvol;
      if (frac > best_frac) {
        best_frac = frac;
        best_g = g;
      }
    }
    if (best_g >= 0 && best_frac >= rule.precision_fraction) {
      res.detection_tp[static_cast<size_t>(d)] = 1;
      res.matched_gt[static_cast<size_t>(d)] = best_g;
      claimed[static_cast<size_t>(best_g)] = 1;
    }
  }

  for (int64_t g = 0; g < ng; ++g) {
    const GroundTruth& gt = gts[static_cast<size_t>(g)];
    const double gvol = cuboid_volume(gt.volume);
    for (int64_t d = 0; d < nd; ++d) {
      const Detection& det = detections[static_cast<size_t>(d)];
      if (det.category_id != gt.category_id || det.video_id != gt.video_id) {
        continue;
      }
      const double frac =
          cuboid_intersection(detection_cuboid(det), gt.volume) / gvol;
      if (frac >= rule.recall_fraction) {
        res.gt_covered[static_cast<size_t>(g)] = 1;
        break;
      }
    }
  }
  return res;
}

double average_precision(const std::vector<uint8_t>& ranked_tp_flags,
                         int64_t num_ground_truths) {
  if (num_ground_truths < 0) {
    throw ArgumentError("average_precision: negative ground-truth count");
  }
  const int64_t n = static_cast<int64_t>(ranked_tp_flags.size());
  int64_t total_tp = 0;
  for (uint8_t f : ranked_tp_flags) total_tp += f ? 1 : 0;
  if (total_tp > num_ground_truths) {
    throw ArgumentError(
        "average_precision: more true positives than ground truths");
  }
  if (num_ground_truths == 0 || n == 0) return 0.0;

  std::vector<double> precision(static_cast<size_t>(n));
  int64_t cum_tp = 0;
  for (int64_t i = 0; i < n; ++i) {
    if (ranked_tp_flags[static_cast<size_t>(i)]) ++cum_tp;
    precision[static_cast<size_t>(i)] =
        static_cast<double>(cum_tp) / static_cast<double>(i + 1);
  }
  // Monotone envelope: precision at rank i becomes the max over ranks >= i.
  for (int64_t i = n - 2; i >= 0; --i) {
    precision[static_cast<size_t>(i)] = std::max(
        precision[static_cast<size_t>(i)], precision[static_cast<size_t>(i + 1)]);
  }
  double ap = 0.0;
  const double step = 1.0 / static_cast<double>(num_ground_truths);
  for (int64_t i = 0; i < n; ++i) {
    if (ranked_tp_flags[static_cast<size_t>(i)]) {
      ap += step * precision[static_cast<size_t>(i)];
    }
  }
  return ap;
}

double map_score(const std::map<int, double>& per_category_ap) {
  if (per_category_ap.empty()) {
    throw ArgumentError("map_score: no categories to average");
  }
  double sum = 0.0;
  for (const auto& [cat, ap] : per_category_ap) {
    (void)cat;
    sum += ap;
  }
  return sum / static_cast<double>(per_category_ap.size());
}

std::optional<double> roc_auc(const std::vector<double>& scores,
                              const std::vector<uint8_t>& labels) {
  if (scores.empty()) throw ArgumentError("roc_auc: empty input");
  if (scores.size() != labels.size()) {
    throw ArgumentError("roc_auc: scores and labels differ in length");
  }
  int64_t n_pos = 0, n_neg = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw ArgumentError("roc_auc: non-finite score");
    }
    if (labels[i]) {
      ++n_pos;
    } else {
      ++n_neg;
    }
  }
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  constexpr int64_t kPairLimit = 1000000;
  if (n_pos * n_neg <= kPairLimit) {
    double wins = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (!labels[i]) continue;
      for (size_t j = 0; j < scores.size(); ++j) {
        if (labels[j]) continue;
        if (scores[i] > scores[j]) {
          wins += 1.0;
        } else if (scores[i] == scores[j]) {
          wins += 0.5;
        }
      }
    }
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  }

  std::vector<std::pair<double, uint8_t>> sorted(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    sorted[i] = {scores[i], static_cast<uint8_t>(labels[i] ? 1 : 0)};
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return auc_by_ranks(sorted, n_pos, n_neg);
}

namespace {

AttributeLevelReport level_report(const Tensor& probs,
                                  const std::vector<const uint8_t*>& bit_rows,
                                  int num_bits, double hit_threshold) {
  const int64_t n = probs.shape()[0];
  AttributeLevelReport rep;
  rep.auc.assign(static_cast<size_t>(num_bits), 0.0);
  rep.defined.assign(static_cast<size_t>(num_bits), 0);
  std::vector<double> col_scores(static_cast<size_t>(n));
  std::vector<uint8_t> col_labels(static_cast<size_t>(n));
  const float* p = probs.data();
  std::vector<double> defined_aucs;
  for (int j = 0; j < num_bits; ++j) {
    for (int64_t i = 0; i < n; ++i) {
      col_scores[static_cast<size_t>(i)] =
          static_cast<double>(p[i * num_bits + j]);
      col_labels[static_cast<size_t>(i)] = bit_rows[static_cast<size_t>(i)][j];
    }
    const std::optional<double> auc = roc_auc(col_scores, col_labels);
    if (!auc.has_value()) {
      ++rep.excluded_count;
      continue;
    }
    rep.auc[static_cast<size_t>(j)] = *auc;
    rep.defined[static_cast<size_t>(j)] = 1;
    defined_aucs.push_back(*auc);
    if (*auc >= hit_threshold) ++rep.hits;
  }
  rep.defined_count = static_cast<int>(defined_aucs.size());
  if (!defined_aucs.empty()) {
    const double mean =
        std::accumulate(defined_aucs.begin(), defined_aucs.end(), 0.0) /
        static_cast<double>(defined_aucs.size());
    double var = 0.0;
    for (double a : defined_aucs) var += (a - mean) * (a - mean);
    var /= static_cast<double>(defined_aucs.size());
    rep.mean_auc = mean;
    rep.std_auc = std::sqrt(var);
  }
  return rep;
}

}  // namespace

AttributeReport attribute_report(
    const Tensor& h1_probs, const Tensor& h2_probs,
    const std::vector<std::array<uint8_t, kNumH1>>& h1_bits,
    const std::vector<std::array<uint8_t, kNumH2>>& h2_bits,
    double hit_threshold) {
  if (!(std::isfinite(hit_threshold) && hit_threshold > 0.0 &&
        hit_threshold <= 1.0)) {
    throw ArgumentError("attribute_report: hit threshold must lie in (0, 1]");
  }
  const Shape s1 = h1_probs.shape();
  const Shape s2 = h2_probs.shape();
  if (s1.rank() != 2 || s1[1] != kNumH1) {
    throw ShapeError("attribute_report: first-level probs must be (N, " +
                     std::to_string(kNumH1) + "), got " + s1.str());
  }
  if (s2.rank() != 2 || s2[1] != kNumH2) {
    throw ShapeError("attribute_report: second-level probs must be (N, " +
                     std::to_string(kNumH2) + "), got " + s2.str());
  }
  const int64_t n = s1[0];
  if (n < 1) throw ArgumentError("attribute_report: empty probability rows");
  if (s2[0] != n || static_cast<int64_t>(h1_bits.size()) != n ||
      static_cast<int64_t>(h2_bits.size()) != n) {
    throw ArgumentError("attribute_report: row counts disagree");
  }
  if (!h1_probs.all_finite() || !h2_probs.all_finite()) {
    throw ArgumentError("attribute_report: non-finite probabilities");
  }

  AttributeReport rep;
  rep.hit_threshold = hit_threshold;
  std::vector<const uint8_t*> rows1(static_cast<size_t>(n));
  std::vector<const uint8_t*> rows2(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    rows1[static_cast<size_t>(i)] = h1_bits[static_cast<size_t>(i)].data();
    rows2[static_cast<size_t>(i)] = h2_bits[static_cast<size_t>(i)].data();
  }
  rep.h1 = level_report(h1_probs, rows1, kNumH1, hit_threshold);
  rep.h2 = level_report(h2_probs, rows2, kNumH2, hit_threshold);
  return rep;
}

DetectionEval evaluate_detections(const std::vector<Detection>& detections,
                                  const std::vector<GroundTruth>& gts,
                                  const MatchRule& rule) {
  check_rule(rule);
  std::vector<Detection> ranked = detections;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.score > b.score;
                   });
  const MatchResult match = match_detections(ranked, gts, rule);

  DetectionEval eval;
  eval.num_gts = static_cast<int64_t>(gts.size());
  for (uint8_t c : match.gt_covered) eval.gts_covered += c ? 1 : 0;

  std::map<int, int64_t> gt_counts;
  for (const GroundTruth& g : gts) ++gt_counts[g.category_id];

  std::map<int, double> per_cat_ap;
  for (const auto& [cat, count] : gt_counts) {
    std::vector<uint8_t> flags;
    int64_t n_det = 0;
    int64_t n_tp = 0;
    for (size_t d = 0; d < ranked.size(); ++d) {
      if (ranked[d].category_id != cat) continue;
      ++n_det;
      flags.push_back(match.detection_tp[d]);
      n_tp += match.detection_tp[d] ? 1 : 0;
    }
    CategoryEval ce;
    ce.category_id = cat;
    ce.num_gts = count;
    ce.num_detections = n_det;
    ce.true_positives = n_tp;
    ce.ap = average_precision(flags, count);
    eval.per_category.push_back(ce);
    per_cat_ap[cat] = ce.ap;

    int64_t cum_tp = 0, cum_fp = 0;
    for (size_t i = 0; i < flags.size(); ++i) {
      if (flags[i]) {
        ++cum_tp;
      } else {
        ++cum_fp;
      }
      PrPoint pt;
      pt.category_id = cat;
      pt.recall = static_cast<double>(cum_tp) / static_cast<double>(count);
      pt.precision =
          static_cast<double>(cum_tp) / static_cast<double>(cum_tp + cum_fp);
      eval.pr_points.push_back(pt);
    }
  }
  eval.map = per_cat_ap.empty() ? 0.0 : map_score(per_cat_ap);
  return eval;
}

std::string format_eval_report(const DetectionEval& det,
                               const AttributeReport* attrs) {
  std::ostringstream out;
  char buf[160];
  out << "category        gts    dets      tp        ap\n";
  for (const CategoryEval& c : det.per_category) {
    std::snprintf(buf, sizeof(buf), "%8d  %7lld  %6lld  %6lld  %8.4f\n",
                  c.category_id, static_cast<long long>(c.num_gts),
                  static_cast<long long>(c.num_detections),
                  static_cast<long long>(c.true_positives), c.ap);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "MAP %.4f  coverage %lld/%lld\n", det.map,
                static_cast<long long>(det.gts_covered),
                static_cast<long long>(det.num_gts));
  out << buf;
  if (attrs != nullptr) {
    auto level = [&](const char* tag, const AttributeLevelReport& lr,
                     int num_bits, const char* (*name)(int)) {
      std::snprintf(buf, sizeof(buf),
                    "%s: mean auc %.4f  std %.4f  hits %d/%d  (threshold "
                    "%.2f, %d excluded)\n",
                    tag, lr.mean_auc, lr.std_auc, lr.hits, lr.defined_count,
                    attrs->hit_threshold, lr.excluded_count);
      out << buf;
      for (int j = 0; j < num_bits; ++j) {
        if (lr.defined[static_cast<size_t>(j)]) {
          std::snprintf(buf, sizeof(buf), "  %-24s %.4f%s\n", name(j),
                        lr.auc[static_cast<size_t>(j)],
                        lr.auc[static_cast<size_t>(j)] >= attrs->hit_threshold
                            ? "  hit"
                            : "");
        } else {
          std::snprintf(buf, sizeof(buf), "  %-24s n/a (constant labels)\n",
                        name(j));
        }
        out << buf;
      }
    };
    level("first-level attributes", attrs->h1, kNumH1, h1_bit_name);
    level("second-level attributes", attrs->h2, kNumH2, h2_bit_name);
  }
  return out.str();
}

void write_category_csv(const std::string& path, const DetectionEval& det) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "category,gts,detections,true_positives,ap\n";
  for (const CategoryEval& c : det.per_category) {
    out << c.category_id << ',' << c.num_gts << ',' << c.num_detections << ','
        << c.true_positives << ',' << fmt_g(c.ap) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_attribute_csv(const std::string& path, const AttributeReport& at) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "level,index,name,auc,defined,hit\n";
  auto level = [&](const char* tag, const AttributeLevelReport& lr,
                   int num_bits, const char* (*name)(int)) {
    for (int j = 0; j < num_bits; ++j) {
      const bool def = lr.defined[static_cast<size_t>(j)] != 0;
      out << tag << ',' << j << ',' << name(j) << ',';
      if (def) out << fmt_g(lr.auc[static_cast<size_t>(j)]);
      out << ',' << (def ? 1 : 0) << ','
          << (def && lr.auc[static_cast<size_t>(j)] >= at.hit_threshold ? 1
                                                                        : 0)
          << '\n';
    }
  };
  level("h1", at.h1, kNumH1, h1_bit_name);
  level("h2", at.h2, kNumH2, h2_bit_name);
  if (!out) throw IoError("write failed: " + path);
}

void write_pr_csv(const std::string& path, const DetectionEval& det) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "category,recall,precision\n";
  for (const PrPoint& p : det.pr_points) {
    out << p.category_id << ',' << fmt_g(p.recall) << ',' << fmt_g(p.precision)
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace vap
