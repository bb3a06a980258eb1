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

#include "vap/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "vap/errors.hpp"
#include "vap/io_util.hpp"

namespace vap {
namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) {
    --b;
  }
  return s.substr(a, b - a);
}

// One registry drives parsing, echoing and unknown-key rejection, so the
// three can never drift apart.
struct KeyDef {
  const char* name;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

int64_t parse_i64(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw ConfigError("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw ConfigError("");
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw ConfigError("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a non-negative integer, got '" + v +
                      "'");
  }
}

double parse_dbl(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw ConfigError("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a finite number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(where + ": expected true/false, got '" + v + "'");
}

KeyDef key_i64(const char* name, int64_t RunConfig::*ptr) {
  return {name,
          [ptr](RunConfig& c, const std::string& v, const std::string& w) {
            c.*ptr = parse_i64(v, w);
          },
          [ptr](const RunConfig& c) { return std::to_string(c.*ptr); }};
}

KeyDef key_u64(const char* name, uint64_t RunConfig::*ptr) {
  return {name,
          [ptr](RunConfig& c, const std::string& v, const std::string& w) {
            c.*ptr = parse_u64(v, w);
          },
          [ptr](const RunConfig& c) { return std::to_string(c.*ptr); }};
}

KeyDef key_dbl(const char* name, double RunConfig::*ptr) {
  return {name,
          [ptr](RunConfig& c, const std::string& v, const std::string& w) {
            c.*ptr = parse_dbl(v, w);
          },
          [ptr](const RunConfig& c) { return io::format_g17(c.*ptr); }};
}

KeyDef key_bool(const char* name, bool RunConfig::*ptr) {
  return {name,
          [ptr](RunConfig& c, const std::string& v, const std::string& w) {
            c.*ptr = parse_bool(v, w);
          },
          [ptr](const RunConfig& c) { return c.*ptr ? "true" : "false"; }};
}

KeyDef key_str(const char* name, std::string RunConfig::*ptr) {
  return {name,
          [ptr](RunConfig& c, const std::string& v, const std::string&) {
            c.*ptr = v;
          },
          [ptr](const RunConfig& c) { return c.*ptr; }};
}

const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> keys = {
      key_str("profile", &RunConfig::profile),
      key_u64("seed", &RunConfig::seed),
      key_str("data_root", &RunConfig::data_root),
      key_str("checkpoint", &RunConfig::checkpoint),
      key_str("output_dir", &RunConfig::output_dir),
      key_str("proposals", &RunConfig::proposals),
      key_str("detections", &RunConfig::detections),
      key_str("ground_truth", &RunConfig::ground_truth),
      key_str("clip", &RunConfig::clip),
      key_i64("synth_categories", &RunConfig::synth_categories),
      key_i64("synth_clips_per_category",
              &RunConfig::synth_clips_per_category),
      key_i64("synth_canvas", &RunConfig::synth_canvas),
      key_dbl("train_fraction", &RunConfig::train_fraction),
      key_i64("compose_categories", &RunConfig::compose_categories),
      key_i64("compose_train_clips_per_category",
              &RunConfig::compose_train_clips_per_category),
      key_i64("compose_background_clips", &RunConfig::compose_background_clips),
      key_i64("compose_videos", &RunConfig::compose_videos),
      key_i64("compose_canvas_h", &RunConfig::compose_canvas_h),
      key_i64("compose_canvas_w", &RunConfig::compose_canvas_w),
      key_i64("compose_length", &RunConfig::compose_length),
      key_i64("compose_min_actions", &RunConfig::compose_min_actions),
      key_i64("compose_max_actions", &RunConfig::compose_max_actions),
      key_str("compose_background", &RunConfig::compose_background),
      key_dbl("flow_alpha", &RunConfig::flow_alpha),
      key_i64("flow_iterations", &RunConfig::flow_iterations),
      key_bool("zero_motion", &RunConfig::zero_motion),
      key_i64("batch_size", &RunConfig::batch_size),
      key_i64("max_iterations", &RunConfig::max_iterations),
      key_dbl("base_lr", &RunConfig::base_lr),
      key_dbl("lr_decay", &RunConfig::lr_decay),
      key_i64("lr_step", &RunConfig::lr_step),
      key_dbl("momentum", &RunConfig::momentum),
      key_i64("checkpoint_every", &RunConfig::checkpoint_every),
      key_dbl("lambda1", &RunConfig::lambda1),
      key_dbl("lambda2", &RunConfig::lambda2),
      key_dbl("beta", &RunConfig::beta),
      key_dbl("nms_iou", &RunConfig::nms_iou),
      key_dbl("proposal_stride", &RunConfig::proposal_stride),
      key_bool("overlay", &RunConfig::overlay),
      key_dbl("precision_fraction", &RunConfig::precision_fraction),
      key_dbl("recall_fraction", &RunConfig::recall_fraction),
      key_dbl("hit_threshold", &RunConfig::hit_threshold),
      key_str("attributes_from", &RunConfig::attributes_from),
      key_str("inspect_layer", &RunConfig::inspect_layer),
  };
  return keys;
}

const KeyDef* find_key(const std::string& name) {
  for (const KeyDef& k : registry()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  if (profile != "toy" && profile != "paper") {
    throw ConfigError("profile must be 'toy' or 'paper', got '" + profile +
                      "'");
  }
  if (compose_background != "flat" && compose_background != "noise" &&
      compose_background != "distractors") {
    throw ConfigError("compose_background must be flat, noise or "
                      "distractors, got '" +
                      compose_background + "'");
  }
  if (attributes_from != "matched" && attributes_from != "gt_crops") {
    throw ConfigError("attributes_from must be 'matched' or 'gt_crops', "
                      "got '" +
                      attributes_from + "'");
  }
  auto positive = [](int64_t v, const char* name) {
    if (v < 1) {
      throw ConfigError(std::string(name) + " must be at least 1, got " +
                        std::to_string(v));
    }
  };
  auto non_negative = [](int64_t v, const char* name) {
    if (v < 0) {
      throw ConfigError(std::string(name) + " must be non-negative, got " +
                        std::to_string(v));
    }
  };
  non_negative(synth_categories, "synth_categories");
  non_negative(synth_clips_per_category, "synth_clips_per_category");
  positive(synth_canvas, "synth_canvas");
  positive(compose_categories, "compose_categories");
  non_negative(compose_train_clips_per_category,
               "compose_train_clips_per_category");
  non_negative(compose_background_clips, "compose_background_clips");
  non_negative(compose_videos, "compose_videos");
  positive(compose_canvas_h, "compose_canvas_h");
  positive(compose_canvas_w, "compose_canvas_w");
  positive(compose_length, "compose_length");
  non_negative(compose_min_actions, "compose_min_actions");
  if (compose_max_actions < compose_min_actions) {
    throw ConfigError("compose_max_actions must be >= compose_min_actions");
  }
  positive(flow_iterations, "flow_iterations");
  positive(batch_size, "batch_size");
  non_negative(max_iterations, "max_iterations");
  positive(lr_step, "lr_step");
  non_negative(checkpoint_every, "checkpoint_every");

  auto in_unit = [](double v, const char* name, bool open_low, bool open_high) {
    const bool lo_ok = open_low ? v > 0.0 : v >= 0.0;
    const bool hi_ok = open_high ? v < 1.0 : v <= 1.0;
    if (!std::isfinite(v) || !lo_ok || !hi_ok) {
      throw ConfigError(std::string(name) + " out of range: " +
                        io::format_g17(v));
    }
  };
  in_unit(train_fraction, "train_fraction", true, true);
  in_unit(proposal_stride, "proposal_stride", true, false);
  in_unit(nms_iou, "nms_iou", false, false);
  in_unit(precision_fraction, "precision_fraction", true, false);
  in_unit(recall_fraction, "recall_fraction", true, false);
  in_unit(hit_threshold, "hit_threshold", true, false);
  in_unit(momentum, "momentum", false, true);
  if (!(std::isfinite(flow_alpha) && flow_alpha > 0.0)) {
    throw ConfigError("flow_alpha must be positive");
  }
  if (!(std::isfinite(base_lr) && base_lr > 0.0)) {
    throw ConfigError("base_lr must be positive");
  }
  if (!(std::isfinite(lr_decay) && lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw ConfigError("lr_decay must lie in (0, 1]");
  }
  auto weight = [](double v, const char* name) {
    if (!(std::isfinite(v) && v >= 0.0)) {
      throw ConfigError(std::string(name) + " must be non-negative");
    }
  };
  weight(lambda1, "lambda1");
  weight(lambda2, "lambda2");
  weight(beta, "beta");
}

std::string RunConfig::canonical_text() const {
  std::ostringstream out;
  for (const KeyDef& k : registry()) {
    out << k.name << " = " << k.get(*this) << '\n';
  }
  return out.str();
}

RunConfig parse_run_config(const std::string& text) {
  struct Pair {
    std::string key, value;
    int64_t line;
  };
  std::vector<Pair> pairs;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = "config line " + std::to_string(line_no);
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value', got '" + t + "'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (find_key(key) == nullptr) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError(where + ": duplicate key '" + key + "'");
    }
    pairs.push_back({key, value, line_no});
  }

  RunConfig cfg;
  // Profile first: it moves the batch-size default.
  for (const Pair& p : pairs) {
    if (p.key == "profile") cfg.profile = p.value;
  }
  if (cfg.profile == "paper") cfg.batch_size = 40;

  for (const Pair& p : pairs) {
    const KeyDef* k = find_key(p.key);
    k->set(cfg, p.value, "config line " + std::to_string(p.line));
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << cfg.canonical_text();
  if (!out) throw IoError("write failed: " + path);
}

ModelConfig model_config_for(const RunConfig& cfg, int64_t categories,
                             bool include_background) {
  cfg.validate();
  ModelConfig m = cfg.profile == "paper" ? ModelConfig::paper(categories)
                                         : ModelConfig::toy(categories);
  m.include_background = include_background;
  m.lambda1 = cfg.lambda1;
  m.lambda2 = cfg.lambda2;
  m.beta = cfg.beta;
  return m;
}

MaterializeOptions materialize_options_for(const RunConfig& cfg) {
  cfg.validate();
  const ModelConfig m = cfg.profile == "paper" ? ModelConfig::paper(1)
                                               : ModelConfig::toy(1);
  MaterializeOptions opt;
  opt.in_t = m.input_t;
  opt.in_h = m.input_h;
  opt.in_w = m.input_w;
  opt.flow_alpha = cfg.flow_alpha;
  opt.flow_iterations = cfg.flow_iterations;
  opt.zero_motion = cfg.zero_motion;
  return opt;
}

}  // namespace vap
