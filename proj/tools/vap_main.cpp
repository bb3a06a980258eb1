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
// vap: command-line front end.
//
//   synth      aligned single-action training corpus
//   compose    fine-tuning clips plus composite parsing videos
//   train      train from scratch on a synth corpus
//   finetune   adapt a checkpoint to the compose corpus (new class head)
//   parse      detect actions in composite videos
//   eval       score detections against ground truth
//   gradcheck  analytic vs numeric gradients
//   inspect    dump per-channel feature maps of one layer as PNG grids
//
// Exit codes: 0 success, 1 internal failure, 2 invalid input.  Every
// command echoes its complete effective configuration next to its outputs
// so a run can be reproduced from the artifacts alone.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "vap/config.hpp"
#include "vap/dataset.hpp"
#include "vap/errors.hpp"
#include "vap/evaluation.hpp"
#include "vap/flow.hpp"
#include "vap/gradcheck.hpp"
#include "vap/image.hpp"
#include "vap/io_util.hpp"
#include "vap/model.hpp"
#include "vap/parsing.hpp"
#include "vap/rng.hpp"
#include "vap/synth.hpp"
#include "vap/tensor.hpp"

namespace fs = std::filesystem;

namespace {

using namespace vap;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

std::string join(const std::string& a, const std::string& b) {
  return (fs::path(a) / b).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Configuration assembly.  Command-line overrides are spliced into the
// config file text and the whole thing goes through the one parser, so
// profile-dependent defaults and validation behave identically no matter
// where a value came from.

struct Overrides {
  std::vector<std::pair<std::string, std::string>> pairs;
  void set(const std::string& key, const std::string& value) {
    pairs.emplace_back(key, value);
  }
};

std::string strip_keys(const std::string& text,
                       const std::set<std::string>& keys) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    bool drop = false;
    if (eq != std::string::npos) {
      std::string key = line.substr(0, eq);
      const auto b = key.find_first_not_of(" \t");
      const auto e = key.find_last_not_of(" \t");
      if (b != std::string::npos) key = key.substr(b, e - b + 1);
      drop = keys.count(key) > 0;
    }
    if (!drop) out << line << '\n';
  }
  return out.str();
}

RunConfig assemble_config(const std::string& config_path,
                          const Overrides& ov) {
  std::string text;
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw IoError("cannot read config file: " + config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  if (!ov.pairs.empty()) {
    std::set<std::string> keys;
    for (const auto& kv : ov.pairs) keys.insert(kv.first);
    text = strip_keys(text, keys);
    // Profile first so its defaults land before other overrides.
    for (const auto& kv : ov.pairs)
      if (kv.first == "profile") text += kv.first + " = " + kv.second + "\n";
    for (const auto& kv : ov.pairs)
      if (kv.first != "profile") text += kv.first + " = " + kv.second + "\n";
  }
  return parse_run_config(text);
}

void echo_config(const RunConfig& cfg, const std::string& dir,
                 const std::string& command) {
  ensure_dir(dir);
  save_run_config(join(dir, command + "_config.txt"), cfg);
}

std::string short_d(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ArgumentError(message);
}

// ---------------------------------------------------------------------------
// synth: aligned single-action corpus plus train/test manifests.

int cmd_synth(const RunConfig& cfg) {
  require(!cfg.data_root.empty(), "synth: data_root is required");
  SynthDatasetConfig dc;
  dc.num_categories = static_cast<int>(cfg.synth_categories);
  dc.clips_per_category = static_cast<int>(cfg.synth_clips_per_category);
  dc.canvas_h = cfg.synth_canvas;
  dc.canvas_w = cfg.synth_canvas;
  dc.seed = cfg.seed;
  generate_dataset(cfg.data_root, dc);
  const SplitManifests split =
      build_manifest(cfg.data_root, cfg.train_fraction, cfg.seed);
  save_manifest(join(cfg.data_root, "train.manifest"), split.train);
  save_manifest(join(cfg.data_root, "test.manifest"), split.test);
  echo_config(cfg, cfg.output_dir.empty() ? cfg.data_root : cfg.output_dir,
              "synth");
  std::cout << "synth: " << dc.num_categories << " categories x "
            << dc.clips_per_category << " clips = "
            << dc.num_categories * dc.clips_per_category << " total\n"
            << "split: train " << split.train.entries.size() << "  test "
            << split.test.entries.size() << "\n"
            << "wrote " << cfg.data_root
            << "/{all,train,test}.manifest\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compose: fine-tuning clips (aligned positives + action-free backgrounds)
// under train/, composite multi-action videos with ground truth under
// test/.

BackgroundKind background_kind(const std::string& name) {
  if (name == "flat") return BackgroundKind::kFlat;
  if (name == "noise") return BackgroundKind::kNoise;
  return BackgroundKind::kDistractors;
}

int cmd_compose(const RunConfig& cfg) {
  require(!cfg.data_root.empty(), "compose: data_root is required");
  const int64_t canvas = cfg.synth_canvas;
  const BackgroundKind bg = background_kind(cfg.compose_background);
  const std::string train_dir = join(cfg.data_root, "train");
  const std::string test_dir = join(cfg.data_root, "test");
  ensure_dir(train_dir);
  ensure_dir(test_dir);

  static const int64_t kClipLengths[] = {16, 24, 32, 48};
  static const int64_t kActionLengths[] = {16, 24, 32};

  // Aligned positives: one action per clip, centered, full length, so the
  // annotation matches what the synth corpus looks like after cropping.
  DatasetManifest train_m;
  train_m.split = "all";
  train_m.seed = cfg.seed;
  int64_t clip_idx = 0;
  for (int64_t cat = 0; cat < cfg.compose_categories; ++cat) {
    for (int64_t rep = 0; rep < cfg.compose_train_clips_per_category; ++rep) {
      Rng rng(mix_seed(cfg.seed, 0xC0017u + static_cast<uint64_t>(cat),
                       static_cast<uint64_t>(rep)));
      const int64_t len = kClipLengths[rng.uniform_int(4)];
      PlacedAction pa;
      pa.spec = sample_action_spec(static_cast<int>(cat), canvas, canvas,
                                   len, rng);
      pa.x = static_cast<double>(canvas) / 2.0;
      pa.y = static_cast<double>(canvas) / 2.0;
      pa.t0 = 0;
      pa.length = len;
      ComposeResult r = compose_multiaction_video(
          {pa}, canvas, canvas, len, bg, rng.next_u64());
      char name[32];
      std::snprintf(name, sizeof(name), "clip_%05lld.aptn",
                    static_cast<long long>(clip_idx++));
      save_tensor(join(train_dir, name), r.video);
      train_m.entries.push_back({name, r.annotations[0]});
    }
  }
  // Backgrounds: no action at all; labeled with the background class id
  // (== compose_categories) and a whole-clip volume.
  for (int64_t rep = 0; rep < cfg.compose_background_clips; ++rep) {
    Rng rng(mix_seed(cfg.seed, 0xBA5Eu, static_cast<uint64_t>(rep)));
    const int64_t len = kClipLengths[rng.uniform_int(4)];
    ComposeResult r = compose_multiaction_video({}, canvas, canvas, len, bg,
                                                rng.next_u64());
    ActionAnnotation ann;
    ann.volume = Cuboid{static_cast<double>(canvas) / 2.0,
                        static_cast<double>(canvas) / 2.0,
                        static_cast<double>(len) / 2.0,
                        static_cast<double>(canvas),
                        static_cast<double>(canvas),
                        static_cast<double>(len)};
    ann.category_id = static_cast<int>(cfg.compose_categories);
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%05lld.aptn",
                  static_cast<long long>(clip_idx++));
    save_tensor(join(train_dir, name), r.video);
    train_m.entries.push_back({name, ann});
  }
  save_manifest(join(train_dir, "all.manifest"), train_m);

  // Composite test videos.
  const int64_t H = cfg.compose_canvas_h;
  const int64_t W = cfg.compose_canvas_w;
  const int64_t L = cfg.compose_length;
  require(H >= 72 && W >= 72 && L >= 32,
          "compose: composite canvas must be at least 72x72x32");
  std::vector<GroundTruth> gts;
  int64_t total_actions = 0;
  for (int64_t v = 0; v < cfg.compose_videos; ++v) {
    Rng rng(mix_seed(cfg.seed, 0x71DE0u, static_cast<uint64_t>(v)));
    const int64_t span = cfg.compose_max_actions - cfg.compose_min_actions;
    const int64_t na =
        cfg.compose_min_actions +
        static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(span + 1)));
    std::vector<PlacedAction> actions;
    for (int64_t a = 0; a < na; ++a) {
      PlacedAction pa;
      const int cat = static_cast<int>(rng.uniform_int(
          static_cast<uint64_t>(cfg.compose_categories)));
      pa.length = kActionLengths[rng.uniform_int(3)];
      // Specs are sampled for a 64x64 region, then centered at least 34 px
      // from every edge so the bounding cuboid stays on the canvas.
      pa.spec = sample_action_spec(cat, 64, 64, pa.length, rng);
      pa.x = rng.uniform(34.0, static_cast<double>(W) - 34.0);
      pa.y = rng.uniform(34.0, static_cast<double>(H) - 34.0);
      pa.t0 = static_cast<int64_t>(rng.uniform_int(
          static_cast<uint64_t>(L - pa.length + 1)));
      actions.push_back(pa);
    }
    ComposeResult r =
        compose_multiaction_video(actions, H, W, L, bg, rng.next_u64());
    char name[32];
    std::snprintf(name, sizeof(name), "video_%03lld",
                  static_cast<long long>(v));
    save_tensor(join(test_dir, std::string(name) + ".aptn"), r.video);
    for (const ActionAnnotation& ann : r.annotations) {
      GroundTruth gt;
      gt.video_id = name;
      gt.category_id = ann.category_id;
      gt.volume = ann.volume;
      gt.h1_bits = ann.h1_bits;
      gt.h2_bits = ann.h2_bits;
      gts.push_back(gt);
      ++total_actions;
    }
  }
  save_ground_truth(join(test_dir, "ground_truth.tsv"), gts);
  echo_config(cfg, cfg.output_dir.empty() ? cfg.data_root : cfg.output_dir,
              "compose");
  std::cout << "compose: train " << train_m.entries.size() << " clips ("
            << cfg.compose_categories << " categories x "
            << cfg.compose_train_clips_per_category << " + "
            << cfg.compose_background_clips << " background)\n"
            << "test: " << cfg.compose_videos << " videos, "
            << total_actions << " actions\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train / finetune.

int run_training(const RunConfig& cfg, bool finetune) {
  const char* cmd = finetune ? "finetune" : "train";
  require(!cfg.data_root.empty(),
          std::string(cmd) + ": data_root is required");
  require(!cfg.output_dir.empty(),
          std::string(cmd) + ": output_dir is required");
  ensure_dir(cfg.output_dir);
  std::cout << "optimizer: lr " << short_d(cfg.base_lr) << " momentum "
            << short_d(cfg.momentum) << " batch " << cfg.batch_size << "\n"
            << std::flush;

  int64_t start_iteration = 0;
  std::string manifest_path = join(cfg.data_root, "train.manifest");
  Model model = [&]() -> Model {
    if (finetune) {
      require(!cfg.checkpoint.empty(), "finetune: checkpoint is required");
      Model::Loaded loaded = Model::load_checkpoint(cfg.checkpoint);
      loaded.model.reset_class_head(cfg.compose_categories,
                                    /*include_background=*/true,
                                    mix_seed(cfg.seed, 0xF17EADu));
      manifest_path = join(join(cfg.data_root, "train"), "all.manifest");
      return std::move(loaded.model);
    }
    if (!cfg.checkpoint.empty()) {
      Model::Loaded loaded = Model::load_checkpoint(cfg.checkpoint);
      start_iteration = loaded.iteration;
      return std::move(loaded.model);
    }
    return Model::build(model_config_for(cfg, cfg.synth_categories,
                                         /*include_background=*/false),
                        cfg.seed);
  }();

  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::string sample_root =
      finetune ? join(cfg.data_root, "train") : cfg.data_root;
  const MaterializeOptions opt = materialize_options_for(cfg);
  const std::vector<TrainSample> samples = materialize_manifest(
      sample_root, manifest, opt, /*train_view=*/true, cfg.seed);

  TrainRunConfig tc;
  tc.batch_size = cfg.batch_size;
  tc.max_iterations = cfg.max_iterations;
  tc.start_iteration = start_iteration;
  tc.base_lr = cfg.base_lr;
  tc.lr_decay = cfg.lr_decay;
  tc.lr_step = cfg.lr_step;
  tc.momentum = cfg.momentum;
  tc.seed = cfg.seed;
  tc.checkpoint_every = cfg.checkpoint_every;
  tc.checkpoint_path = join(cfg.output_dir, "model.ckpt");
  tc.loss_log_path = join(cfg.output_dir, "loss.csv");

  std::cout << cmd << ": " << samples.size() << " samples from "
            << manifest.entries.size() << " clips\n";
  const LossBreakdown last = train_model(&model, samples, tc);
  echo_config(cfg, cfg.output_dir, cmd);
  if (tc.max_iterations > tc.start_iteration) {
    std::cout << "final loss: total " << short_d(last.total) << " (cat "
              << short_d(last.category) << ", h1 " << short_d(last.h1)
              << ", h2 " << short_d(last.h2) << ", loc "
              << short_d(last.loc) << ")\n";
  }
  std::cout << "checkpoint: " << tc.checkpoint_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// parse.

std::vector<std::string> list_videos(const std::string& dir) {
  if (!fs::is_directory(dir))
    throw DataError("parse: video directory not found: " + dir);
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".aptn")
      stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

void byte_frame(const Tensor& video, int64_t t, std::vector<uint8_t>* rgb) {
  const Shape& s = video.shape();
  const int64_t H = s[1], W = s[2];
  rgb->assign(static_cast<size_t>(H * W * 3), 0);
  const float* f = video.data() + t * H * W * 3;
  for (int64_t i = 0; i < H * W * 3; ++i) {
    const float v = std::min(1.0f, std::max(0.0f, f[i]));
    (*rgb)[static_cast<size_t>(i)] =
        static_cast<uint8_t>(std::lround(v * 255.0f));
  }
}

void draw_box(std::vector<uint8_t>* rgb, int64_t W, int64_t H, int64_t x0,
              int64_t y0, int64_t x1, int64_t y1, const uint8_t color[3]) {
  x0 = std::max<int64_t>(0, x0);
  y0 = std::max<int64_t>(0, y0);
  x1 = std::min(W - 1, x1);
  y1 = std::min(H - 1, y1);
  if (x0 > x1 || y0 > y1) return;
  auto put = [&](int64_t x, int64_t y) {
    uint8_t* p = rgb->data() + (y * W + x) * 3;
    p[0] = color[0];
    p[1] = color[1];
    p[2] = color[2];
  };
  for (int64_t x = x0; x <= x1; ++x) {
    put(x, y0);
    put(x, y1);
  }
  for (int64_t y = y0; y <= y1; ++y) {
    put(x0, y);
    put(x1, y);
  }
}

void write_overlays(const std::string& dir, const std::string& video_id,
                    const Tensor& video,
                    const std::vector<Detection>& detections) {
  static const uint8_t kPalette[8][3] = {
      {230, 60, 60},  {60, 200, 90},  {70, 110, 240}, {235, 200, 50},
      {200, 80, 220}, {60, 210, 210}, {240, 140, 40}, {160, 160, 160}};
  const std::string out = join(dir, video_id);
  ensure_dir(out);
  const Shape& s = video.shape();
  const int64_t T = s[0], H = s[1], W = s[2];
  std::vector<uint8_t> rgb;
  for (int64_t t = 0; t < T; ++t) {
    byte_frame(video, t, &rgb);
    for (const Detection& d : detections) {
      if (std::abs(static_cast<double>(t) - d.t) > d.l / 2.0) continue;
      const uint8_t* color = kPalette[d.category_id % 8];
      draw_box(&rgb, W, H, std::llround(d.x - d.w / 2.0),
               std::llround(d.y - d.h / 2.0), std::llround(d.x + d.w / 2.0),
               std::llround(d.y + d.h / 2.0), color);
    }
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03lld.png",
                  static_cast<long long>(t));
    write_png_rgb(join(out, name), rgb.data(), W, H);
  }
}

int cmd_parse(const RunConfig& cfg) {
  require(!cfg.data_root.empty(), "parse: data_root is required");
  require(!cfg.checkpoint.empty(), "parse: checkpoint is required");
  require(!cfg.output_dir.empty(), "parse: output_dir is required");
  ensure_dir(cfg.output_dir);

  Model::Loaded loaded = Model::load_checkpoint(cfg.checkpoint);
  ParseConfig pc;
  pc.input = materialize_options_for(cfg);
  pc.nms_iou = cfg.nms_iou;
  pc.batch_size = cfg.batch_size;

  const std::vector<std::string> stems = list_videos(cfg.data_root);
  std::vector<Detection> all;
  for (const std::string& stem : stems) {
    const Tensor video = load_tensor(join(cfg.data_root, stem + ".aptn"));
    if (video.rank() != 4 || video.shape()[3] != 3)
      throw DataError("parse: " + stem + " is not a (T, H, W, 3) video");
    const int64_t T = video.shape()[0], H = video.shape()[1],
                  W = video.shape()[2];
    std::vector<Proposal> proposals;
    if (!cfg.proposals.empty()) {
      ProposalLoad pl = load_proposals(cfg.proposals, W, H, T);
      for (Proposal& p : pl.proposals)
        if (p.video_id == stem) proposals.push_back(std::move(p));
    } else {
      proposals = sliding_window_proposals(
          stem, W, H, T, default_proposal_scales(W, H, T),
          cfg.proposal_stride, cfg.proposal_stride, cfg.proposal_stride);
    }
    std::vector<Detection> dets =
        parse_video(loaded.model, stem, video, proposals, pc);
    std::cout << stem << ": " << proposals.size() << " proposals -> "
              << dets.size() << " detections\n";
    if (cfg.overlay)
      write_overlays(join(cfg.output_dir, "overlays"), stem, video, dets);
    all.insert(all.end(), dets.begin(), dets.end());
  }
  save_detections(join(cfg.output_dir, "detections.tsv"), all);
  echo_config(cfg, cfg.output_dir, "parse");
  std::cout << "parse: " << stems.size() << " videos, " << all.size()
            << " detections -> " << join(cfg.output_dir, "detections.tsv")
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval.

// Attribute rows from matched detections: each true positive contributes
// its predicted attribute probabilities against the matched ground truth's
// bits.
void matched_attribute_rows(const std::vector<Detection>& detections,
                            const std::vector<GroundTruth>& gts,
                            const MatchRule& rule, Tensor* h1p, Tensor* h2p,
                            std::vector<std::array<uint8_t, kNumH1>>* h1b,
                            std::vector<std::array<uint8_t, kNumH2>>* h2b) {
  std::vector<Detection> ranked = detections;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.score > b.score;
                   });
  const MatchResult m = match_detections(ranked, gts, rule);
  std::vector<int64_t> rows;
  for (size_t i = 0; i < ranked.size(); ++i)
    if (m.detection_tp[i]) rows.push_back(static_cast<int64_t>(i));
  const int64_t n = static_cast<int64_t>(rows.size());
  *h1p = Tensor::zeros({std::max<int64_t>(n, 1), kNumH1});
  *h2p = Tensor::zeros({std::max<int64_t>(n, 1), kNumH2});
  h1b->clear();
  h2b->clear();
  for (int64_t r = 0; r < n; ++r) {
    const Detection& d = ranked[static_cast<size_t>(rows[r])];
    const GroundTruth& g =
        gts[static_cast<size_t>(m.matched_gt[static_cast<size_t>(rows[r])])];
    for (int64_t k = 0; k < kNumH1; ++k)
      h1p->data()[r * kNumH1 + k] =
          static_cast<float>(d.h1_probs[static_cast<size_t>(k)]);
    for (int64_t k = 0; k < kNumH2; ++k)
      h2p->data()[r * kNumH2 + k] =
          static_cast<float>(d.h2_probs[static_cast<size_t>(k)]);
    h1b->push_back(g.h1_bits);
    h2b->push_back(g.h2_bits);
  }
}

// Attribute rows from ground-truth crops: cut each annotated volume out of
// the video, score it with the model, and compare against the true bits.
// Isolates attribute quality from detection quality.
void gt_crop_attribute_rows(const RunConfig& cfg,
                            const std::vector<GroundTruth>& gts, Tensor* h1p,
                            Tensor* h2p,
                            std::vector<std::array<uint8_t, kNumH1>>* h1b,
                            std::vector<std::array<uint8_t, kNumH2>>* h2b) {
  require(!cfg.data_root.empty(),
          "eval: attributes_from = gt_crops needs data_root");
  require(!cfg.checkpoint.empty(),
          "eval: attributes_from = gt_crops needs checkpoint");
  Model::Loaded loaded = Model::load_checkpoint(cfg.checkpoint);
  const MaterializeOptions opt = materialize_options_for(cfg);

  std::map<std::string, std::vector<int64_t>> by_video;
  for (size_t i = 0; i < gts.size(); ++i)
    by_video[gts[i].video_id].push_back(static_cast<int64_t>(i));

  std::vector<TrainSample> samples;
  h1b->clear();
  h2b->clear();
  for (const auto& [video_id, rows] : by_video) {
    const Tensor video = load_tensor(join(cfg.data_root, video_id + ".aptn"));
    if (video.rank() != 4 || video.shape()[3] != 3)
      throw DataError("eval: " + video_id + " is not a (T, H, W, 3) video");
    Tensor am = compose_am(grayscale(video), opt.flow_alpha,
                           opt.flow_iterations);
    for (const int64_t i : rows) {
      const GroundTruth& g = gts[static_cast<size_t>(i)];
      const int64_t w = std::max<int64_t>(1, std::llround(g.volume.w));
      const int64_t h = std::max<int64_t>(1, std::llround(g.volume.h));
      const int64_t l = std::max<int64_t>(1, std::llround(g.volume.l));
      const int64_t x0 = std::llround(g.volume.cx - g.volume.w / 2.0);
      const int64_t y0 = std::llround(g.volume.cy - g.volume.h / 2.0);
      const int64_t t0 = std::llround(g.volume.ct - g.volume.l / 2.0);
      Tensor sub = extract_am_subvolume(am, x0, y0, t0, w, h, l);
      TrainSample s;
      s.input = warp_am(sub, opt.in_t, opt.in_h, opt.in_w);
      if (opt.zero_motion) {
        float* p = s.input.data();
        const int64_t plane = opt.in_t * opt.in_h * opt.in_w;
        std::fill(p + plane, p + 3 * plane, 0.0f);
      }
      samples.push_back(std::move(s));
      h1b->push_back(g.h1_bits);
      h2b->push_back(g.h2_bits);
    }
  }
  const HeadOutputs out = predict_all(loaded.model, samples, cfg.batch_size);
  *h1p = out.h1_probs;
  *h2p = out.h2_probs;
}

int cmd_eval(const RunConfig& cfg) {
  require(!cfg.detections.empty(), "eval: detections file is required");
  require(!cfg.ground_truth.empty(), "eval: ground_truth file is required");
  require(!cfg.output_dir.empty(), "eval: output_dir is required");
  ensure_dir(cfg.output_dir);

  const std::vector<Detection> detections = load_detections(cfg.detections);
  const std::vector<GroundTruth> gts = load_ground_truth(cfg.ground_truth);
  const MatchRule rule{cfg.precision_fraction, cfg.recall_fraction};
  const DetectionEval det = evaluate_detections(detections, gts, rule);

  Tensor h1p, h2p;
  std::vector<std::array<uint8_t, kNumH1>> h1b;
  std::vector<std::array<uint8_t, kNumH2>> h2b;
  if (cfg.attributes_from == "matched") {
    matched_attribute_rows(detections, gts, rule, &h1p, &h2p, &h1b, &h2b);
  } else {
    gt_crop_attribute_rows(cfg, gts, &h1p, &h2p, &h1b, &h2b);
  }

  std::optional<AttributeReport> attrs;
  if (!h1b.empty())
    attrs = attribute_report(h1p, h2p, h1b, h2b, cfg.hit_threshold);
  else
    std::cout << "note: no matched detections; attribute AUC skipped\n";

  std::cout << format_eval_report(det, attrs ? &*attrs : nullptr);
  write_category_csv(join(cfg.output_dir, "eval_categories.csv"), det);
  write_pr_csv(join(cfg.output_dir, "eval_pr.csv"), det);
  if (attrs)
    write_attribute_csv(join(cfg.output_dir, "eval_attributes.csv"), *attrs);
  echo_config(cfg, cfg.output_dir, "eval");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck.

int cmd_gradcheck(const RunConfig& cfg, int64_t instances,
                  const std::string& perturb) {
  GradCheckOptions opt;
  opt.seed = cfg.seed;
  opt.instances = static_cast<int>(instances);
  opt.perturb = perturb;
  const std::vector<GradCheckEntry> entries = run_gradient_checks(opt);
  std::ostringstream report;
  report << "check                     max_rel_err      tol  result\n";
  for (const GradCheckEntry& e : entries) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-24s %12.3e %8.0e  %s\n",
                  e.name.c_str(), e.max_rel_err, e.tolerance,
                  e.pass ? "pass" : "FAIL");
    report << line;
  }
  const bool ok = gradcheck_passed(entries);
  report << (ok ? "gradcheck: all checks passed\n"
                : "gradcheck: FAILED\n");
  std::cout << report.str();
  if (!cfg.output_dir.empty()) {
    ensure_dir(cfg.output_dir);
    std::ofstream out(join(cfg.output_dir, "gradcheck.txt"),
                      std::ios::binary);
    if (!out) throw IoError("cannot write gradcheck report");
    out << report.str();
    echo_config(cfg, cfg.output_dir, "gradcheck");
  }
  return ok ? kExitOk : kExitInternal;
}

// ---------------------------------------------------------------------------
// inspect: tile one layer's channels into grayscale grids, one per
// temporal slice.

int cmd_inspect(const RunConfig& cfg) {
  require(!cfg.checkpoint.empty(), "inspect: checkpoint is required");
  require(!cfg.clip.empty(), "inspect: clip is required");
  require(!cfg.output_dir.empty(), "inspect: output_dir is required");
  ensure_dir(cfg.output_dir);

  Model::Loaded loaded = Model::load_checkpoint(cfg.checkpoint);
  const Tensor clip = load_tensor(cfg.clip);
  if (clip.rank() != 4 || clip.shape()[3] != 3)
    throw DataError("inspect: clip must be (T, H, W, 3)");
  const MaterializeOptions opt = materialize_options_for(cfg);
  Tensor am = compose_am(grayscale(clip), opt.flow_alpha,
                         opt.flow_iterations);
  Tensor x = warp_am(am, opt.in_t, opt.in_h, opt.in_w);
  if (opt.zero_motion) {
    float* p = x.data();
    const int64_t plane = opt.in_t * opt.in_h * opt.in_w;
    std::fill(p + plane, p + 3 * plane, 0.0f);
  }
  const Tensor batch =
      reshape(x, Shape{1, 3, opt.in_t, opt.in_h, opt.in_w});
  const Tensor fm = loaded.model.layer_output(batch, cfg.inspect_layer);

  // Normalize over the whole layer output so slices share one scale.
  float lo = 0.0f, hi = 0.0f;
  if (fm.size() > 0) {
    lo = hi = fm.data()[0];
    for (int64_t i = 1; i < fm.size(); ++i) {
      lo = std::min(lo, fm.data()[i]);
      hi = std::max(hi, fm.data()[i]);
    }
  }
  const float span = hi - lo;
  auto shade = [&](float v) -> uint8_t {
    if (span <= 0.0f) return 0;
    return static_cast<uint8_t>(std::lround((v - lo) / span * 255.0f));
  };
  constexpr uint8_t kSeparator = 32;

  int64_t C, T, Hc, Wc;
  if (fm.rank() == 5) {
    C = fm.shape()[1];
    T = fm.shape()[2];
    Hc = fm.shape()[3];
    Wc = fm.shape()[4];
  } else {
    // Fully connected activations: one slice of 1x1 cells.
    C = fm.shape()[1];
    T = 1;
    Hc = 1;
    Wc = 1;
  }
  const int64_t cols =
      static_cast<int64_t>(std::ceil(std::sqrt(static_cast<double>(C))));
  const int64_t rows = (C + cols - 1) / cols;
  const int64_t img_w = cols * Wc + (cols + 1);
  const int64_t img_h = rows * Hc + (rows + 1);

  for (int64_t t = 0; t < T; ++t) {
    std::vector<uint8_t> img(static_cast<size_t>(img_w * img_h), kSeparator);
    for (int64_t c = 0; c < C; ++c) {
      const int64_t gx = (c % cols) * (Wc + 1) + 1;
      const int64_t gy = (c / cols) * (Hc + 1) + 1;
      for (int64_t y = 0; y < Hc; ++y) {
        for (int64_t xp = 0; xp < Wc; ++xp) {
          const float v = fm.rank() == 5
                              ? fm.at({0, c, t, y, xp})
                              : fm.at({0, c});
          img[static_cast<size_t>((gy + y) * img_w + gx + xp)] = shade(v);
        }
      }
    }
    char name[64];
    std::snprintf(name, sizeof(name), "inspect_%s_t%02lld.png",
                  cfg.inspect_layer.c_str(), static_cast<long long>(t));
    write_png_gray(join(cfg.output_dir, name), img.data(), img_w, img_h);
  }
  echo_config(cfg, cfg.output_dir, "inspect");
  std::cout << "inspect: layer " << cfg.inspect_layer << " " << fm.shape().str()
            << " -> " << T << " grids of " << rows << "x" << cols
            << " channels (" << img_w << "x" << img_h << " px)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"action parsing toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file");
    sub->add_option_function<std::string>(
        "--seed", [&](const std::string& v) { ov.set("seed", v); },
        "random seed");
    sub->add_option_function<std::string>(
           "--profile", [&](const std::string& v) { ov.set("profile", v); },
           "network profile")
        ->check(CLI::IsMember({"toy", "paper"}));
    sub->add_option_function<std::string>(
        "--data-root", [&](const std::string& v) { ov.set("data_root", v); },
        "dataset directory");
    sub->add_option_function<std::string>(
        "--output-dir", [&](const std::string& v) { ov.set("output_dir", v); },
        "artifact directory");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate aligned corpus");
  add_common(synth);
  synth->add_option_function<std::string>(
      "--categories",
      [&](const std::string& v) { ov.set("synth_categories", v); },
      "number of categories");
  synth->add_option_function<std::string>(
      "--clips-per-category",
      [&](const std::string& v) { ov.set("synth_clips_per_category", v); },
      "clips per category");

  CLI::App* compose =
      app.add_subcommand("compose", "generate fine-tune and parse corpus");
  add_common(compose);
  compose->add_option_function<std::string>(
      "--categories",
      [&](const std::string& v) { ov.set("compose_categories", v); },
      "number of categories");
  compose->add_option_function<std::string>(
      "--videos", [&](const std::string& v) { ov.set("compose_videos", v); },
      "composite test videos");

  CLI::App* train = app.add_subcommand("train", "train from scratch");
  CLI::App* finetune =
      app.add_subcommand("finetune", "adapt a checkpoint to a new corpus");
  for (CLI::App* sub : {train, finetune}) {
    add_common(sub);
    sub->add_option_function<std::string>(
        "--checkpoint",
        [&](const std::string& v) { ov.set("checkpoint", v); },
        "checkpoint to resume or adapt");
    sub->add_option_function<std::string>(
        "--max-iterations",
        [&](const std::string& v) { ov.set("max_iterations", v); },
        "training iterations");
    sub->add_option_function<std::string>(
        "--batch-size", [&](const std::string& v) { ov.set("batch_size", v); },
        "minibatch size");
  }

  CLI::App* parse = app.add_subcommand("parse", "detect actions in videos");
  add_common(parse);
  parse->add_option_function<std::string>(
      "--checkpoint", [&](const std::string& v) { ov.set("checkpoint", v); },
      "trained checkpoint");
  parse->add_option_function<std::string>(
      "--proposals", [&](const std::string& v) { ov.set("proposals", v); },
      "proposal file (skips the sliding-window generator)");
  parse->add_flag_callback(
      "--overlay", [&]() { ov.set("overlay", "true"); },
      "write per-frame detection overlays");

  CLI::App* eval = app.add_subcommand("eval", "score detections");
  add_common(eval);
  eval->add_option_function<std::string>(
      "--detections", [&](const std::string& v) { ov.set("detections", v); },
      "detection file");
  eval->add_option_function<std::string>(
      "--ground-truth",
      [&](const std::string& v) { ov.set("ground_truth", v); },
      "ground-truth file");
  eval->add_option_function<std::string>(
      "--checkpoint", [&](const std::string& v) { ov.set("checkpoint", v); },
      "checkpoint (for attributes_from = gt_crops)");
  eval->add_option_function<std::string>(
      "--attributes-from",
      [&](const std::string& v) { ov.set("attributes_from", v); },
      "attribute rows: matched | gt_crops");

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "verify gradients numerically");
  add_common(gradcheck);
  int64_t instances = 20;
  std::string perturb;
  gradcheck->add_option("--instances", instances,
                        "random instances per check");
  gradcheck->add_option("--perturb", perturb,
                        "skew one check's analytic gradient (self-test)");

  CLI::App* inspect = app.add_subcommand("inspect", "dump feature maps");
  add_common(inspect);
  inspect->add_option_function<std::string>(
      "--checkpoint", [&](const std::string& v) { ov.set("checkpoint", v); },
      "trained checkpoint");
  inspect->add_option_function<std::string>(
      "--clip", [&](const std::string& v) { ov.set("clip", v); },
      "clip tensor to inspect");
  inspect->add_option_function<std::string>(
      "--layer", [&](const std::string& v) { ov.set("inspect_layer", v); },
      "layer name (conv1, pool1, ...)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig cfg = assemble_config(config_path, ov);
    if (app.got_subcommand(synth)) return cmd_synth(cfg);
    if (app.got_subcommand(compose)) return cmd_compose(cfg);
    if (app.got_subcommand(train)) return run_training(cfg, false);
    if (app.got_subcommand(finetune)) return run_training(cfg, true);
    if (app.got_subcommand(parse)) return cmd_parse(cfg);
    if (app.got_subcommand(eval)) return cmd_eval(cfg);
    if (app.got_subcommand(gradcheck))
      return cmd_gradcheck(cfg, instances, perturb);
    if (app.got_subcommand(inspect)) return cmd_inspect(cfg);
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const GeometryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
