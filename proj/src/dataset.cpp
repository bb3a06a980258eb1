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

#include "vap/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include "vap/errors.hpp"
#include "vap/flow.hpp"
#include "vap/io_util.hpp"
#include "vap/rng.hpp"

namespace vap {
namespace {

namespace fs = std::filesystem;

std::string fmt_g(double v) { return io::format_g17(v); }

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

double parse_double_field(const std::string& s, size_t line_no,
                          const char* what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError("manifest line " + std::to_string(line_no) + ": bad " +
                     what + " value '" + s + "'");
  }
  return v;
}

long long parse_int_field(const std::string& s, size_t line_no,
                          const char* what) {
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError("manifest line " + std::to_string(line_no) + ": bad " +
                     what + " value '" + s + "'");
  }
  return v;
}

template <size_t N>
std::string bits_to_string(const std::array<uint8_t, N>& bits) {
  std::string s(N, '0');
  for (size_t i = 0; i < N; ++i) s[i] = bits[i] ? '1' : '0';
  return s;
}

template <size_t N>
std::array<uint8_t, N> bits_from_string(const std::string& s, size_t line_no,
                                        const char* what) {
  if (s.size() != N) {
    throw ParseError("manifest line " + std::to_string(line_no) + ": " + what +
                     " needs " + std::to_string(N) + " bits, got " +
                     std::to_string(s.size()));
  }
  std::array<uint8_t, N> out{};
  for (size_t i = 0; i < N; ++i) {
    if (s[i] != '0' && s[i] != '1') {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " +
                       what + " has a non-binary character");
    }
    out[i] = s[i] == '1' ? 1 : 0;
  }
  return out;
}

// Network input plus supervision from one cropped RGB subclip.
TrainSample finish_sample(const Tensor& rgb, const ActionAnnotation& ann,
                          const MaterializeOptions& opt) {
  Tensor gray = grayscale(rgb);
  Tensor am = compose_am(gray, opt.flow_alpha, opt.flow_iterations);
  Tensor in = warp_am(am, opt.in_t, opt.in_h, opt.in_w);
  if (opt.zero_motion) {
    const int64_t plane = opt.in_t * opt.in_h * opt.in_w;
    std::memset(in.data() + plane, 0,
                static_cast<size_t>(2 * plane) * sizeof(float));
  }
  TrainSample s;
  s.input = std::move(in);
  s.category = ann.category_id;
  s.h1 = ann.h1_bits;
  s.h2 = ann.h2_bits;
  s.loc_w = static_cast<float>(ann.loc_w);
  s.loc_h = static_cast<float>(ann.loc_h);
  return s;
}

std::string periodic_path(const std::string& base, int64_t iteration) {
  char tag[32];
  std::snprintf(tag, sizeof(tag), "_iter%06lld",
                static_cast<long long>(iteration));
  size_t dot = base.find_last_of('.');
  size_t slash = base.find_last_of("/\\");
  if (dot == std::string::npos ||
      (slash != std::string::npos && dot < slash)) {
    return base + tag;
  }
  return base.substr(0, dot) + tag + base.substr(dot);
}

}  // namespace

std::string manifest_to_text(const DatasetManifest& m) {
  std::ostringstream os;
  os << "vap-manifest\tversion\t1\tseed\t" << m.seed << "\tsplit\t" << m.split
     << "\n";
  os << "# path\tcategory\th1\th2\tloc_w\tloc_h\tcx\tcy\tct\tw\th\tl\n";
  for (const ManifestEntry& e : m.entries) {
    const ActionAnnotation& a = e.annotation;
    os << e.path << '\t' << a.category_id << '\t' << bits_to_string(a.h1_bits)
       << '\t' << bits_to_string(a.h2_bits) << '\t' << fmt_g(a.loc_w) << '\t'
       << fmt_g(a.loc_h) << '\t' << fmt_g(a.volume.cx) << '\t'
       << fmt_g(a.volume.cy) << '\t' << fmt_g(a.volume.ct) << '\t'
       << fmt_g(a.volume.w) << '\t' << fmt_g(a.volume.h) << '\t'
       << fmt_g(a.volume.l) << '\n';
  }
  return os.str();
}

DatasetManifest manifest_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  size_t line_no = 0;
  DatasetManifest m;
  bool saw_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = split_tabs(line);
    if (!saw_header) {
      if (f.size() != 7 || f[0] != "vap-manifest" || f[1] != "version" ||
          f[3] != "seed" || f[5] != "split") {
        throw ParseError("manifest line " + std::to_string(line_no) +
                         ": malformed header");
      }
      if (f[2] != "1") {
        throw ParseError("manifest line " + std::to_string(line_no) +
                         ": unsupported version " + f[2]);
      }
      m.seed = static_cast<uint64_t>(
          parse_int_field(f[4], line_no, "seed"));
      m.split = f[6];
      saw_header = true;
      continue;
    }
    if (f.size() != 12) {
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": expected 12 fields, got " +
                       std::to_string(f.size()));
    }
    ManifestEntry e;
    e.path = f[0];
    if (e.path.empty()) {
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": empty path");
    }
    long long cat = parse_int_field(f[1], line_no, "category");
    if (cat < 0) {
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": negative category");
    }
    e.annotation.category_id = static_cast<int>(cat);
    e.annotation.h1_bits = bits_from_string<kNumH1>(f[2], line_no, "h1");
    e.annotation.h2_bits = bits_from_string<kNumH2>(f[3], line_no, "h2");
    e.annotation.loc_w = parse_double_field(f[4], line_no, "loc_w");
    e.annotation.loc_h = parse_double_field(f[5], line_no, "loc_h");
    e.annotation.volume.cx = parse_double_field(f[6], line_no, "cx");
    e.annotation.volume.cy = parse_double_field(f[7], line_no, "cy");
    e.annotation.volume.ct = parse_double_field(f[8], line_no, "ct");
    e.annotation.volume.w = parse_double_field(f[9], line_no, "w");
    e.annotation.volume.h = parse_double_field(f[10], line_no, "h");
    e.annotation.volume.l = parse_double_field(f[11], line_no, "l");
    m.entries.push_back(std::move(e));
  }
  if (!saw_header) throw ParseError("manifest: missing header line");
  return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write manifest: " + path);
  os << manifest_to_text(m);
  if (!os) throw IoError("short write on manifest: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read manifest: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return manifest_from_text(buf.str());
}

DatasetManifest generate_dataset(const std::string& root,
                                 const SynthDatasetConfig& cfg) {
  if (cfg.num_categories <= 0) {
    throw ArgumentError("generate_dataset: need at least one category");
  }
  if (cfg.clips_per_category <= 0) {
    throw ArgumentError("generate_dataset: need at least one clip/category");
  }
  if (cfg.canvas_h < 24 || cfg.canvas_w < 24) {
    throw ArgumentError("generate_dataset: canvas below 24x24");
  }
  fs::create_directories(root);
  static const int64_t kLengths[4] = {16, 24, 32, 48};
  DatasetManifest m;
  m.split = "all";
  m.seed = cfg.seed;
  std::ostringstream specs;
  specs << "# index\tpath\tcategory\tprogram\tspeed\tdirection\tphase\t"
           "cyclic\tvariant\tlength\n";
  for (int cat = 0; cat < cfg.num_categories; ++cat) {
    for (int i = 0; i < cfg.clips_per_category; ++i) {
      const int idx = cat * cfg.clips_per_category + i;
      Rng rng(mix_seed(cfg.seed, 0xC11B, static_cast<uint64_t>(idx)));
      const int64_t length = kLengths[rng.uniform_int(4)];
      ActionSpec spec =
          sample_action_spec(cat, cfg.canvas_h, cfg.canvas_w, length, rng);
      SynthResult sr =
          synth_action_clip(spec, cfg.canvas_h, cfg.canvas_w, length,
                            mix_seed(cfg.seed, 0x51EED, idx));
      char name[32];
      std::snprintf(name, sizeof(name), "clip_%05d.aptn", idx);
      save_tensor((fs::path(root) / name).string(), sr.clip);
      m.entries.push_back({name, sr.annotation});
      specs << idx << '\t' << name << '\t' << cat << '\t'
            << motion_program_name(spec.motion_program) << '\t'
            << fmt_g(spec.speed) << '\t' << fmt_g(spec.direction) << '\t'
            << fmt_g(spec.limb_phase) << '\t' << (spec.cyclic ? 1 : 0) << '\t'
            << spec.character_variant << '\t' << length << '\n';
    }
  }
  {
    std::ofstream os(fs::path(root) / "specs.tsv", std::ios::binary);
    if (!os) throw IoError("cannot write specs.tsv under " + root);
    os << specs.str();
  }
  save_manifest((fs::path(root) / "all.manifest").string(), m);
  return m;
}

SplitManifests build_manifest(const std::string& root, double train_fraction,
                              uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ArgumentError("build_manifest: train fraction must be in (0,1)");
  }
  const fs::path all_path = fs::path(root) / "all.manifest";
  if (!fs::exists(all_path)) {
    throw DataError("build_manifest: no all.manifest under " + root);
  }
  DatasetManifest all = load_manifest(all_path.string());
  const size_t n = all.entries.size();
  if (n < 2) {
    throw DataError("build_manifest: need at least two entries, have " +
                    std::to_string(n));
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(mix_seed(seed, 0xF15));
  for (size_t i = n - 1; i > 0; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(i + 1));
    std::swap(order[i], order[j]);
  }
  size_t n_train = static_cast<size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::min(std::max<size_t>(n_train, 1), n - 1);
  SplitManifests out;
  out.train.split = "train";
  out.train.seed = seed;
  out.test.split = "test";
  out.test.seed = seed;
  for (size_t k = 0; k < n; ++k) {
    (k < n_train ? out.train : out.test)
        .entries.push_back(all.entries[order[k]]);
  }
  return out;
}

std::vector<TrainSample> materialize_train(const Tensor& clip,
                                           const ActionAnnotation& ann,
                                           const MaterializeOptions& opt,
                                           uint64_t seed) {
  std::vector<TrainSample> out;
  for (const AugmentedSample& a : augment(clip, ann, seed)) {
    out.push_back(finish_sample(a.clip, a.annotation, opt));
  }
  return out;
}

int64_t eval_crop_margin(int64_t h, int64_t w) {
  const int64_t lo = std::max<int64_t>(1, std::llround(10.0 * w / 256.0));
  const int64_t hi = std::min<int64_t>(std::llround(50.0 * w / 256.0),
                                       (std::min(h, w) - 8) / 2);
  if (hi < lo) {
    throw ArgumentError("eval_crop_margin: canvas " + std::to_string(w) + "x" +
                        std::to_string(h) + " too small for the crop range");
  }
  return (lo + hi) / 2;
}

std::vector<TrainSample> materialize_eval(const Tensor& clip,
                                          const ActionAnnotation& ann,
                                          const MaterializeOptions& opt) {
  if (clip.rank() != 4 || clip.shape()[3] != 3) {
    throw ShapeError("materialize_eval: clip must be (T,H,W,3), got " +
                     clip.shape().str());
  }
  const int64_t H = clip.shape()[1], W = clip.shape()[2];
  const int64_t t = eval_crop_margin(H, W);
  const int64_t w2 = W - 2 * t, h2 = H - 2 * t;
  std::vector<TrainSample> out;
  for (const CropItem& item : crop5(clip, t)) {
    const double x0 = static_cast<double>(t) + item.center_dx;
    const double y0 = static_cast<double>(t) + item.center_dy;
    ActionAnnotation a = ann;
    a.volume.cx -= x0;
    a.volume.cy -= y0;
    a.loc_w = (a.volume.cx - (w2 - 1) / 2.0) / static_cast<double>(w2);
    a.loc_h = (a.volume.cy - (h2 - 1) / 2.0) / static_cast<double>(h2);
    out.push_back(finish_sample(item.clip, a, opt));
  }
  return out;
}

std::vector<TrainSample> materialize_manifest(const std::string& root,
                                              const DatasetManifest& m,
                                              const MaterializeOptions& opt,
                                              bool train_view, uint64_t seed) {
  std::vector<TrainSample> out;
  out.reserve(m.entries.size() * 5);
  for (size_t i = 0; i < m.entries.size(); ++i) {
    const ManifestEntry& e = m.entries[i];
    Tensor clip = load_tensor((fs::path(root) / e.path).string());
    std::vector<TrainSample> part =
        train_view
            ? materialize_train(clip, e.annotation, opt,
                                mix_seed(seed, 0xA06, i))
            : materialize_eval(clip, e.annotation, opt);
    for (TrainSample& s : part) out.push_back(std::move(s));
  }
  return out;
}

void assemble_batch(const std::vector<TrainSample>& samples,
                    int64_t batch_size, uint64_t seed, int64_t iteration,
                    Tensor* x, Targets* t) {
  if (samples.empty()) throw ArgumentError("assemble_batch: no samples");
  if (batch_size < 1) throw ArgumentError("assemble_batch: batch size < 1");
  if (x == nullptr || t == nullptr) {
    throw ArgumentError("assemble_batch: null output");
  }
  const Shape& s0 = samples[0].input.shape();
  if (s0.rank() != 4) {
    throw ShapeError("assemble_batch: sample input must be rank 4, got " +
                     s0.str());
  }
  Shape want{batch_size, s0[0], s0[1], s0[2], s0[3]};
  if (x->shape() != want) *x = Tensor::zeros(want);
  const int64_t row = s0.count();
  t->category.assign(static_cast<size_t>(batch_size), 0);
  t->h1 = Tensor::zeros({batch_size, kNumH1});
  t->h2 = Tensor::zeros({batch_size, kNumH2});
  t->loc = Tensor::zeros({batch_size, 2});
  Rng rng(mix_seed(seed, 0xBA7C, static_cast<uint64_t>(iteration)));
  for (int64_t slot = 0; slot < batch_size; ++slot) {
    const size_t idx =
        static_cast<size_t>(rng.uniform_int(samples.size()));
    const TrainSample& s = samples[idx];
    if (s.input.shape() != s0) {
      throw ShapeError("assemble_batch: sample " + std::to_string(idx) +
                       " shape " + s.input.shape().str() +
                       " differs from " + s0.str());
    }
    std::memcpy(x->data() + slot * row, s.input.data(),
                static_cast<size_t>(row) * sizeof(float));
    t->category[static_cast<size_t>(slot)] = s.category;
    for (int64_t k = 0; k < kNumH1; ++k) {
      t->h1.data()[slot * kNumH1 + k] = s.h1[static_cast<size_t>(k)];
    }
    for (int64_t k = 0; k < kNumH2; ++k) {
      t->h2.data()[slot * kNumH2 + k] = s.h2[static_cast<size_t>(k)];
    }
    t->loc.data()[slot * 2 + 0] = s.loc_w;
    t->loc.data()[slot * 2 + 1] = s.loc_h;
  }
}

LossBreakdown train_model(Model* model,
                          const std::vector<TrainSample>& samples,
                          const TrainRunConfig& cfg) {
  if (model == nullptr) throw ArgumentError("train_model: null model");
  if (samples.empty()) throw ArgumentError("train_model: no samples");
  if (cfg.batch_size < 1) throw ArgumentError("train_model: batch size < 1");
  if (cfg.start_iteration < 0 || cfg.max_iterations < cfg.start_iteration) {
    throw ArgumentError("train_model: bad iteration range [" +
                        std::to_string(cfg.start_iteration) + ", " +
                        std::to_string(cfg.max_iterations) + ")");
  }
  std::ofstream log;
  if (!cfg.loss_log_path.empty()) {
    log.open(cfg.loss_log_path, std::ios::binary);
    if (!log) throw IoError("cannot write loss log: " + cfg.loss_log_path);
    log << "iteration,lr,L_cat,L_H1,L_H2,L_bbox,total\n";
  }
  Tensor x;
  Targets tg;
  LossBreakdown last{};
  for (int64_t it = cfg.start_iteration; it < cfg.max_iterations; ++it) {
    assemble_batch(samples, cfg.batch_size, cfg.seed, it, &x, &tg);
    const double lr = lr_at(cfg.base_lr, cfg.lr_decay, cfg.lr_step, it);
    try {
      last = model->train_step(x, tg, lr, cfg.momentum);
    } catch (const NumericError& e) {
      // The model's message carries the per-head breakdown; add when.
      throw NumericError("train_model: aborted at iteration " +
                         std::to_string(it) + ": " + e.what());
    }
    if (!std::isfinite(last.total)) {
      throw NumericError(
          "train_model: non-finite loss at iteration " + std::to_string(it) +
          " (L_cat=" + fmt_g(last.category) + ", L_H1=" + fmt_g(last.h1) +
          ", L_H2=" + fmt_g(last.h2) + ", L_bbox=" + fmt_g(last.loc) + ")");
    }
    if (log.is_open()) {
      log << it << ',' << fmt_g(lr) << ',' << fmt_g(last.category) << ','
          << fmt_g(last.h1) << ',' << fmt_g(last.h2) << ',' << fmt_g(last.loc)
          << ',' << fmt_g(last.total) << '\n';
    }
    const int64_t done = it + 1;
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
        done % cfg.checkpoint_every == 0 && done < cfg.max_iterations) {
      model->save_checkpoint(periodic_path(cfg.checkpoint_path, done), done,
                             cfg.seed);
    }
  }
  if (!cfg.checkpoint_path.empty()) {
    model->save_checkpoint(cfg.checkpoint_path, cfg.max_iterations, cfg.seed);
  }
  return last;
}

HeadOutputs predict_all(const Model& model,
                        const std::vector<TrainSample>& samples,
                        int64_t batch_size) {
  if (samples.empty()) throw ArgumentError("predict_all: no samples");
  if (batch_size < 1) throw ArgumentError("predict_all: batch size < 1");
  const int64_t n = static_cast<int64_t>(samples.size());
  const Shape& s0 = samples[0].input.shape();
  const int64_t row = s0.count();
  const ModelConfig& cfg = model.config();
  HeadOutputs all;
  all.loc = Tensor::zeros({n, 2});
  all.class_probs = Tensor::zeros({n, cfg.num_classes()});
  all.h1_probs = Tensor::zeros({n, cfg.num_h1});
  all.h2_probs = Tensor::zeros({n, cfg.num_h2});
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t b = std::min(batch_size, n - start);
    Tensor x = Tensor::zeros({b, s0[0], s0[1], s0[2], s0[3]});
    for (int64_t i = 0; i < b; ++i) {
      const TrainSample& s = samples[static_cast<size_t>(start + i)];
      if (s.input.shape() != s0) {
        throw ShapeError("predict_all: sample " + std::to_string(start + i) +
                         " shape " + s.input.shape().str() +
                         " differs from " + s0.str());
      }
      std::memcpy(x.data() + i * row, s.input.data(),
                  static_cast<size_t>(row) * sizeof(float));
    }
    HeadOutputs o = model.forward(x);
    auto copy_rows = [&](const Tensor& src, Tensor* dst) {
      const int64_t width = src.shape()[1];
      std::memcpy(dst->data() + start * width, src.data(),
                  static_cast<size_t>(b * width) * sizeof(float));
    };
    copy_rows(o.loc, &all.loc);
    copy_rows(o.class_probs, &all.class_probs);
    copy_rows(o.h1_probs, &all.h1_probs);
    copy_rows(o.h2_probs, &all.h2_probs);
  }
  return all;
}

}  // namespace vap
