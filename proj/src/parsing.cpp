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

#include "vap/parsing.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include "vap/errors.hpp"
#include "vap/flow.hpp"
#include "vap/io_util.hpp"

namespace vap {
namespace {

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

double parse_double(const std::string& s, const std::string& file,
                    size_t line_no, const char* what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ParseError(file + " line " + std::to_string(line_no) + ": bad " +
                     what + " value '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s, const std::string& file,
                    size_t line_no, const char* what) {
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError(file + " line " + std::to_string(line_no) + ": bad " +
                     what + " value '" + s + "'");
  }
  return v;
}

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of("\t\n\r") != std::string::npos) {
    throw ArgumentError("video id must be non-empty and tab-free: '" + id +
                        "'");
  }
}

// Clamps one axis of a loaded proposal volume to [0, dim]; returns whether
// anything moved.  A volume entirely off the video cannot be repaired.
bool clip_axis(double* center, double* extent, double dim,
               const std::string& file, size_t line_no) {
  const double lo = *center - *extent / 2.0;
  const double hi = *center + *extent / 2.0;
  const double clo = std::max(lo, 0.0);
  const double chi = std::min(hi, dim);
  if (chi <= clo) {
    throw GeometryError(file + " line " + std::to_string(line_no) +
                        ": proposal volume lies outside the video");
  }
  double ext = chi - clo;
  double mid = (clo + chi) / 2.0;
  if (ext < 1.0) {
    ext = 1.0;
    mid = std::clamp(mid, 0.5, dim - 0.5);
  }
  const bool moved = mid != *center || ext != *extent;
  *center = mid;
  *extent = ext;
  return moved;
}

}  // namespace

Cuboid proposal_cuboid(const Proposal& p) {
  return Cuboid{p.x, p.y, p.t, p.w, p.h, p.l};
}

Cuboid detection_cuboid(const Detection& d) {
  return Cuboid{d.x, d.y, d.t, d.w, d.h, d.l};
}

std::vector<Proposal> sliding_window_proposals(
    const std::string& video_id, int64_t width, int64_t height,
    int64_t frames, const std::vector<ProposalScale>& scales,
    double stride_w, double stride_h, double stride_l) {
  check_id(video_id);
  if (width < 1 || height < 1 || frames < 1) {
    throw ArgumentError("sliding_window_proposals: empty video dimensions");
  }
  if (scales.empty()) {
    throw ArgumentError("sliding_window_proposals: empty scale list");
  }
  if (!(stride_w > 0.0) || !(stride_h > 0.0) || !(stride_l > 0.0)) {
    throw ArgumentError("sliding_window_proposals: strides must be positive");
  }
  std::vector<Proposal> out;
  for (const ProposalScale& s : scales) {
    if (s.w < 1.0 || s.h < 1.0 || s.l < 1.0 ||
        s.w > static_cast<double>(width) ||
        s.h > static_cast<double>(height) ||
        s.l > static_cast<double>(frames)) {
      throw ArgumentError("sliding_window_proposals: scale " + fmt_g(s.w) +
                          "x" + fmt_g(s.h) + "x" + fmt_g(s.l) +
                          " does not fit " + std::to_string(width) + "x" +
                          std::to_string(height) + "x" +
                          std::to_string(frames));
    }
    const int64_t step_x = std::max<int64_t>(1, std::llround(stride_w * s.w));
    const int64_t step_y = std::max<int64_t>(1, std::llround(stride_h * s.h));
    const int64_t step_t = std::max<int64_t>(1, std::llround(stride_l * s.l));
    for (double ct = s.l / 2.0; ct + s.l / 2.0 <= frames + 1e-9;
         ct += step_t) {
      for (double cy = s.h / 2.0; cy + s.h / 2.0 <= height + 1e-9;
           cy += step_y) {
        for (double cx = s.w / 2.0; cx + s.w / 2.0 <= width + 1e-9;
             cx += step_x) {
          out.push_back(Proposal{video_id, cx, cy, ct, s.w, s.h, s.l});
        }
      }
    }
  }
  return out;
}

std::vector<ProposalScale> default_proposal_scales(int64_t width,
                                                   int64_t height,
                                                   int64_t frames) {
  if (width < 1 || height < 1 || frames < 1) {
    throw ArgumentError("default_proposal_scales: empty video dimensions");
  }
  const ProposalScale stock[] = {
      {32.0, 40.0, 20.0}, {48.0, 48.0, 32.0}, {64.0, 56.0, 48.0}};
  std::vector<ProposalScale> out;
  for (ProposalScale s : stock) {
    s.w = std::min(s.w, static_cast<double>(width));
    s.h = std::min(s.h, static_cast<double>(height));
    s.l = std::min(s.l, static_cast<double>(frames));
    bool dup = false;
    for (const ProposalScale& seen : out) {
      dup = dup || (seen.w == s.w && seen.h == s.h && seen.l == s.l);
    }
    if (!dup) out.push_back(s);
  }
  return out;
}

ProposalLoad load_proposals(const std::string& path, int64_t width,
                            int64_t height, int64_t frames) {
  if (width < 1 || height < 1 || frames < 1) {
    throw ArgumentError("load_proposals: empty video dimensions");
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read proposals: " + path);
  ProposalLoad out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = split_tabs(line);
    if (f.size() != 7) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected 7 fields, got " + std::to_string(f.size()));
    }
    Proposal p;
    p.video_id = f[0];
    if (p.video_id.empty()) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": empty video id");
    }
    p.x = parse_double(f[1], path, line_no, "x");
    p.y = parse_double(f[2], path, line_no, "y");
    p.t = parse_double(f[3], path, line_no, "t");
    p.w = parse_double(f[4], path, line_no, "w");
    p.h = parse_double(f[5], path, line_no, "h");
    p.l = parse_double(f[6], path, line_no, "l");
    if (p.w <= 0.0 || p.h <= 0.0 || p.l <= 0.0) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": non-positive extent");
    }
    bool moved = clip_axis(&p.x, &p.w, static_cast<double>(width), path,
                           line_no);
    moved |= clip_axis(&p.y, &p.h, static_cast<double>(height), path, line_no);
    moved |= clip_axis(&p.t, &p.l, static_cast<double>(frames), path, line_no);
    if (moved) ++out.clipped;
    out.proposals.push_back(std::move(p));
  }
  return out;
}

void save_proposals(const std::string& path,
                    const std::vector<Proposal>& proposals) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write proposals: " + path);
  for (const Proposal& p : proposals) {
    check_id(p.video_id);
    os << p.video_id << '\t' << fmt_g(p.x) << '\t' << fmt_g(p.y) << '\t'
       << fmt_g(p.t) << '\t' << fmt_g(p.w) << '\t' << fmt_g(p.h) << '\t'
       << fmt_g(p.l) << '\n';
  }
  if (!os) throw IoError("short write on proposals: " + path);
}

void save_detections(const std::string& path,
                     const std::vector<Detection>& detections) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write detections: " + path);
  for (const Detection& d : detections) {
    check_id(d.video_id);
    os << d.video_id << '\t' << fmt_g(d.x) << '\t' << fmt_g(d.y) << '\t'
       << fmt_g(d.t) << '\t' << fmt_g(d.w) << '\t' << fmt_g(d.h) << '\t'
       << fmt_g(d.l) << '\t' << d.category_id << '\t' << fmt_g(d.score);
    for (double v : d.h1_probs) os << '\t' << fmt_g(v);
    for (double v : d.h2_probs) os << '\t' << fmt_g(v);
    os << '\n';
  }
  if (!os) throw IoError("short write on detections: " + path);
}

std::vector<Detection> load_detections(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read detections: " + path);
  std::vector<Detection> out;
  std::string line;
  size_t line_no = 0;
  const size_t want = 9 + kNumH1 + kNumH2;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = split_tabs(line);
    if (f.size() != want) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected " + std::to_string(want) +
                       " fields, got " + std::to_string(f.size()));
    }
    Detection d;
    d.video_id = f[0];
    if (d.video_id.empty()) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": empty video id");
    }
    d.x = parse_double(f[1], path, line_no, "x");
    d.y = parse_double(f[2], path, line_no, "y");
    d.t = parse_double(f[3], path, line_no, "t");
    d.w = parse_double(f[4], path, line_no, "w");
    d.h = parse_double(f[5], path, line_no, "h");
    d.l = parse_double(f[6], path, line_no, "l");
    long long cat = parse_int(f[7], path, line_no, "category");
    if (cat < 0) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": negative category");
    }
    d.category_id = static_cast<int>(cat);
    d.score = parse_double(f[8], path, line_no, "score");
    if (d.score < 0.0 || d.score > 1.0) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": score outside [0,1]");
    }
    for (int64_t k = 0; k < kNumH1; ++k) {
      d.h1_probs[static_cast<size_t>(k)] =
          parse_double(f[9 + static_cast<size_t>(k)], path, line_no, "h1");
    }
    for (int64_t k = 0; k < kNumH2; ++k) {
      d.h2_probs[static_cast<size_t>(k)] = parse_double(
          f[9 + static_cast<size_t>(kNumH1 + k)], path, line_no, "h2");
    }
    out.push_back(std::move(d));
  }
  return out;
}

Cuboid refine_location(const Proposal& p, double loc_w, double loc_h) {
  if (!std::isfinite(loc_w) || !std::isfinite(loc_h)) {
    throw ArgumentError("refine_location: non-finite offset");
  }
  Cuboid c = proposal_cuboid(p);
  c.cx += loc_w * p.w;
  c.cy += loc_h * p.h;
  return c;
}

Cuboid refine_location_raw(const Proposal& p, double shift_x,
                           double shift_y) {
  if (!std::isfinite(shift_x) || !std::isfinite(shift_y)) {
    throw ArgumentError("refine_location: non-finite offset");
  }
  Cuboid c = proposal_cuboid(p);
  c.cx += shift_x;
  c.cy += shift_y;
  return c;
}

double iou_3d(const Cuboid& a, const Cuboid& b) {
  if (a.w <= 0.0 || a.h <= 0.0 || a.l <= 0.0 || b.w <= 0.0 || b.h <= 0.0 ||
      b.l <= 0.0) {
    throw GeometryError("iou_3d: non-positive extent");
  }
  // Volumes come from the same interval endpoints as the overlaps, so
  // identical cuboids score exactly 1 in floating point.
  double inter = 1.0, va = 1.0, vb = 1.0;
  auto axis = [&](double ca, double ea, double cb, double eb) {
    const double alo = ca - ea / 2.0, ahi = ca + ea / 2.0;
    const double blo = cb - eb / 2.0, bhi = cb + eb / 2.0;
    inter *= std::max(0.0, std::min(ahi, bhi) - std::max(alo, blo));
    va *= ahi - alo;
    vb *= bhi - blo;
  };
  axis(a.cx, a.w, b.cx, b.w);
  axis(a.cy, a.h, b.cy, b.h);
  axis(a.ct, a.l, b.ct, b.l);
  if (va <= 0.0 || vb <= 0.0) {
    throw GeometryError("iou_3d: degenerate cuboid");
  }
  return inter / (va + vb - inter);
}

std::vector<Detection> nms(const std::vector<Detection>& detections,
                           double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw ArgumentError("nms: threshold must be in [0,1]");
  }
  for (const Detection& d : detections) {
    if (!std::isfinite(d.score)) {
      throw ArgumentError("nms: non-finite score");
    }
  }
  std::vector<size_t> order(detections.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return detections[a].score > detections[b].score;
  });
  std::vector<Detection> kept;
  for (size_t i : order) {
    const Detection& d = detections[i];
    bool keep = true;
    for (const Detection& k : kept) {
      if (k.category_id != d.category_id) continue;
      if (iou_3d(detection_cuboid(k), detection_cuboid(d)) > iou_threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(d);
  }
  return kept;
}

Tensor extract_am_subvolume(const Tensor& am, int64_t x0, int64_t y0,
                            int64_t t0, int64_t w, int64_t h, int64_t l) {
  if (am.rank() != 4 || am.shape()[0] != 3) {
    throw ShapeError("extract_am_subvolume: need (3,T,H,W), got " +
                     am.shape().str());
  }
  if (w < 1 || h < 1 || l < 1) {
    throw ArgumentError("extract_am_subvolume: non-positive box extents");
  }
  const int64_t T = am.shape()[1], H = am.shape()[2], W = am.shape()[3];
  Tensor out = Tensor::zeros({3, l, h, w});
  const int64_t tb = std::max<int64_t>(0, -t0),
                te = std::min(l, T - t0);
  const int64_t yb = std::max<int64_t>(0, -y0),
                ye = std::min(h, H - y0);
  const int64_t xb = std::max<int64_t>(0, -x0),
                xe = std::min(w, W - x0);
  if (tb >= te || yb >= ye || xb >= xe) return out;  // fully outside: zeros
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t t = tb; t < te; ++t) {
      for (int64_t y = yb; y < ye; ++y) {
        const float* src =
            am.data() + ((c * T + (t + t0)) * H + (y + y0)) * W + (x0 + xb);
        float* dst = out.data() + ((c * l + t) * h + y) * w + xb;
        std::memcpy(dst, src, static_cast<size_t>(xe - xb) * sizeof(float));
      }
    }
  }
  return out;
}

std::vector<Detection> parse_video(const Model& model,
                                   const std::string& video_id,
                                   const Tensor& video,
                                   const std::vector<Proposal>& proposals,
                                   const ParseConfig& cfg) {
  check_id(video_id);
  if (video.rank() != 4 || video.shape()[3] != 3) {
    throw ShapeError("parse_video: video must be (T,H,W,3), got " +
                     video.shape().str());
  }
  if (!model.config().include_background) {
    throw ConfigError("parse_video: model has no background class");
  }
  if (cfg.batch_size < 1) throw ArgumentError("parse_video: batch size < 1");
  if (proposals.empty()) return {};

  // Flow over the whole video once; each proposal then cuts its subvolume
  // out of the composed appearance-motion stack.
  Tensor am =
      compose_am(grayscale(video), cfg.input.flow_alpha,
                 cfg.input.flow_iterations);
  std::vector<TrainSample> inputs;
  inputs.reserve(proposals.size());
  for (const Proposal& p : proposals) {
    const int64_t w = std::max<int64_t>(1, std::llround(p.w));
    const int64_t h = std::max<int64_t>(1, std::llround(p.h));
    const int64_t l = std::max<int64_t>(1, std::llround(p.l));
    const int64_t x0 = std::llround(p.x - p.w / 2.0);
    const int64_t y0 = std::llround(p.y - p.h / 2.0);
    const int64_t t0 = std::llround(p.t - p.l / 2.0);
    Tensor sub = extract_am_subvolume(am, x0, y0, t0, w, h, l);
    TrainSample s;
    s.input = warp_am(sub, cfg.input.in_t, cfg.input.in_h, cfg.input.in_w);
    if (cfg.input.zero_motion) {
      const int64_t plane = cfg.input.in_t * cfg.input.in_h * cfg.input.in_w;
      std::memset(s.input.data() + plane, 0,
                  static_cast<size_t>(2 * plane) * sizeof(float));
    }
    inputs.push_back(std::move(s));
  }
  HeadOutputs out = predict_all(model, inputs, cfg.batch_size);

  const int64_t classes = model.config().num_classes();
  const int64_t background = model.config().background_class();
  std::vector<Detection> dets;
  for (size_t i = 0; i < proposals.size(); ++i) {
    const float* row =
        out.class_probs.data() + static_cast<int64_t>(i) * classes;
    int64_t best = 0;
    for (int64_t c = 1; c < classes; ++c) {
      if (row[c] > row[best]) best = c;
    }
    if (best == background) continue;
    const Proposal& p = proposals[i];
    const double lw = out.loc.data()[2 * i], lh = out.loc.data()[2 * i + 1];
    Cuboid c = refine_location(p, lw, lh);
    Detection d;
    d.video_id = video_id;
    d.x = c.cx;
    d.y = c.cy;
    d.t = c.ct;
    d.w = p.w;
    d.h = p.h;
    d.l = p.l;
    d.category_id = static_cast<int>(best);
    d.score = row[best];
    for (int64_t k = 0; k < kNumH1; ++k) {
      d.h1_probs[static_cast<size_t>(k)] =
          out.h1_probs.data()[static_cast<int64_t>(i) * kNumH1 + k];
    }
    for (int64_t k = 0; k < kNumH2; ++k) {
      d.h2_probs[static_cast<size_t>(k)] =
          out.h2_probs.data()[static_cast<int64_t>(i) * kNumH2 + k];
    }
    dets.push_back(std::move(d));
  }
  return nms(dets, cfg.nms_iou);
}

}  // namespace vap
