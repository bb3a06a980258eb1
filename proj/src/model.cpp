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

#include "vap/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "vap/io_util.hpp"
#include "vap/rng.hpp"

namespace vap {

namespace {

constexpr uint32_t kCheckpointMagic = 0x4b435041;  // "APCK"
constexpr uint32_t kCheckpointVersion = 1;

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t param_seed(uint64_t seed, const std::string& name) {
  return mix_seed(seed, fnv1a(name));
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_triple(const Triple& t) {
  return std::to_string(t[0]) + "x" + std::to_string(t[1]) + "x" +
         std::to_string(t[2]);
}

Triple parse_triple(const std::string& s, const std::string& what) {
  Triple t{};
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%dx%dx%d%n", &t[0], &t[1], &t[2], &consumed) !=
          3 ||
      consumed != static_cast<int>(s.size())) {
    throw ParseError("bad triple '" + s + "' for " + what);
  }
  return t;
}

int64_t parse_i64(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad integer '" + s + "' for " + what);
  }
}

double parse_f64(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad number '" + s + "' for " + what);
  }
}

Tensor scaled(const Tensor& t, double f) {
  Tensor out(t.shape());
  for (int64_t i = 0; i < t.size(); ++i) {
    out[i] = static_cast<float>(t[i] * f);
  }
  return out;
}

// Output extent of a conv/pool axis, or -1 when the geometry collapses.
int64_t ext(int64_t in, int64_t k, int64_t s, int64_t p) {
  const int64_t padded = in + 2 * p;
  if (k > padded) return -1;
  return (padded - k) / s + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ModelConfig ModelConfig::toy(int64_t categories) {
  ModelConfig c;
  c.input_c = 3;
  c.input_t = 8;
  c.input_h = 32;
  c.input_w = 32;
  c.convs = {ConvSpec{8}, ConvSpec{16}, ConvSpec{16}};
  c.pool_after = {1, 2, 3};
  c.fc1_dim = 64;
  c.fc2_dim = 64;
  c.num_categories = categories;
  return c;
}

ModelConfig ModelConfig::paper(int64_t categories) {
  ModelConfig c;
  c.input_c = 3;
  c.input_t = 32;
  c.input_h = 112;
  c.input_w = 112;
  c.convs = {ConvSpec{64},  ConvSpec{128}, ConvSpec{256},
             ConvSpec{256}, ConvSpec{256}, ConvSpec{256}};
  c.pool_after = {1, 2, 4, 6};
  c.fc1_dim = 4096;
  c.fc2_dim = 4096;
  c.num_categories = categories;
  return c;
}

ModelConfig ModelConfig::tiny(int64_t categories) {
  ModelConfig c;
  c.input_c = 3;
  c.input_t = 4;
  c.input_h = 8;
  c.input_w = 8;
  c.convs = {ConvSpec{4}, ConvSpec{6}};
  c.pool_after = {1, 2};
  c.fc1_dim = 12;
  c.fc2_dim = 12;
  c.num_categories = categories;
  return c;
}

void ModelConfig::validate() const {
  if (input_c < 1 || input_t < 1 || input_h < 1 || input_w < 1) {
    throw ConfigError("model: input extents must be positive");
  }
  if (convs.empty()) throw ConfigError("model: need at least one conv layer");
  for (size_t i = 0; i < convs.size(); ++i) {
    const ConvSpec& cs = convs[i];
    if (cs.out_c < 1) {
      throw ConfigError("model: conv" + std::to_string(i + 1) +
                        " out_channels must be positive");
    }
    for (int k = 0; k < 3; ++k) {
      if (cs.kernel[k] < 1 || cs.stride[k] < 1 || cs.pad[k] < 0) {
        throw ConfigError("model: conv" + std::to_string(i + 1) +
                          " kernel/stride/pad out of range");
      }
    }
  }
  int prev = 0;
  for (int p : pool_after) {
    if (p <= prev || p > static_cast<int>(convs.size())) {
      throw ConfigError("model: pool_after must be strictly increasing conv "
                        "indices in [1, " + std::to_string(convs.size()) +
                        "]");
    }
    prev = p;
  }
  for (int k = 0; k < 3; ++k) {
    if (pool_kernel[k] < 1 || pool_stride[k] < 1) {
      throw ConfigError("model: pool kernel/stride must be positive");
    }
  }
  if (fc1_dim < 1 || fc2_dim < 1) {
    throw ConfigError("model: fc dims must be positive");
  }
  if (fc1_rank < 0 || fc2_rank < 0) {
    throw ConfigError("model: fc ranks must be >= 0");
  }
  if (num_categories < 1) {
    throw ConfigError("model: need at least one category");
  }
  if (num_classes() < 2) {
    throw ConfigError("model: need at least two classes for softmax");
  }
  if (num_h1 < 1 || num_h2 < 1) {
    throw ConfigError("model: attribute counts must be positive");
  }
  if (lambda1 < 0 || lambda2 < 0 || beta < 0) {
    throw ConfigError("model: loss weights must be non-negative");
  }
}

std::string ModelConfig::canonical_text() const {
  std::ostringstream os;
  os << "input=" << input_c << "," << input_t << "," << input_h << ","
     << input_w << "\n";
  os << "convs=" << convs.size() << "\n";
  for (size_t i = 0; i < convs.size(); ++i) {
    const ConvSpec& cs = convs[i];
    os << "conv" << (i + 1) << "=" << cs.out_c << "," << fmt_triple(cs.kernel)
       << "," << fmt_triple(cs.stride) << "," << fmt_triple(cs.pad) << "\n";
  }
  os << "pool_after=";
  for (size_t i = 0; i < pool_after.size(); ++i) {
    if (i) os << ",";
    os << pool_after[i];
  }
  os << "\n";
  os << "pool_kernel=" << fmt_triple(pool_kernel) << "\n";
  os << "pool_stride=" << fmt_triple(pool_stride) << "\n";
  os << "fc1_dim=" << fc1_dim << "\n";
  os << "fc2_dim=" << fc2_dim << "\n";
  os << "fc1_rank=" << fc1_rank << "\n";
  os << "fc2_rank=" << fc2_rank << "\n";
  os << "categories=" << num_categories << "\n";
  os << "include_background=" << (include_background ? 1 : 0) << "\n";
  os << "h1=" << num_h1 << "\n";
  os << "h2=" << num_h2 << "\n";
  os << "lambda1=" << fmt_double(lambda1) << "\n";
  os << "lambda2=" << fmt_double(lambda2) << "\n";
  os << "beta=" << fmt_double(beta) << "\n";
  return os.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("model config: missing '=' in line '" + line + "'");
    }
    const std::string key = line.substr(0, eq);
    if (kv.count(key)) {
      throw ParseError("model config: duplicate key '" + key + "'");
    }
    kv[key] = line.substr(eq + 1);
  }
  auto take = [&kv](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw ParseError("model config: missing key '" + key + "'");
    }
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  ModelConfig c;
  {
    const std::string v = take("input");
    long long a, b, t, w;
    int consumed = 0;
    if (std::sscanf(v.c_str(), "%lld,%lld,%lld,%lld%n", &a, &b, &t, &w,
                    &consumed) != 4 ||
        consumed != static_cast<int>(v.size())) {
      throw ParseError("model config: bad input extents '" + v + "'");
    }
    c.input_c = a;
    c.input_t = b;
    c.input_h = t;
    c.input_w = w;
  }
  const int64_t n_convs = parse_i64(take("convs"), "convs");
  if (n_convs < 1 || n_convs > 64) {
    throw ParseError("model config: convs count out of range");
  }
  c.convs.clear();
  for (int64_t i = 1; i <= n_convs; ++i) {
    const std::string v = take("conv" + std::to_string(i));
    const size_t c1 = v.find(',');
    if (c1 == std::string::npos) {
      throw ParseError("model config: bad conv line '" + v + "'");
    }
    ConvSpec cs;
    cs.out_c = parse_i64(v.substr(0, c1), "conv out_channels");
    std::string rest = v.substr(c1 + 1);
    const size_t c2 = rest.find(',');
    const size_t c3 = rest.find(',', c2 + 1);
    if (c2 == std::string::npos || c3 == std::string::npos) {
      throw ParseError("model config: bad conv line '" + v + "'");
    }
    cs.kernel = parse_triple(rest.substr(0, c2), "conv kernel");
    cs.stride = parse_triple(rest.substr(c2 + 1, c3 - c2 - 1), "conv stride");
    cs.pad = parse_triple(rest.substr(c3 + 1), "conv pad");
    c.convs.push_back(cs);
  }
  {
    const std::string v = take("pool_after");
    c.pool_after.clear();
    if (!v.empty()) {
      std::istringstream ps(v);
      std::string tok;
      while (std::getline(ps, tok, ',')) {
        c.pool_after.push_back(static_cast<int>(parse_i64(tok, "pool_after")));
      }
    }
  }
  c.pool_kernel = parse_triple(take("pool_kernel"), "pool_kernel");
  c.pool_stride = parse_triple(take("pool_stride"), "pool_stride");
  c.fc1_dim = parse_i64(take("fc1_dim"), "fc1_dim");
  c.fc2_dim = parse_i64(take("fc2_dim"), "fc2_dim");
  c.fc1_rank = parse_i64(take("fc1_rank"), "fc1_rank");
  c.fc2_rank = parse_i64(take("fc2_rank"), "fc2_rank");
  c.num_categories = parse_i64(take("categories"), "categories");
  c.include_background = parse_i64(take("include_background"),
                                   "include_background") != 0;
  c.num_h1 = parse_i64(take("h1"), "h1");
  c.num_h2 = parse_i64(take("h2"), "h2");
  c.lambda1 = parse_f64(take("lambda1"), "lambda1");
  c.lambda2 = parse_f64(take("lambda2"), "lambda2");
  c.beta = parse_f64(take("beta"), "beta");
  if (!kv.empty()) {
    throw ParseError("model config: unknown key '" + kv.begin()->first + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Shape planning

std::vector<LayerInfo> plan_layers(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<LayerInfo> plan;
  int64_t ch = cfg.input_c, t = cfg.input_t, h = cfg.input_h, w = cfg.input_w;
  size_t pool_i = 0;
  for (size_t l = 0; l < cfg.convs.size(); ++l) {
    const ConvSpec& cs = cfg.convs[l];
    const std::string name = "conv" + std::to_string(l + 1);
    const int64_t nt = ext(t, cs.kernel[0], cs.stride[0], cs.pad[0]);
    const int64_t nh = ext(h, cs.kernel[1], cs.stride[1], cs.pad[1]);
    const int64_t nw = ext(w, cs.kernel[2], cs.stride[2], cs.pad[2]);
    if (nt < 1 || nh < 1 || nw < 1) {
      throw ConfigError("model: " + name + " collapses (" +
                        std::to_string(t) + "," + std::to_string(h) + "," +
                        std::to_string(w) + ") to an empty output");
    }
    const int64_t kvol = int64_t{cs.kernel[0]} * cs.kernel[1] * cs.kernel[2];
    plan.push_back({name, Shape{1, cs.out_c, nt, nh, nw},
                    cs.out_c * ch * kvol + cs.out_c});
    ch = cs.out_c;
    t = nt;
    h = nh;
    w = nw;
    if (pool_i < cfg.pool_after.size() &&
        cfg.pool_after[pool_i] == static_cast<int>(l + 1)) {
      const std::string pname = "pool" + std::to_string(pool_i + 1);
      const int64_t pt = ext(t, cfg.pool_kernel[0], cfg.pool_stride[0], 0);
      const int64_t ph = ext(h, cfg.pool_kernel[1], cfg.pool_stride[1], 0);
      const int64_t pw = ext(w, cfg.pool_kernel[2], cfg.pool_stride[2], 0);
      if (pt < 1 || ph < 1 || pw < 1) {
        throw ConfigError("model: " + pname + " collapses (" +
                          std::to_string(t) + "," + std::to_string(h) + "," +
                          std::to_string(w) + ") to an empty output");
      }
      plan.push_back({pname, Shape{1, ch, pt, ph, pw}, 0});
      t = pt;
      h = ph;
      w = pw;
      ++pool_i;
    }
  }
  const int64_t flat = ch * t * h * w;
  plan.push_back({"flatten", Shape{1, flat}, 0});

  auto fc_params = [](int64_t k, int64_t d, int64_t rank) {
    return rank > 0 ? rank * d + k * rank + k : k * d + k;
  };
  if (cfg.fc1_rank > std::min(cfg.fc1_dim, flat) ||
      cfg.fc2_rank > std::min(cfg.fc2_dim, cfg.fc1_dim)) {
    throw ConfigError("model: fc rank exceeds matrix dimensions");
  }
  plan.push_back({"fc1", Shape{1, cfg.fc1_dim},
                  fc_params(cfg.fc1_dim, flat, cfg.fc1_rank)});
  plan.push_back({"fc2", Shape{1, cfg.fc2_dim},
                  fc_params(cfg.fc2_dim, cfg.fc1_dim, cfg.fc2_rank)});
  plan.push_back({"head_loc", Shape{1, 2}, 2 * cfg.fc2_dim + 2});
  plan.push_back({"head_class", Shape{1, cfg.num_classes()},
                  cfg.num_classes() * cfg.fc2_dim + cfg.num_classes()});
  plan.push_back({"head_h1", Shape{1, cfg.num_h1},
                  cfg.num_h1 * cfg.fc1_dim + cfg.num_h1});
  plan.push_back({"head_h2", Shape{1, cfg.num_h2},
                  cfg.num_h2 * cfg.fc2_dim + cfg.num_h2});
  return plan;
}

// ---------------------------------------------------------------------------
// Allocation

namespace {
int64_t flatten_dim(const std::vector<LayerInfo>& plan) {
  for (const LayerInfo& li : plan) {
    if (li.name == "flatten") return li.output[1];
  }
  throw ConfigError("model: plan lacks flatten stage");
}
}  // namespace

void Model::allocate(uint64_t seed, bool init) {
  const std::vector<LayerInfo> plan = plan_layers(cfg_);
  const int64_t flat = flatten_dim(plan);

  auto make = [&](const std::string& name, const Shape& shape, int64_t fan_in,
                  int64_t fan_out, bool weight) {
    ParamTensor p;
    p.name = name;
    p.value = (init && weight)
                  ? glorot_uniform(shape, fan_in, fan_out, param_seed(seed, name))
                  : Tensor::zeros(shape);
    p.grad = Tensor::zeros(shape);
    p.velocity = Tensor::zeros(shape);
    return p;
  };
  auto make_fc_block = [&](const std::string& name, int64_t k, int64_t d,
                           int64_t rank) {
    FcBlock blk;
    if (rank <= 0) {
      FcStage s;
      s.w = make(name + "/weight", Shape{k, d}, d, k, true);
      s.b = make(name + "/bias", Shape{k}, 1, 1, false);
      s.has_bias = true;
      blk.stages.push_back(std::move(s));
    } else {
      FcStage down;
      down.w = make(name + "/down/weight", Shape{rank, d}, d, rank, true);
      down.has_bias = false;
      FcStage up;
      up.w = make(name + "/up/weight", Shape{k, rank}, rank, k, true);
      up.b = make(name + "/up/bias", Shape{k}, 1, 1, false);
      up.has_bias = true;
      blk.stages.push_back(std::move(down));
      blk.stages.push_back(std::move(up));
    }
    return blk;
  };
  auto make_head = [&](const std::string& name, int64_t k, int64_t d) {
    FcStage s;
    s.w = make(name + "/weight", Shape{k, d}, d, k, true);
    s.b = make(name + "/bias", Shape{k}, 1, 1, false);
    s.has_bias = true;
    return s;
  };

  conv_w_.clear();
  conv_b_.clear();
  int64_t in_c = cfg_.input_c;
  for (size_t l = 0; l < cfg_.convs.size(); ++l) {
    const ConvSpec& cs = cfg_.convs[l];
    const std::string name = "conv" + std::to_string(l + 1);
    const int64_t kvol = int64_t{cs.kernel[0]} * cs.kernel[1] * cs.kernel[2];
    conv_w_.push_back(make(name + "/weight",
                           Shape{cs.out_c, in_c, cs.kernel[0], cs.kernel[1],
                                 cs.kernel[2]},
                           in_c * kvol, cs.out_c * kvol, true));
    conv_b_.push_back(make(name + "/bias", Shape{cs.out_c}, 1, 1, false));
    in_c = cs.out_c;
  }
  fc1_ = make_fc_block("fc1", cfg_.fc1_dim, flat, cfg_.fc1_rank);
  fc2_ = make_fc_block("fc2", cfg_.fc2_dim, cfg_.fc1_dim, cfg_.fc2_rank);
  head_loc_ = make_head("head_loc", 2, cfg_.fc2_dim);
  head_class_ = make_head("head_class", cfg_.num_classes(), cfg_.fc2_dim);
  head_h1_ = make_head("head_h1", cfg_.num_h1, cfg_.fc1_dim);
  head_h2_ = make_head("head_h2", cfg_.num_h2, cfg_.fc2_dim);
}

Model Model::build(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;
  m.allocate(seed, true);
  return m;
}

std::vector<Model::Param> Model::parameters() {
  std::vector<Param> out;
  auto push = [&out](ParamTensor& p) {
    out.push_back({p.name, &p.value, &p.grad, &p.velocity});
  };
  for (size_t l = 0; l < conv_w_.size(); ++l) {
    push(conv_w_[l]);
    push(conv_b_[l]);
  }
  auto push_block = [&](FcBlock& blk) {
    for (FcStage& s : blk.stages) {
      push(s.w);
      if (s.has_bias) push(s.b);
    }
  };
  push_block(fc1_);
  push_block(fc2_);
  auto push_head = [&](FcStage& s) {
    push(s.w);
    push(s.b);
  };
  push_head(head_loc_);
  push_head(head_class_);
  push_head(head_h1_);
  push_head(head_h2_);
  return out;
}

void Model::zero_grads() {
  for (Param& p : parameters()) {
    std::fill(p.grad->data(), p.grad->data() + p.grad->size(), 0.0f);
  }
}

void Model::sgd_step(double lr, double momentum) {
  for (Param& p : parameters()) {
    sgd_update(*p.value, *p.velocity, *p.grad, lr, momentum);
    std::fill(p.grad->data(), p.grad->data() + p.grad->size(), 0.0f);
  }
}

// ---------------------------------------------------------------------------
// Forward

struct Model::Trace {
  std::vector<Tensor> conv_in, conv_pre, conv_act;
  std::vector<Pool3dResult> pools;
  std::vector<int> pool_slot;  // per conv layer, -1 when not pooled
  Shape stack_out_shape{1};
  Tensor flat;
  std::vector<Tensor> fc1_ins, fc2_ins;
  Tensor fc1_pre, fc1_act, fc2_pre, fc2_act;
  Tensor class_logits;
  HeadOutputs heads;
};

Tensor Model::fc_block_forward(const FcBlock& blk, const Tensor& x,
                               std::vector<Tensor>* ins) {
  Tensor cur = x;
  for (const FcStage& s : blk.stages) {
    if (ins) ins->push_back(cur);
    if (s.has_bias) {
      cur = fc_forward(cur, s.w.value, s.b.value);
    } else {
      cur = fc_forward(cur, s.w.value,
                       Tensor::zeros(Shape{s.w.value.shape()[0]}));
    }
  }
  return cur;
}

void Model::forward_trace(const Tensor& batch, Trace* tr) const {
  if (batch.rank() != 5) {
    throw ShapeError("model forward: batch must be (N,C,T,H,W), got " +
                     batch.shape().str());
  }
  const Shape expect{batch.shape()[0], cfg_.input_c, cfg_.input_t,
                     cfg_.input_h, cfg_.input_w};
  if (batch.shape() != expect) {
    throw ShapeError("model forward: batch " + batch.shape().str() +
                     " does not match configured input " + expect.str());
  }
  if (!batch.all_finite()) {
    throw NumericError("model forward: non-finite values in input batch");
  }
  const int64_t N = batch.shape()[0];

  Tensor x = batch;
  size_t pool_i = 0;
  tr->pool_slot.assign(cfg_.convs.size(), -1);
  for (size_t l = 0; l < cfg_.convs.size(); ++l) {
    const ConvSpec& cs = cfg_.convs[l];
    tr->conv_in.push_back(x);
    Tensor pre = conv3d_forward(x, conv_w_[l].value, conv_b_[l].value,
                                cs.stride, cs.pad);
    Tensor act = relu_forward(pre);
    tr->conv_pre.push_back(std::move(pre));
    if (pool_i < cfg_.pool_after.size() &&
        cfg_.pool_after[pool_i] == static_cast<int>(l + 1)) {
      Pool3dResult pr = maxpool3d_forward(act, cfg_.pool_kernel,
                                          cfg_.pool_stride);
      x = pr.output;
      tr->pool_slot[l] = static_cast<int>(tr->pools.size());
      tr->pools.push_back(std::move(pr));
      ++pool_i;
    } else {
      x = act;
    }
    tr->conv_act.push_back(std::move(act));
  }
  tr->stack_out_shape = x.shape();
  tr->flat = reshape(x, Shape{N, x.size() / N});

  tr->fc1_pre = fc_block_forward(fc1_, tr->flat, &tr->fc1_ins);
  tr->fc1_act = relu_forward(tr->fc1_pre);
  tr->fc2_pre = fc_block_forward(fc2_, tr->fc1_act, &tr->fc2_ins);
  tr->fc2_act = relu_forward(tr->fc2_pre);

  tr->heads.loc = fc_forward(tr->fc2_act, head_loc_.w.value, head_loc_.b.value);
  tr->class_logits =
      fc_forward(tr->fc2_act, head_class_.w.value, head_class_.b.value);
  tr->heads.class_probs = softmax(tr->class_logits);
  tr->heads.h1_probs = sigmoid(
      fc_forward(tr->fc1_act, head_h1_.w.value, head_h1_.b.value));
  tr->heads.h2_probs = sigmoid(
      fc_forward(tr->fc2_act, head_h2_.w.value, head_h2_.b.value));
}

HeadOutputs Model::forward(const Tensor& batch) const {
  Trace tr;
  forward_trace(batch, &tr);
  return tr.heads;
}

Tensor Model::layer_output(const Tensor& batch,
                           const std::string& layer) const {
  Trace tr;
  forward_trace(batch, &tr);
  for (size_t l = 0; l < cfg_.convs.size(); ++l) {
    if (layer == "conv" + std::to_string(l + 1)) return tr.conv_act[l];
    const int slot = tr.pool_slot[l];
    if (slot >= 0 && layer == "pool" + std::to_string(slot + 1)) {
      return tr.pools[static_cast<size_t>(slot)].output;
    }
  }
  if (layer == "fc1") return tr.fc1_act;
  if (layer == "fc2") return tr.fc2_act;

  std::string names;
  for (size_t l = 0; l < cfg_.convs.size(); ++l) {
    names += "conv" + std::to_string(l + 1) + ", ";
    const int slot = tr.pool_slot[l];
    if (slot >= 0) names += "pool" + std::to_string(slot + 1) + ", ";
  }
  names += "fc1, fc2";
  throw ArgumentError("unknown layer '" + layer + "'; valid layers: " + names);
}

void Model::check_targets(int64_t n, const Targets& t) const {
  if (static_cast<int64_t>(t.category.size()) != n) {
    throw ShapeError("targets: " + std::to_string(t.category.size()) +
                     " categories for batch of " + std::to_string(n));
  }
  if (t.h1.shape() != Shape{n, cfg_.num_h1}) {
    throw ShapeError("targets: h1 must be (" + std::to_string(n) + ", " +
                     std::to_string(cfg_.num_h1) + "), got " +
                     t.h1.shape().str());
  }
  if (t.h2.shape() != Shape{n, cfg_.num_h2}) {
    throw ShapeError("targets: h2 must be (" + std::to_string(n) + ", " +
                     std::to_string(cfg_.num_h2) + "), got " +
                     t.h2.shape().str());
  }
  if (t.loc.shape() != Shape{n, 2}) {
    throw ShapeError("targets: loc must be (" + std::to_string(n) +
                     ", 2), got " + t.loc.shape().str());
  }
}

LossBreakdown Model::losses_from_trace(const Trace& tr, const Targets& targets,
                                       Tensor* gclass, Tensor* gh1,
                                       Tensor* gh2, Tensor* gloc) const {
  SoftmaxLossResult cat = softmax_cross_entropy(tr.class_logits,
                                                targets.category);
  LossResult h1 = multilabel_cross_entropy(tr.heads.h1_probs, targets.h1);
  LossResult h2 = multilabel_cross_entropy(tr.heads.h2_probs, targets.h2);
  LossResult loc = euclidean_loss(tr.heads.loc, targets.loc);

  LossBreakdown bd;
  bd.category = cat.value;
  bd.h1 = h1.value;
  bd.h2 = h2.value;
  bd.loc = loc.value;
  bd.total = cat.value + cfg_.lambda1 * h1.value + cfg_.lambda2 * h2.value +
             cfg_.beta * loc.value;
  if (!std::isfinite(bd.total)) {
    std::ostringstream msg;
    msg << "non-finite joint loss: category=" << bd.category
        << " h1=" << bd.h1 << " h2=" << bd.h2 << " loc=" << bd.loc;
    throw NumericError(msg.str());
  }
  if (gclass) *gclass = std::move(cat.grad);
  if (gh1) {
    *gh1 = sigmoid_backward(tr.heads.h1_probs, scaled(h1.grad, cfg_.lambda1));
  }
  if (gh2) {
    *gh2 = sigmoid_backward(tr.heads.h2_probs, scaled(h2.grad, cfg_.lambda2));
  }
  if (gloc) *gloc = scaled(loc.grad, cfg_.beta);
  return bd;
}

LossBreakdown Model::loss(const Tensor& batch, const Targets& targets) const {
  if (batch.rank() == 5) check_targets(batch.shape()[0], targets);
  Trace tr;
  forward_trace(batch, &tr);
  return losses_from_trace(tr, targets, nullptr, nullptr, nullptr, nullptr);
}

// ---------------------------------------------------------------------------
// Backward

namespace {
// Backward through an fc block; writes stage gradients and returns the
// gradient with respect to the block input.
Tensor fc_block_backward(Tensor g, const std::vector<Tensor>& ins,
                         const std::vector<std::pair<Tensor*, Tensor*>>& slots,
                         const std::vector<const Tensor*>& ws) {
  for (size_t s = ws.size(); s-- > 0;) {
    FcGrads fg = fc_backward(ins[s], *ws[s], g);
    *slots[s].first = std::move(fg.weights);
    if (slots[s].second) *slots[s].second = std::move(fg.bias);
    g = std::move(fg.input);
  }
  return g;
}
}  // namespace

LossBreakdown Model::compute_gradients(const Tensor& batch,
                                       const Targets& targets) {
  if (batch.rank() == 5) check_targets(batch.shape()[0], targets);
  Trace tr;
  forward_trace(batch, &tr);

  Tensor gclass, gh1, gh2, gloc;
  LossBreakdown bd = losses_from_trace(tr, targets, &gclass, &gh1, &gh2,
                                       &gloc);

  // Heads hanging off a2 = relu(fc2).
  FcGrads g_loc = fc_backward(tr.fc2_act, head_loc_.w.value, gloc);
  head_loc_.w.grad = std::move(g_loc.weights);
  head_loc_.b.grad = std::move(g_loc.bias);
  FcGrads g_cls = fc_backward(tr.fc2_act, head_class_.w.value, gclass);
  head_class_.w.grad = std::move(g_cls.weights);
  head_class_.b.grad = std::move(g_cls.bias);
  FcGrads g_h2 = fc_backward(tr.fc2_act, head_h2_.w.value, gh2);
  head_h2_.w.grad = std::move(g_h2.weights);
  head_h2_.b.grad = std::move(g_h2.bias);

  Tensor ga2 = add(add(g_loc.input, g_cls.input), g_h2.input);
  Tensor gpre2 = relu_backward(tr.fc2_pre, ga2);

  // fc2 block.
  {
    std::vector<std::pair<Tensor*, Tensor*>> slots;
    std::vector<const Tensor*> ws;
    for (FcStage& s : fc2_.stages) {
      slots.emplace_back(&s.w.grad, s.has_bias ? &s.b.grad : nullptr);
      ws.push_back(&s.w.value);
    }
    gpre2 = fc_block_backward(std::move(gpre2), tr.fc2_ins, slots, ws);
  }
  Tensor ga1_from_fc2 = std::move(gpre2);

  // h1 head hangs off a1 = relu(fc1).
  FcGrads g_h1 = fc_backward(tr.fc1_act, head_h1_.w.value, gh1);
  head_h1_.w.grad = std::move(g_h1.weights);
  head_h1_.b.grad = std::move(g_h1.bias);

  Tensor ga1 = add(ga1_from_fc2, g_h1.input);
  Tensor gpre1 = relu_backward(tr.fc1_pre, ga1);
  {
    std::vector<std::pair<Tensor*, Tensor*>> slots;
    std::vector<const Tensor*> ws;
    for (FcStage& s : fc1_.stages) {
      slots.emplace_back(&s.w.grad, s.has_bias ? &s.b.grad : nullptr);
      ws.push_back(&s.w.value);
    }
    gpre1 = fc_block_backward(std::move(gpre1), tr.fc1_ins, slots, ws);
  }

  // Back down the conv stack.
  Tensor gx = reshape(gpre1, tr.stack_out_shape);
  for (int l = static_cast<int>(cfg_.convs.size()) - 1; l >= 0; --l) {
    const size_t lu = static_cast<size_t>(l);
    if (tr.pool_slot[lu] >= 0) {
      const Pool3dResult& pr = tr.pools[static_cast<size_t>(tr.pool_slot[lu])];
      gx = maxpool3d_backward(tr.conv_act[lu].shape(), pr.argmax, gx);
    }
    Tensor gpre = relu_backward(tr.conv_pre[lu], gx);
    Conv3dGrads cg = conv3d_backward(tr.conv_in[lu], conv_w_[lu].value, gpre,
                                     cfg_.convs[lu].stride, cfg_.convs[lu].pad);
    conv_w_[lu].grad = std::move(cg.weights);
    conv_b_[lu].grad = std::move(cg.bias);
    gx = std::move(cg.input);
  }
  return bd;
}

LossBreakdown Model::train_step(const Tensor& batch, const Targets& targets,
                                double lr, double momentum) {
  LossBreakdown bd = compute_gradients(batch, targets);
  sgd_step(lr, momentum);
  return bd;
}

// ---------------------------------------------------------------------------
// Checkpoints

void Model::save_checkpoint(const std::string& path, int64_t iteration,
                            uint64_t seed) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path);
  io::write_u32(os, kCheckpointMagic);
  io::write_u32(os, kCheckpointVersion);
  const std::string cfg = cfg_.canonical_text();
  io::write_u32(os, static_cast<uint32_t>(cfg.size()));
  os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  io::write_u64(os, static_cast<uint64_t>(iteration));
  io::write_u64(os, seed);

  std::vector<Param> params = const_cast<Model*>(this)->parameters();
  io::write_u32(os, static_cast<uint32_t>(params.size() * 2));
  auto write_blob = [&os](const std::string& name, const Tensor& t) {
    io::write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor_blob(os, t);
  };
  for (const Param& p : params) {
    write_blob(p.name, *p.value);
    write_blob(p.name + "/v", *p.velocity);
  }
  os.flush();
  if (!os) throw IoError("write failed: " + path);
}

Model::Loaded Model::load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for read: " + path);
  if (io::read_u32(is, "checkpoint magic") != kCheckpointMagic) {
    throw FormatError("bad checkpoint magic in " + path);
  }
  const uint32_t version = io::read_u32(is, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  }
  const uint32_t cfg_len = io::read_u32(is, "checkpoint config size");
  if (cfg_len > (1u << 20)) {
    throw FormatError("checkpoint config block too large");
  }
  std::string cfg_text(cfg_len, '\0');
  if (!is.read(cfg_text.data(), cfg_len)) {
    throw FormatError("truncated checkpoint config in " + path);
  }

  Loaded out;
  out.iteration = static_cast<int64_t>(io::read_u64(is, "checkpoint iteration"));
  out.seed = io::read_u64(is, "checkpoint seed");

  out.model.cfg_ = ModelConfig::from_text(cfg_text);
  out.model.allocate(0, false);

  std::map<std::string, Tensor*> slots;
  for (Param& p : out.model.parameters()) {
    slots[p.name] = p.value;
    slots[p.name + "/v"] = p.velocity;
  }
  const uint32_t n_blobs = io::read_u32(is, "checkpoint blob count");
  if (n_blobs != slots.size()) {
    throw FormatError("checkpoint has " + std::to_string(n_blobs) +
                      " tensors, model needs " + std::to_string(slots.size()));
  }
  std::map<std::string, bool> seen;
  for (uint32_t i = 0; i < n_blobs; ++i) {
    const uint32_t name_len = io::read_u32(is, "checkpoint tensor name size");
    if (name_len > 4096) throw FormatError("checkpoint tensor name too long");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) {
      throw FormatError("truncated checkpoint tensor name");
    }
    auto it = slots.find(name);
    if (it == slots.end()) {
      throw FormatError("checkpoint tensor '" + name +
                        "' does not exist in this architecture");
    }
    if (seen[name]) {
      throw FormatError("duplicate checkpoint tensor '" + name + "'");
    }
    seen[name] = true;
    Tensor t = read_tensor_blob(is);
    if (t.shape() != it->second->shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " +
                        t.shape().str() + ", expected " +
                        it->second->shape().str());
    }
    *it->second = std::move(t);
  }
  is.peek();
  if (!is.eof()) {
    throw FormatError("trailing bytes after checkpoint payload: " + path);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVD and compression

SvdResult svd_jacobi(const Tensor& a, int max_sweeps) {
  if (a.rank() != 2) {
    throw ShapeError("svd_jacobi: expected a matrix, got " + a.shape().str());
  }
  const bool transposed = a.shape()[0] < a.shape()[1];
  const int64_t m = transposed ? a.shape()[1] : a.shape()[0];
  const int64_t n = transposed ? a.shape()[0] : a.shape()[1];

  // Work on the tall copy B (m x n), column-major buffers for locality.
  std::vector<std::vector<double>> col(static_cast<size_t>(n),
                                       std::vector<double>(static_cast<size_t>(m)));
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      col[static_cast<size_t>(j)][static_cast<size_t>(i)] =
          transposed ? a[j * m + i] : a[i * n + j];
    }
  }
  std::vector<std::vector<double>> vmat(static_cast<size_t>(n),
                                        std::vector<double>(static_cast<size_t>(n), 0.0));
  for (int64_t j = 0; j < n; ++j) vmat[static_cast<size_t>(j)][static_cast<size_t>(j)] = 1.0;

  const double tol = 1e-13;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int64_t p = 0; p < n - 1; ++p) {
      for (int64_t q = p + 1; q < n; ++q) {
        auto& cp = col[static_cast<size_t>(p)];
        auto& cq = col[static_cast<size_t>(q)];
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int64_t i = 0; i < m; ++i) {
          app += cp[static_cast<size_t>(i)] * cp[static_cast<size_t>(i)];
          aqq += cq[static_cast<size_t>(i)] * cq[static_cast<size_t>(i)];
          apq += cp[static_cast<size_t>(i)] * cq[static_cast<size_t>(i)];
        }
        if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) {
          continue;
        }
        rotated = true;
        const double theta = 0.5 * std::atan2(2.0 * apq, app - aqq);
        const double c = std::cos(theta), s = std::sin(theta);
        for (int64_t i = 0; i < m; ++i) {
          const double x = cp[static_cast<size_t>(i)];
          const double y = cq[static_cast<size_t>(i)];
          cp[static_cast<size_t>(i)] = c * x + s * y;
          cq[static_cast<size_t>(i)] = -s * x + c * y;
        }
        auto& vp = vmat[static_cast<size_t>(p)];
        auto& vq = vmat[static_cast<size_t>(q)];
        for (int64_t i = 0; i < n; ++i) {
          const double x = vp[static_cast<size_t>(i)];
          const double y = vq[static_cast<size_t>(i)];
          vp[static_cast<size_t>(i)] = c * x + s * y;
          vq[static_cast<size_t>(i)] = -s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }

  // Singular values and ordering.
  std::vector<double> sigma(static_cast<size_t>(n));
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t j = 0; j < n; ++j) {
    double s2 = 0.0;
    for (int64_t i = 0; i < m; ++i) {
      s2 += col[static_cast<size_t>(j)][static_cast<size_t>(i)] *
            col[static_cast<size_t>(j)][static_cast<size_t>(i)];
    }
    sigma[static_cast<size_t>(j)] = std::sqrt(s2);
    order[static_cast<size_t>(j)] = j;
  }
  std::stable_sort(order.begin(), order.end(), [&sigma](int64_t x, int64_t y) {
    return sigma[static_cast<size_t>(x)] > sigma[static_cast<size_t>(y)];
  });

  Tensor u_tall(Shape{m, n});
  Tensor s_out(Shape{n});
  Tensor v_tall(Shape{n, n});
  for (int64_t jj = 0; jj < n; ++jj) {
    const int64_t j = order[static_cast<size_t>(jj)];
    const double sv = sigma[static_cast<size_t>(j)];
    s_out[jj] = static_cast<float>(sv);
    const double inv = sv > 0.0 ? 1.0 / sv : 0.0;
    for (int64_t i = 0; i < m; ++i) {
      u_tall[i * n + jj] = static_cast<float>(
          col[static_cast<size_t>(j)][static_cast<size_t>(i)] * inv);
    }
    for (int64_t i = 0; i < n; ++i) {
      v_tall[i * n + jj] = static_cast<float>(
          vmat[static_cast<size_t>(j)][static_cast<size_t>(i)]);
    }
  }

  SvdResult res;
  if (transposed) {  // A = (B^T): A = V_tall S U_tall^T
    res.u = std::move(v_tall);
    res.v = std::move(u_tall);
  } else {
    res.u = std::move(u_tall);
    res.v = std::move(v_tall);
  }
  res.s = std::move(s_out);
  return res;
}

void Model::compress_fc(int64_t fc1_rank, int64_t fc2_rank) {
  auto compress_block = [](FcBlock& blk, const std::string& name,
                           int64_t rank, int64_t k, int64_t d) {
    if (rank <= 0) return;
    if (blk.stages.size() != 1) {
      throw ArgumentError("compress_fc: " + name + " is already factored");
    }
    if (rank > std::min(k, d)) {
      throw ArgumentError("compress_fc: rank " + std::to_string(rank) +
                          " exceeds min(" + std::to_string(k) + ", " +
                          std::to_string(d) + ") for " + name);
    }
    SvdResult svd = svd_jacobi(blk.stages[0].w.value);
    // W ~= U_r S_r V_r^T; down = S_r V_r^T (r x d), up = U_r (k x r).
    FcStage down;
    down.has_bias = false;
    down.w.name = name + "/down/weight";
    down.w.value = Tensor(Shape{rank, d});
    for (int64_t r = 0; r < rank; ++r) {
      const double sv = svd.s[r];
      for (int64_t j = 0; j < d; ++j) {
        down.w.value[r * d + j] = static_cast<float>(sv * svd.v[j * svd.s.shape()[0] + r]);
      }
    }
    down.w.grad = Tensor::zeros(down.w.value.shape());
    down.w.velocity = Tensor::zeros(down.w.value.shape());

    FcStage up;
    up.has_bias = true;
    up.w.name = name + "/up/weight";
    up.w.value = Tensor(Shape{k, rank});
    for (int64_t i = 0; i < k; ++i) {
      for (int64_t r = 0; r < rank; ++r) {
        up.w.value[i * rank + r] = svd.u[i * svd.s.shape()[0] + r];
      }
    }
    up.w.grad = Tensor::zeros(up.w.value.shape());
    up.w.velocity = Tensor::zeros(up.w.value.shape());
    up.b.name = name + "/up/bias";
    up.b.value = blk.stages[0].b.value;
    up.b.grad = Tensor::zeros(up.b.value.shape());
    up.b.velocity = Tensor::zeros(up.b.value.shape());

    blk.stages.clear();
    blk.stages.push_back(std::move(down));
    blk.stages.push_back(std::move(up));
  };

  const int64_t flat = flatten_dim(plan_layers(cfg_));
  compress_block(fc1_, "fc1", fc1_rank, cfg_.fc1_dim, flat);
  if (fc1_rank > 0) cfg_.fc1_rank = fc1_rank;
  compress_block(fc2_, "fc2", fc2_rank, cfg_.fc2_dim, cfg_.fc1_dim);
  if (fc2_rank > 0) cfg_.fc2_rank = fc2_rank;
}

void Model::reset_class_head(int64_t num_categories, bool include_background,
                             uint64_t seed) {
  if (num_categories < 1) {
    throw ArgumentError("reset_class_head: need at least one category");
  }
  cfg_.num_categories = num_categories;
  cfg_.include_background = include_background;
  cfg_.validate();
  const int64_t k = cfg_.num_classes();
  head_class_.w.name = "head_class/weight";
  head_class_.w.value = glorot_uniform(Shape{k, cfg_.fc2_dim}, cfg_.fc2_dim, k,
                                       param_seed(seed, "head_class/weight"));
  head_class_.w.grad = Tensor::zeros(Shape{k, cfg_.fc2_dim});
  head_class_.w.velocity = Tensor::zeros(Shape{k, cfg_.fc2_dim});
  head_class_.b.name = "head_class/bias";
  head_class_.b.value = Tensor::zeros(Shape{k});
  head_class_.b.grad = Tensor::zeros(Shape{k});
  head_class_.b.velocity = Tensor::zeros(Shape{k});
}

}  // namespace vap
