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

#include "vap/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "vap/errors.hpp"
#include "vap/layers.hpp"
#include "vap/model.hpp"
#include "vap/rng.hpp"
#include "vap/tensor.hpp"

namespace vap {
namespace {

// Probe sizes.  Linear layers have no truncation term, so a generous probe
// drowns float32 forward rounding; smooth losses get a smaller probe to
// keep the O(eps^2) truncation below the layer tolerance.
constexpr double kLinearEps = 3e-2;
constexpr double kLossEps = 5e-3;

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return s;
}

// Relative to the larger of the two values, floored at a fraction of the
// gradient tensor's own scale: float32 forwards put ~1e-5 of absolute
// noise into a central difference, so near-zero elements of an otherwise
// O(1) gradient cannot meet a pure elementwise relative bound.  A wrong
// backward perturbs elements at the tensor's scale and still trips this.
double rel_err(double analytic, double numeric, double tensor_scale) {
  const double scale = std::max(
      {std::abs(analytic), std::abs(numeric), 0.02 * tensor_scale, 1e-3});
  return std::abs(analytic - numeric) / scale;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(t[i])));
  }
  return m;
}

// The perturb test hook multiplies the analytic side by this factor; 1.0
// in normal operation.  Plumbing it through the comparison (instead of
// inflating the reported number afterwards) keeps the hook honest: the
// real comparison must notice the skewed backward.
thread_local double g_analytic_scale = 1.0;

// Max elementwise relative error between an analytic gradient tensor and
// central differences of `objective` under perturbation of `x`.
double check_tensor_grad(Tensor& x, const Tensor& analytic,
                         const std::function<double()>& objective,
                         double eps) {
  const double tensor_scale = max_abs(analytic);
  double worst = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) {
    const float saved = x[i];
    x[i] = static_cast<float>(static_cast<double>(saved) + eps);
    const double plus = objective();
    x[i] = static_cast<float>(static_cast<double>(saved) - eps);
    const double minus = objective();
    x[i] = saved;
    const double numeric = (plus - minus) / (2.0 * eps);
    worst = std::max(
        worst, rel_err(g_analytic_scale * static_cast<double>(analytic[i]),
                       numeric, tensor_scale));
  }
  return worst;
}

Tensor signed_away_from_zero(const Shape& shape, double lo, double hi,
                             Rng& rng) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) {
    const double mag = rng.uniform(lo, hi);
    t[i] = static_cast<float>(rng.bernoulli(0.5) ? mag : -mag);
  }
  return t;
}

struct Check {
  const char* name;
  double tol_kind;  // 0 = layer tolerance, 1 = model tolerance
  std::function<double(Rng&)> run;  // returns max relative error
};

double conv_check(Rng& rng, int which) {
  const int64_t n = 1 + static_cast<int64_t>(rng.uniform_int(2));
  const int64_t c = 1 + static_cast<int64_t>(rng.uniform_int(3));
  const int64_t o = 1 + static_cast<int64_t>(rng.uniform_int(3));
  const int64_t t = 3 + static_cast<int64_t>(rng.uniform_int(3));
  const int64_t h = 3 + static_cast<int64_t>(rng.uniform_int(3));
  const int64_t w = 3 + static_cast<int64_t>(rng.uniform_int(3));
  const Triple stride{1, 1, static_cast<int>(1 + rng.uniform_int(2))};
  const Triple pad{1, 1, 1};

  Tensor input = signed_away_from_zero(Shape{n, c, t, h, w}, 0.1, 1.0, rng);
  Tensor weights =
      signed_away_from_zero(Shape{o, c, 3, 3, 3}, 0.05, 0.5, rng);
  Tensor bias = signed_away_from_zero(Shape{o}, 0.05, 0.3, rng);

  const Tensor out0 = conv3d_forward(input, weights, bias, stride, pad);
  const Tensor r = Tensor::random_uniform(out0.shape(), -1.0f, 1.0f,
                                          rng.next_u64());
  auto objective = [&]() {
    return dot(conv3d_forward(input, weights, bias, stride, pad), r);
  };
  const Conv3dGrads g = conv3d_backward(input, weights, r, stride, pad);
  switch (which) {
    case 0:
      return check_tensor_grad(input, g.input, objective, kLinearEps);
    case 1:
      return check_tensor_grad(weights, g.weights, objective, kLinearEps);
    default:
      return check_tensor_grad(bias, g.bias, objective, kLinearEps);
  }
}

double pool_check(Rng& rng) {
  const int64_t n = 1 + static_cast<int64_t>(rng.uniform_int(2));
  const int64_t c = 1 + static_cast<int64_t>(rng.uniform_int(2));
  const int64_t t = 4, h = 6, w = 6;
  // One clear winner per 2x2x2 window: base texture well below a spike
  // placed at a random in-window position.  Margin 0.5 dwarfs the probe.
  Tensor input(Shape{n, c, t, h, w});
  for (int64_t i = 0; i < input.size(); ++i) {
    input[i] = static_cast<float>(rng.uniform(0.0, 0.2));
  }
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t ic = 0; ic < c; ++ic) {
      for (int64_t bt = 0; bt < t; bt += 2) {
        for (int64_t bh = 0; bh < h; bh += 2) {
          for (int64_t bw = 0; bw < w; bw += 2) {
            const int64_t dt = static_cast<int64_t>(rng.uniform_int(2));
            const int64_t dh = static_cast<int64_t>(rng.uniform_int(2));
            const int64_t dw = static_cast<int64_t>(rng.uniform_int(2));
            input.at({in, ic, bt + dt, bh + dh, bw + dw}) =
                static_cast<float>(rng.uniform(0.8, 1.0));
          }
        }
      }
    }
  }
  const Triple k{2, 2, 2};
  const Pool3dResult fwd = maxpool3d_forward(input, k, k);
  const Tensor r = Tensor::random_uniform(fwd.output.shape(), -1.0f, 1.0f,
                                          rng.next_u64());
  auto objective = [&]() { return dot(maxpool3d_forward(input, k, k).output, r); };
  const Tensor g = maxpool3d_backward(input.shape(), fwd.argmax, r);
  return check_tensor_grad(input, g, objective, kLinearEps);
}

double relu_check(Rng& rng) {
  const int64_t n = 2 + static_cast<int64_t>(rng.uniform_int(30));
  // Magnitudes at least 0.2, so no element changes sign within the probe.
  Tensor input = signed_away_from_zero(Shape{n}, 0.2, 1.0, rng);
  const Tensor r = Tensor::random_uniform(Shape{n}, -1.0f, 1.0f,
                                          rng.next_u64());
  auto objective = [&]() { return dot(relu_forward(input), r); };
  const Tensor g = relu_backward(input, r);
  return check_tensor_grad(input, g, objective, kLinearEps);
}

double fc_check(Rng& rng, int which) {
  const int64_t n = 2 + static_cast<int64_t>(rng.uniform_int(2));
  const int64_t d = 4 + static_cast<int64_t>(rng.uniform_int(8));
  const int64_t k = 3 + static_cast<int64_t>(rng.uniform_int(5));
  Tensor input = signed_away_from_zero(Shape{n, d}, 0.1, 1.0, rng);
  Tensor weights = signed_away_from_zero(Shape{k, d}, 0.05, 0.5, rng);
  Tensor bias = signed_away_from_zero(Shape{k}, 0.05, 0.3, rng);
  const Tensor r = Tensor::random_uniform(Shape{n, k}, -1.0f, 1.0f,
                                          rng.next_u64());
  auto objective = [&]() { return dot(fc_forward(input, weights, bias), r); };
  const FcGrads g = fc_backward(input, weights, r);
  switch (which) {
    case 0:
      return check_tensor_grad(input, g.input, objective, kLinearEps);
    case 1:
      return check_tensor_grad(weights, g.weights, objective, kLinearEps);
    default:
      return check_tensor_grad(bias, g.bias, objective, kLinearEps);
  }
}

double softmax_ce_check(Rng& rng) {
  const int64_t n = 2 + static_cast<int64_t>(rng.uniform_int(3));
  const int64_t k = 3 + static_cast<int64_t>(rng.uniform_int(4));
  Tensor logits = Tensor::random_uniform(Shape{n, k}, -2.0f, 2.0f,
                                         rng.next_u64());
  std::vector<int> labels;
  for (int64_t i = 0; i < n; ++i) {
    labels.push_back(static_cast<int>(rng.uniform_int(k)));
  }
  auto objective = [&]() {
    return softmax_cross_entropy(logits, labels).value;
  };
  const SoftmaxLossResult res = softmax_cross_entropy(logits, labels);
  return check_tensor_grad(logits, res.grad, objective, kLossEps);
}

double multilabel_check(Rng& rng) {
  // Probe the sigmoid + binary-cross-entropy composite on pre-activations
  // away from saturation.
  const int64_t n = 2 + static_cast<int64_t>(rng.uniform_int(3));
  const int64_t k = 4 + static_cast<int64_t>(rng.uniform_int(6));
  Tensor z = Tensor::random_uniform(Shape{n, k}, -2.0f, 2.0f, rng.next_u64());
  Tensor targets(Shape{n, k});
  for (int64_t i = 0; i < targets.size(); ++i) {
    targets[i] = rng.bernoulli(0.5) ? 1.0f : 0.0f;
  }
  auto objective = [&]() {
    return multilabel_cross_entropy(sigmoid(z), targets).value;
  };
  const Tensor probs = sigmoid(z);
  const LossResult loss = multilabel_cross_entropy(probs, targets);
  const Tensor g = sigmoid_backward(probs, loss.grad);
  return check_tensor_grad(z, g, objective, kLossEps);
}

double euclidean_check(Rng& rng) {
  const int64_t n = 2 + static_cast<int64_t>(rng.uniform_int(3));
  Tensor pred = Tensor::random_uniform(Shape{n, 2}, -1.0f, 1.0f,
                                       rng.next_u64());
  const Tensor target = Tensor::random_uniform(Shape{n, 2}, -1.0f, 1.0f,
                                               rng.next_u64());
  auto objective = [&]() { return euclidean_loss(pred, target).value; };
  const LossResult loss = euclidean_loss(pred, target);
  return check_tensor_grad(pred, loss.grad, objective, kLossEps);
}

Targets random_targets(int64_t n, const ModelConfig& cfg, Rng& rng) {
  Targets t;
  for (int64_t i = 0; i < n; ++i) {
    t.category.push_back(static_cast<int>(rng.uniform_int(cfg.num_classes())));
  }
  t.h1 = Tensor(Shape{n, cfg.num_h1});
  for (int64_t i = 0; i < t.h1.size(); ++i) {
    t.h1[i] = rng.bernoulli(0.5) ? 1.0f : 0.0f;
  }
  t.h2 = Tensor(Shape{n, cfg.num_h2});
  for (int64_t i = 0; i < t.h2.size(); ++i) {
    t.h2[i] = rng.bernoulli(0.5) ? 1.0f : 0.0f;
  }
  t.loc = Tensor(Shape{n, 2});
  for (int64_t i = 0; i < t.loc.size(); ++i) {
    t.loc[i] = static_cast<float>(rng.uniform(-0.3, 0.3));
  }
  return t;
}

// Joint-loss gradient audit over a random sample of parameter elements.
// `pooled` toggles between the two engineered operating points described
// in the header comment.
double model_check(Rng& rng, bool pooled) {
  ModelConfig cfg = ModelConfig::tiny(3);
  cfg.pool_after = pooled ? std::vector<int>{1} : std::vector<int>{};
  Model model = Model::build(cfg, rng.next_u64());
  const int64_t n = 2;
  Tensor batch(Shape{n, cfg.input_c, cfg.input_t, cfg.input_h, cfg.input_w});
  const double eps = pooled ? 2e-2 : 3e-2;

  if (pooled) {
    // One spike per pool window keeps every argmax stable under the probe.
    for (int64_t i = 0; i < batch.size(); ++i) {
      batch[i] = static_cast<float>(0.05 + rng.uniform(0.0, 0.01));
    }
    const Shape& s = batch.shape();
    for (int64_t in = 0; in < s[0]; ++in) {
      for (int64_t c = 0; c < s[1]; ++c) {
        for (int64_t t = 1; t < s[2]; t += 2) {
          for (int64_t h = 1; h < s[3]; h += 2) {
            for (int64_t w = 1; w < s[4]; w += 2) {
              batch.at({in, c, t, h, w}) += 0.5f;
            }
          }
        }
      }
    }
  } else {
    batch = Tensor::random_uniform(batch.shape(), 0.1f, 1.0f, rng.next_u64());
  }

  // Positive weights and biases keep every relu strictly on; the pooled
  // point additionally needs near-identity convs so the spikes survive to
  // the pool with their margin.
  for (auto& p : model.parameters()) {
    const bool is_conv = p.name.rfind("conv", 0) == 0;
    const bool is_fc = p.name.rfind("fc", 0) == 0;
    if (!is_conv && !is_fc) continue;
    const bool bias = p.name.find("bias") != std::string::npos;
    for (int64_t i = 0; i < p.value->size(); ++i) {
      const float v = (*p.value)[i];
      if (bias) {
        (*p.value)[i] = pooled ? 0.3f : 0.4f;
      } else if (is_conv) {
        (*p.value)[i] = static_cast<float>(std::fabs(v) *
                                           (pooled ? 0.004 : 0.05) +
                                           (pooled ? 0.0004 : 0.005));
      } else {
        (*p.value)[i] = static_cast<float>(std::fabs(v) *
                                           (pooled ? 0.01 : 0.004) +
                                           (pooled ? 0.001 : 0.0004));
      }
    }
    if (pooled && is_conv && !bias) {
      const Shape& sh = p.value->shape();
      for (int64_t o = 0; o < sh[0]; ++o) {
        for (int64_t i = 0; i < sh[1]; ++i) {
          p.value->at({o, i, 1, 1, 1}) = 0.35f;
        }
      }
    }
  }

  const Targets targets = random_targets(n, cfg, rng);
  model.compute_gradients(batch, targets);

  double worst = 0.0;
  auto params = model.parameters();
  for (auto& p : params) {
    // ~40 probed elements per tensor, spread deterministically.
    const int64_t total = p.value->size();
    const int64_t step = std::max<int64_t>(1, total / 40);
    const int64_t offset = static_cast<int64_t>(rng.uniform_int(step));
    const double tensor_scale = max_abs(*p.grad);
    for (int64_t i = offset; i < total; i += step) {
      const float saved = (*p.value)[i];
      (*p.value)[i] = static_cast<float>(static_cast<double>(saved) + eps);
      const double plus = model.loss(batch, targets).total;
      (*p.value)[i] = static_cast<float>(static_cast<double>(saved) - eps);
      const double minus = model.loss(batch, targets).total;
      (*p.value)[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      worst = std::max(
          worst, rel_err(g_analytic_scale * static_cast<double>((*p.grad)[i]),
                         numeric, tensor_scale));
    }
  }
  return worst;
}

std::vector<Check> all_checks() {
  std::vector<Check> checks;
  checks.push_back({"conv3d/input", 0, [](Rng& r) { return conv_check(r, 0); }});
  checks.push_back(
      {"conv3d/weights", 0, [](Rng& r) { return conv_check(r, 1); }});
  checks.push_back({"conv3d/bias", 0, [](Rng& r) { return conv_check(r, 2); }});
  checks.push_back({"maxpool3d/input", 0, &pool_check});
  checks.push_back({"relu/input", 0, &relu_check});
  checks.push_back({"fc/input", 0, [](Rng& r) { return fc_check(r, 0); }});
  checks.push_back({"fc/weights", 0, [](Rng& r) { return fc_check(r, 1); }});
  checks.push_back({"fc/bias", 0, [](Rng& r) { return fc_check(r, 2); }});
  checks.push_back({"softmax_ce/logits", 0, &softmax_ce_check});
  checks.push_back({"multilabel_ce/logits", 0, &multilabel_check});
  checks.push_back({"euclidean/pred", 0, &euclidean_check});
  checks.push_back(
      {"model/smooth", 1, [](Rng& r) { return model_check(r, false); }});
  checks.push_back(
      {"model/pooled", 1, [](Rng& r) { return model_check(r, true); }});
  return checks;
}

}  // namespace

std::vector<std::string> gradcheck_names() {
  std::vector<std::string> names;
  for (const Check& c : all_checks()) names.emplace_back(c.name);
  return names;
}

std::vector<GradCheckEntry> run_gradient_checks(const GradCheckOptions& opt) {
  if (opt.instances < 1) {
    throw ArgumentError("gradcheck: instances must be at least 1");
  }
  if (!(opt.layer_tol > 0.0 && opt.model_tol > 0.0)) {
    throw ArgumentError("gradcheck: tolerances must be positive");
  }
  const std::vector<Check> checks = all_checks();
  if (!opt.perturb.empty()) {
    bool known = false;
    for (const Check& c : checks) known |= opt.perturb == c.name;
    if (!known) {
      std::string names;
      for (const Check& c : checks) {
        if (!names.empty()) names += ", ";
        names += c.name;
      }
      throw ArgumentError("gradcheck: unknown perturb target '" + opt.perturb +
                          "'; valid checks: " + names);
    }
  }

  std::vector<GradCheckEntry> entries;
  for (size_t ci = 0; ci < checks.size(); ++ci) {
    const Check& c = checks[ci];
    GradCheckEntry e;
    e.name = c.name;
    e.tolerance = c.tol_kind == 0 ? opt.layer_tol : opt.model_tol;
    g_analytic_scale = opt.perturb == c.name ? 1.05 : 1.0;
    for (int inst = 0; inst < opt.instances; ++inst) {
      Rng rng(mix_seed(opt.seed, static_cast<uint64_t>(ci),
                       static_cast<uint64_t>(inst)));
      e.max_rel_err = std::max(e.max_rel_err, c.run(rng));
    }
    g_analytic_scale = 1.0;
    e.pass = e.max_rel_err <= e.tolerance;
    entries.push_back(std::move(e));
  }
  return entries;
}

bool gradcheck_passed(const std::vector<GradCheckEntry>& entries) {
  for (const GradCheckEntry& e : entries) {
    if (!e.pass) return false;
  }
  return true;
}

}  // namespace vap
