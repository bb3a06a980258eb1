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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vap/layers.hpp"
#include "vap/rng.hpp"
#include "vap/tensor.hpp"

using namespace vap;

namespace {

// Scalar objective sum(out * r) gives every output element a distinct
// weight, so a gradient check exercises all routing paths at once.
Tensor rand_t(const Shape& s, uint64_t seed, float lo = -1.0f,
              float hi = 1.0f) {
  return Tensor::random_uniform(s, lo, hi, seed);
}

double weighted_sum(const Tensor& t, const Tensor& r) {
  double acc = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) {
    acc += static_cast<double>(t[i]) * r[i];
  }
  return acc;
}

}  // namespace

TEST_CASE("conv3d forward matches the gather-style reference") {
  struct Case {
    Shape in, w;
    Triple stride, pad;
  };
  const Case cases[] = {
      {Shape{2, 2, 3, 4, 5}, Shape{3, 2, 2, 3, 3}, {1, 1, 1}, {0, 1, 1}},
      {Shape{1, 3, 4, 6, 6}, Shape{2, 3, 3, 3, 3}, {1, 2, 2}, {1, 1, 1}},
      {Shape{2, 1, 5, 5, 5}, Shape{1, 1, 3, 3, 3}, {2, 2, 2}, {0, 0, 0}},
      {Shape{1, 2, 2, 4, 4}, Shape{4, 2, 1, 1, 1}, {1, 1, 1}, {0, 0, 0}},
  };
  uint64_t seed = 100;
  for (const auto& c : cases) {
    CAPTURE(c.in.str());
    Tensor in = rand_t(c.in, seed++);
    Tensor w = rand_t(c.w, seed++);
    Tensor b = rand_t(Shape{c.w[0]}, seed++);
    Tensor got = conv3d_forward(in, w, b, c.stride, c.pad);
    Tensor want = oracle::naive_conv3d(in, w, b, c.stride, c.pad);
    REQUIRE(got.shape() == want.shape());
    CHECK(oracle::max_rel_err(got, want, 1e-4) < 1e-5);
  }
}

TEST_CASE("conv3d identity and counting kernels") {
  // 1x1x1 kernel of weight 1, bias 0: output equals input.
  Tensor in = rand_t(Shape{1, 1, 2, 3, 3}, 5);
  Tensor w = Tensor::full(Shape{1, 1, 1, 1, 1}, 1.0f);
  Tensor b = Tensor::zeros(Shape{1});
  Tensor out = conv3d_forward(in, w, b, {1, 1, 1}, {0, 0, 0});
  REQUIRE(out.shape() == in.shape());
  for (int64_t i = 0; i < in.size(); ++i) CHECK(out[i] == in[i]);

  // All-ones 3x3x3 kernel with pad 1 on an all-ones single-frame input
  // counts the in-bounds taps: 9 at the plane center, 4 at a corner.
  Tensor ones = Tensor::full(Shape{1, 1, 1, 3, 3}, 1.0f);
  Tensor w3 = Tensor::full(Shape{1, 1, 3, 3, 3}, 1.0f);
  Tensor padded = conv3d_forward(ones, w3, b, {1, 1, 1}, {1, 1, 1});
  REQUIRE(padded.shape() == Shape{1, 1, 1, 3, 3});
  CHECK(padded.at({0, 0, 0, 1, 1}) == 9.0f);
  CHECK(padded.at({0, 0, 0, 0, 0}) == 4.0f);
  CHECK(padded.at({0, 0, 0, 0, 1}) == 6.0f);
}

TEST_CASE("conv3d geometry validation") {
  Tensor in = Tensor::zeros(Shape{1, 1, 2, 2, 2});
  Tensor w = Tensor::zeros(Shape{1, 1, 3, 3, 3});
  Tensor b = Tensor::zeros(Shape{1});
  CHECK_THROWS_AS(conv3d_forward(in, w, b, {1, 1, 1}, {0, 0, 0}),
                  GeometryError);
  CHECK_NOTHROW(conv3d_forward(in, w, b, {1, 1, 1}, {1, 1, 1}));
  Tensor wbad = Tensor::zeros(Shape{1, 2, 1, 1, 1});
  CHECK_THROWS_AS(conv3d_forward(in, wbad, b, {1, 1, 1}, {0, 0, 0}),
                  ShapeError);
}

TEST_CASE("conv3d backward matches finite differences") {
  const Shape in_s{2, 2, 3, 4, 4};
  const Shape w_s{3, 2, 2, 3, 3};
  const Triple stride{1, 1, 1}, pad{0, 1, 1};
  Tensor in = rand_t(in_s, 11);
  Tensor w = rand_t(w_s, 12, -0.5f, 0.5f);
  Tensor b = rand_t(Shape{3}, 13);
  Tensor out = conv3d_forward(in, w, b, stride, pad);
  Tensor r = rand_t(out.shape(), 14);

  Conv3dGrads got = conv3d_backward(in, w, r, stride, pad);

  auto f_in = [&](const Tensor& x) {
    return weighted_sum(conv3d_forward(x, w, b, stride, pad), r);
  };
  auto f_w = [&](const Tensor& x) {
    return weighted_sum(conv3d_forward(in, x, b, stride, pad), r);
  };
  auto f_b = [&](const Tensor& x) {
    return weighted_sum(conv3d_forward(in, w, x, stride, pad), r);
  };
  CHECK(oracle::max_rel_err(got.input, finite_difference_grad(f_in, in, 0.1),
                            1e-3) < 1e-3);
  CHECK(oracle::max_rel_err(got.weights, finite_difference_grad(f_w, w, 0.1),
                            1e-3) < 1e-3);
  CHECK(oracle::max_rel_err(got.bias, finite_difference_grad(f_b, b, 0.1),
                            1e-3) < 1e-3);
}

TEST_CASE("conv3d backward with stride matches finite differences") {
  const Shape in_s{1, 2, 4, 5, 5};
  const Shape w_s{2, 2, 2, 3, 3};
  const Triple stride{2, 2, 2}, pad{1, 0, 1};
  Tensor in = rand_t(in_s, 21);
  Tensor w = rand_t(w_s, 22, -0.5f, 0.5f);
  Tensor b = rand_t(Shape{2}, 23);
  Tensor out = conv3d_forward(in, w, b, stride, pad);
  Tensor r = rand_t(out.shape(), 24);

  Conv3dGrads got = conv3d_backward(in, w, r, stride, pad);
  auto f_in = [&](const Tensor& x) {
    return weighted_sum(conv3d_forward(x, w, b, stride, pad), r);
  };
  auto f_w = [&](const Tensor& x) {
    return weighted_sum(conv3d_forward(in, x, b, stride, pad), r);
  };
  CHECK(oracle::max_rel_err(got.input, finite_difference_grad(f_in, in, 0.1),
                            1e-3) < 1e-3);
  CHECK(oracle::max_rel_err(got.weights, finite_difference_grad(f_w, w, 0.1),
                            1e-3) < 1e-3);
}

TEST_CASE("maxpool3d forward, argmax and ties") {
  Tensor in = Tensor::from_values(Shape{1, 1, 2, 2, 2},
                                  {1, 2, 3, 4, 5, 6, 7, 8});
  Pool3dResult res = maxpool3d_forward(in, {2, 2, 2}, {2, 2, 2});
  REQUIRE(res.output.shape() == Shape{1, 1, 1, 1, 1});
  CHECK(res.output[0] == 8.0f);
  CHECK(res.argmax[0] == 7);

  // All-equal window: the lowest flat index wins.
  Tensor flat = Tensor::full(Shape{1, 1, 2, 2, 2}, 3.5f);
  Pool3dResult tie = maxpool3d_forward(flat, {2, 2, 2}, {2, 2, 2});
  CHECK(tie.argmax[0] == 0);

  // Random volume against the reference.
  Tensor big = rand_t(Shape{2, 3, 4, 6, 6}, 31);
  Pool3dResult got = maxpool3d_forward(big, {2, 2, 2}, {2, 2, 2});
  Tensor want = oracle::naive_maxpool3d(big, {2, 2, 2}, {2, 2, 2});
  REQUIRE(got.output.shape() == want.shape());
  for (int64_t i = 0; i < want.size(); ++i) CHECK(got.output[i] == want[i]);

  CHECK_THROWS_AS(maxpool3d_forward(Tensor::zeros(Shape{1, 1, 1, 2, 2}),
                                    {2, 2, 2}, {2, 2, 2}),
                  GeometryError);
}

TEST_CASE("maxpool3d backward routes gradient to the argmax") {
  // Values spaced >= 0.05 apart keep argmax stable under the FD probe.
  std::vector<float> vals(2 * 1 * 2 * 4 * 4);
  Rng r(77);
  std::vector<int> order(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) order[i] = static_cast<int>(i);
  for (size_t i = vals.size() - 1; i > 0; --i) {
    std::swap(order[i], order[r.uniform_int(i + 1)]);
  }
  for (size_t i = 0; i < vals.size(); ++i) {
    vals[static_cast<size_t>(order[i])] = 0.05f * static_cast<float>(i);
  }
  Tensor in = Tensor::from_values(Shape{2, 1, 2, 4, 4}, vals);
  Pool3dResult fwd = maxpool3d_forward(in, {2, 2, 2}, {1, 2, 2});
  Tensor rw = rand_t(fwd.output.shape(), 41);
  Tensor got = maxpool3d_backward(in.shape(), fwd.argmax, rw);
  auto f = [&](const Tensor& x) {
    return weighted_sum(maxpool3d_forward(x, {2, 2, 2}, {1, 2, 2}).output, rw);
  };
  Tensor want = finite_difference_grad(f, in, 1e-3);
  CHECK(oracle::max_rel_err(got, want, 1e-3) < 1e-3);
}

TEST_CASE("relu forward and backward") {
  Tensor in = Tensor::from_values(Shape{5}, {-2.0f, -0.5f, 0.0f, 0.5f, 2.0f});
  Tensor out = relu_forward(in);
  CHECK(out[0] == 0.0f);
  CHECK(out[1] == 0.0f);
  CHECK(out[2] == 0.0f);
  CHECK(out[3] == 0.5f);
  CHECK(out[4] == 2.0f);

  Tensor go = Tensor::full(Shape{5}, 3.0f);
  Tensor gin = relu_backward(in, go);
  CHECK(gin[0] == 0.0f);
  CHECK(gin[2] == 0.0f);  // subgradient 0 at exactly 0
  CHECK(gin[3] == 3.0f);
  CHECK(gin[4] == 3.0f);

  // FD check away from the kink.
  Tensor x = rand_t(Shape{20}, 51, 0.2f, 1.0f);
  for (int64_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
  Tensor rw = rand_t(x.shape(), 52);
  auto f = [&](const Tensor& t) { return weighted_sum(relu_forward(t), rw); };
  Tensor want = finite_difference_grad(f, x, 1e-3);
  Tensor got = relu_backward(x, rw);
  CHECK(oracle::max_rel_err(got, want, 1e-3) < 1e-3);
}

TEST_CASE("sigmoid and its backward") {
  Tensor in = Tensor::from_values(Shape{3}, {0.0f, 2.0f, -2.0f});
  Tensor p = sigmoid(in);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.8807970779778823).epsilon(1e-6));
  CHECK(p[2] == doctest::Approx(0.11920292202211755).epsilon(1e-6));

  Tensor x = rand_t(Shape{16}, 61, -3.0f, 3.0f);
  Tensor rw = rand_t(x.shape(), 62);
  auto f = [&](const Tensor& t) { return weighted_sum(sigmoid(t), rw); };
  Tensor want = finite_difference_grad(f, x, 1e-3);
  Tensor got = sigmoid_backward(sigmoid(x), rw);
  CHECK(oracle::max_rel_err(got, want, 1e-4) < 1e-3);
}

TEST_CASE("fc forward and backward") {
  // Hand-checkable: y = x W^T + b.
  Tensor x = Tensor::from_values(Shape{1, 3}, {1, 2, 3});
  Tensor w = Tensor::from_values(Shape{2, 3}, {1, 0, 0, 1, 1, 1});
  Tensor b = Tensor::from_values(Shape{2}, {10, 20});
  Tensor y = fc_forward(x, w, b);
  REQUIRE(y.shape() == Shape{1, 2});
  CHECK(y[0] == 11.0f);
  CHECK(y[1] == 26.0f);

  Tensor xr = rand_t(Shape{4, 7}, 71);
  Tensor wr = rand_t(Shape{5, 7}, 72);
  Tensor br = rand_t(Shape{5}, 73);
  Tensor out = fc_forward(xr, wr, br);
  Tensor rw = rand_t(out.shape(), 74);
  FcGrads got = fc_backward(xr, wr, rw);
  auto f_x = [&](const Tensor& t) {
    return weighted_sum(fc_forward(t, wr, br), rw);
  };
  auto f_w = [&](const Tensor& t) {
    return weighted_sum(fc_forward(xr, t, br), rw);
  };
  auto f_b = [&](const Tensor& t) {
    return weighted_sum(fc_forward(xr, wr, t), rw);
  };
  CHECK(oracle::max_rel_err(got.input, finite_difference_grad(f_x, xr, 1e-2),
                            1e-3) < 1e-3);
  CHECK(oracle::max_rel_err(got.weights, finite_difference_grad(f_w, wr, 1e-2),
                            1e-3) < 1e-3);
  CHECK(oracle::max_rel_err(got.bias, finite_difference_grad(f_b, br, 1e-2),
                            1e-3) < 1e-3);
  CHECK_THROWS_AS(fc_forward(xr, Tensor::zeros(Shape{5, 8}), br), ShapeError);
}

TEST_CASE("softmax cross entropy values") {
  // Two classes with logits (0, ln 100) and label 0:
  // p0 = 1/101, loss = ln 101.
  Tensor logits = Tensor::from_values(
      Shape{1, 2}, {0.0f, static_cast<float>(std::log(100.0))});
  auto res = softmax_cross_entropy(logits, {0});
  CHECK(res.value == doctest::Approx(4.61512051684126).epsilon(1e-6));
  CHECK(res.probs[0] == doctest::Approx(1.0 / 101.0).epsilon(1e-5));
  CHECK(res.probs[1] == doctest::Approx(100.0 / 101.0).epsilon(1e-6));

  // Uniform logits over M classes cost ln M.
  Tensor uni = Tensor::full(Shape{3, 4}, 0.7f);
  auto ures = softmax_cross_entropy(uni, {0, 1, 2});
  CHECK(ures.value == doctest::Approx(std::log(4.0)).epsilon(1e-6));

  // Row sums of probs are 1; grad rows sum to 0.
  Tensor lr = rand_t(Shape{3, 5}, 81, -4.0f, 4.0f);
  auto rres = softmax_cross_entropy(lr, {4, 0, 2});
  for (int64_t n = 0; n < 3; ++n) {
    double ps = 0.0, gs = 0.0;
    for (int64_t m = 0; m < 5; ++m) {
      ps += rres.probs.at({n, m});
      gs += rres.grad.at({n, m});
    }
    CHECK(ps == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(gs == doctest::Approx(0.0).epsilon(1e-6));
  }

  // Stability under large logits: shifting all logits leaves probs fixed.
  Tensor big = Tensor::from_values(Shape{1, 2}, {1000.0f, 1001.0f});
  auto bres = softmax_cross_entropy(big, {1});
  CHECK(bres.probs[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0)))
                             .epsilon(1e-6));
  CHECK(std::isfinite(bres.value));

  CHECK_THROWS_AS(softmax_cross_entropy(lr, {0, 1}), ShapeError);
  CHECK_THROWS_AS(softmax_cross_entropy(lr, {0, 1, 5}), ArgumentError);
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  Tensor logits = rand_t(Shape{4, 6}, 91, -2.0f, 2.0f);
  const std::vector<int> labels{2, 0, 5, 3};
  auto res = softmax_cross_entropy(logits, labels);
  auto f = [&](const Tensor& t) {
    return softmax_cross_entropy(t, labels).value;
  };
  Tensor want = finite_difference_grad(f, logits, 1e-3);
  CHECK(oracle::max_rel_err(res.grad, want, 1e-4) < 1e-2);
}

TEST_CASE("multilabel cross entropy values") {
  // probs (0.9, 0.8, 0.2) with targets (1, 1, 0):
  // -(ln .9 + ln .8 + ln .8)/3 = 0.18388253942874862
  Tensor p = Tensor::from_values(Shape{1, 3}, {0.9f, 0.8f, 0.2f});
  Tensor t = Tensor::from_values(Shape{1, 3}, {1.0f, 1.0f, 0.0f});
  auto res = multilabel_cross_entropy(p, t);
  CHECK(res.value == doctest::Approx(0.18388253942874862).epsilon(1e-5));

  // Uniform probabilities against soft target 0.5 cost exactly ln 2.
  Tensor ph = Tensor::full(Shape{2, 7}, 0.5f);
  Tensor th = Tensor::full(Shape{2, 7}, 0.5f);
  CHECK(multilabel_cross_entropy(ph, th).value ==
        doctest::Approx(0.6931471805599453).epsilon(1e-7));

  // Perfect predictions cost ~0 (clamped at eps).
  Tensor pp = Tensor::from_values(Shape{1, 2}, {1.0f, 0.0f});
  Tensor tp = Tensor::from_values(Shape{1, 2}, {1.0f, 0.0f});
  CHECK(multilabel_cross_entropy(pp, tp).value < 1e-5);

  Tensor bad = Tensor::from_values(Shape{1, 2}, {0.5f, 1.5f});
  CHECK_THROWS_AS(multilabel_cross_entropy(pp, bad), ArgumentError);
}

TEST_CASE("multilabel cross entropy gradient matches finite differences") {
  // Keep probabilities well inside (0,1) so the clamp stays inactive.
  Tensor p = rand_t(Shape{3, 5}, 101, 0.1f, 0.9f);
  Tensor t = Tensor(Shape{3, 5});
  Rng r(102);
  for (int64_t i = 0; i < t.size(); ++i) {
    t[i] = r.bernoulli(0.5) ? 1.0f : 0.0f;
  }
  auto res = multilabel_cross_entropy(p, t);
  auto f = [&](const Tensor& x) {
    return multilabel_cross_entropy(x, t).value;
  };
  Tensor want = finite_difference_grad(f, p, 1e-4);
  CHECK(oracle::max_rel_err(res.grad, want, 1e-4) < 1e-2);

  // Composite with sigmoid, checked against FD on the logits.
  Tensor z = rand_t(Shape{2, 6}, 103, -2.0f, 2.0f);
  Tensor tz = rand_t(Shape{2, 6}, 104, 0.0f, 1.0f);
  auto fz = [&](const Tensor& x) {
    return multilabel_cross_entropy(sigmoid(x), tz).value;
  };
  Tensor probs = sigmoid(z);
  Tensor chain =
      sigmoid_backward(probs, multilabel_cross_entropy(probs, tz).grad);
  Tensor wantz = finite_difference_grad(fz, z, 1e-3);
  CHECK(oracle::max_rel_err(chain, wantz, 1e-4) < 1e-2);
}

TEST_CASE("euclidean loss") {
  // Single sample with diff (3, 4): squared distance 25.
  Tensor pred = Tensor::from_values(Shape{1, 2}, {4.0f, 6.0f});
  Tensor target = Tensor::from_values(Shape{1, 2}, {1.0f, 2.0f});
  auto res = euclidean_loss(pred, target);
  CHECK(res.value == doctest::Approx(25.0).epsilon(1e-6));
  CHECK(res.grad[0] == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(res.grad[1] == doctest::Approx(8.0).epsilon(1e-6));

  // Batch mean and FD.
  Tensor p = rand_t(Shape{4, 2}, 111);
  Tensor t = rand_t(Shape{4, 2}, 112);
  auto r2 = euclidean_loss(p, t);
  auto f = [&](const Tensor& x) { return euclidean_loss(x, t).value; };
  Tensor want = finite_difference_grad(f, p, 1e-3);
  CHECK(oracle::max_rel_err(r2.grad, want, 1e-4) < 1e-2);

  // Identical tensors: zero loss, zero grad.
  auto z = euclidean_loss(t, t);
  CHECK(z.value == 0.0);
}

TEST_CASE("sgd momentum two-step oracle") {
  // w0=1, grad=1 both steps, lr=0.1, momentum=0.9:
  // v1=-0.1  w1=0.9 ; v2=-0.19  w2=0.71
  Tensor w = Tensor::full(Shape{1}, 1.0f);
  Tensor v = Tensor::zeros(Shape{1});
  Tensor g = Tensor::full(Shape{1}, 1.0f);
  sgd_update(w, v, g, 0.1, 0.9);
  CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(v[0] == doctest::Approx(-0.1).epsilon(1e-6));
  sgd_update(w, v, g, 0.1, 0.9);
  CHECK(w[0] == doctest::Approx(0.71).epsilon(1e-6));
  CHECK(v[0] == doctest::Approx(-0.19).epsilon(1e-6));

  // Zero momentum reduces to plain SGD.
  Tensor w2 = Tensor::full(Shape{3}, 2.0f);
  Tensor v2 = Tensor::zeros(Shape{3});
  Tensor g2 = Tensor::full(Shape{3}, 4.0f);
  sgd_update(w2, v2, g2, 0.25, 0.0);
  for (int64_t i = 0; i < 3; ++i) CHECK(w2[i] == doctest::Approx(1.0));
}

TEST_CASE("learning rate step schedule") {
  CHECK(lr_at(0.005, 0.3, 50000, 0) == doctest::Approx(0.005));
  CHECK(lr_at(0.005, 0.3, 50000, 49999) == doctest::Approx(0.005));
  CHECK(lr_at(0.005, 0.3, 50000, 50000) == doctest::Approx(0.0015));
  CHECK(lr_at(0.005, 0.3, 50000, 100000) == doctest::Approx(0.00045));
  CHECK(lr_at(0.001, 0.1, 1000, 1500) == doctest::Approx(0.0001));
  CHECK_THROWS_AS(lr_at(0.1, 0.5, 0, 1), ArgumentError);
  CHECK_THROWS_AS(lr_at(0.1, 0.5, 10, -1), ArgumentError);
}

TEST_CASE("glorot uniform bounds and determinism") {
  const int64_t fan_in = 27, fan_out = 64;
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor a = glorot_uniform(Shape{64, 3, 3, 3, 1}, fan_in, fan_out, 9);
  Tensor b = glorot_uniform(Shape{64, 3, 3, 3, 1}, fan_in, fan_out, 9);
  double lo = 1e9, hi = -1e9;
  for (int64_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    lo = std::min(lo, double{a[i]});
    hi = std::max(hi, double{a[i]});
  }
  CHECK(lo >= -limit);
  CHECK(hi < limit);
  // The fill actually spans the range.
  CHECK(lo < -0.8 * limit);
  CHECK(hi > 0.8 * limit);
}
