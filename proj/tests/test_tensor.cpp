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

#include <cstdio>
#include <fstream>
#include <sstream>

#include "vap/rng.hpp"
#include "vap/tensor.hpp"

using namespace vap;

TEST_CASE("shape validation") {
  CHECK_THROWS_AS(Shape({0, 3}), ShapeError);
  CHECK_THROWS_AS(Shape({-1}), ShapeError);
  CHECK_THROWS_AS(Shape(std::vector<int64_t>{}), ShapeError);
  Shape s{2, 3, 4};
  CHECK(s.count() == 24);
  CHECK(s.rank() == 3);
  CHECK(s.str() == "(2, 3, 4)");
}

TEST_CASE("zeros") {
  Tensor t = Tensor::zeros(Shape{2, 3, 4});
  CHECK(t.size() == 24);
  for (int64_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0f);
}

TEST_CASE("random_uniform is deterministic and in range") {
  Tensor a = Tensor::random_uniform(Shape{4, 4, 4}, -1.0f, 1.0f, 7);
  Tensor b = Tensor::random_uniform(Shape{4, 4, 4}, -1.0f, 1.0f, 7);
  Tensor c = Tensor::random_uniform(Shape{4, 4, 4}, -1.0f, 1.0f, 8);
  for (int64_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] >= -1.0f);
    CHECK(a[i] < 1.0f);
    CHECK(a[i] == b[i]);
  }
  bool any_diff = false;
  for (int64_t i = 0; i < a.size(); ++i) any_diff |= (a[i] != c[i]);
  CHECK(any_diff);

  // First elements of the seed-7 stream, computed independently from the
  // published splitmix64 constants.  Pins the stream definition so that
  // saved datasets stay reproducible across refactors.
  CHECK(a[0] == doctest::Approx(0.8173387050628662).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(-0.4465945363044739).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(0.6553372740745544).epsilon(1e-12));
  CHECK(a[3] == doctest::Approx(-0.03580939397215843).epsilon(1e-12));
}

TEST_CASE("rng sequential stream") {
  Rng r(3);
  CHECK(r.next_double() == doctest::Approx(0.11345034205715454).epsilon(1e-15));
  CHECK(r.next_double() == doctest::Approx(0.43145581774497377).epsilon(1e-15));
  CHECK(r.next_double() == doctest::Approx(0.386768045983934).epsilon(1e-15));
}

TEST_CASE("elementwise ops") {
  Tensor ones = Tensor::full(Shape{2, 3}, 1.0f);
  Tensor two = add(ones, ones);
  for (int64_t i = 0; i < two.size(); ++i) CHECK(two[i] == 2.0f);

  Tensor a = Tensor::from_values(Shape{2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_values(Shape{2, 2}, {5, 6, 7, 8});
  Tensor d = sub(b, a);
  Tensor m = mul(a, b);
  CHECK(d[0] == 4.0f);
  CHECK(d[3] == 4.0f);
  CHECK(m[0] == 5.0f);
  CHECK(m[3] == 32.0f);

  Tensor g = map_binary(a, b, [](float x, float y) { return y - 2 * x; });
  CHECK(g[0] == 3.0f);
  CHECK(g[3] == 0.0f);

  CHECK_THROWS_AS(add(ones, a), ShapeError);
}

TEST_CASE("reduce_sum along an axis") {
  Tensor t = Tensor::from_values(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor s0 = reduce_sum(t, 0);
  REQUIRE(s0.shape() == Shape{3});
  CHECK(s0[0] == 5.0f);
  CHECK(s0[1] == 7.0f);
  CHECK(s0[2] == 9.0f);
  Tensor s1 = reduce_sum(t, 1);
  REQUIRE(s1.shape() == Shape{2});
  CHECK(s1[0] == 6.0f);
  CHECK(s1[1] == 15.0f);
  CHECK_THROWS_AS(reduce_sum(t, 2), ShapeError);

  Tensor all = reduce_sum(t);
  REQUIRE(all.shape() == Shape{1});
  CHECK(all[0] == 21.0f);
}

TEST_CASE("summation uses a 64-bit accumulator") {
  // 1e6 copies of float(0.1).  A float accumulator drifts by ~1e3 here; a
  // double accumulator lands within rounding of n * double(float(0.1)).
  const int64_t n = 1000000;
  Tensor t = Tensor::full(Shape{n}, 0.1f);
  const double expect = static_cast<double>(n) * static_cast<double>(0.1f);
  CHECK(t.sum() == doctest::Approx(expect).epsilon(1e-12));
  Tensor r = reduce_sum(t, 0);
  CHECK(r[0] == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("finite difference gradient of a quadratic") {
  Tensor x = Tensor::from_values(Shape{3}, {1.0f, 2.0f, 3.0f});
  auto f = [](const Tensor& t) {
    double acc = 0.0;
    for (int64_t i = 0; i < t.size(); ++i) {
      acc += static_cast<double>(t[i]) * static_cast<double>(t[i]);
    }
    return acc;
  };
  Tensor g = finite_difference_grad(f, x, 1e-3);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-4));
  CHECK(g[2] == doctest::Approx(6.0).epsilon(1e-4));

  auto bad = [](const Tensor&) {
    return std::numeric_limits<double>::infinity();
  };
  CHECK_THROWS_AS(finite_difference_grad(bad, x, 1e-3), NumericError);
}

TEST_CASE("multi-index accessors") {
  Tensor t = Tensor::from_values(Shape{2, 3}, {0, 1, 2, 3, 4, 5});
  CHECK(t.at({0, 0}) == 0.0f);
  CHECK(t.at({1, 2}) == 5.0f);
  CHECK(t.flat_index({1, 1}) == 4);
  CHECK_THROWS_AS(t.at({2, 0}), ShapeError);
  CHECK_THROWS_AS(t.at({0, 0, 0}), ShapeError);
}

namespace {
std::string tmp_file(const char* name) {
  return std::string("vap_test_") + name;
}
std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}
}  // namespace

TEST_CASE("tensor blob round trip is byte-identical") {
  Tensor t = Tensor::random_uniform(Shape{3, 5, 2}, -2.0f, 2.0f, 99);
  const std::string p1 = tmp_file("blob1.aptn");
  const std::string p2 = tmp_file("blob2.aptn");
  save_tensor(p1, t);
  Tensor back = load_tensor(p1);
  REQUIRE(back.shape() == t.shape());
  for (int64_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);
  save_tensor(p2, back);
  CHECK(slurp(p1) == slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("tensor blob rejects malformed input") {
  Tensor t = Tensor::from_values(Shape{2, 2}, {1, 2, 3, 4});
  std::ostringstream os(std::ios::binary);
  write_tensor_blob(os, t);
  const std::string good = os.str();

  {  // bad magic
    std::string bad = good;
    bad[0] = 'X';
    std::istringstream is(bad, std::ios::binary);
    CHECK_THROWS_AS(read_tensor_blob(is), FormatError);
  }
  {  // truncated payload
    std::istringstream is(good.substr(0, good.size() - 2), std::ios::binary);
    CHECK_THROWS_AS(read_tensor_blob(is), FormatError);
  }
  {  // trailing garbage via file path
    const std::string p = tmp_file("blob3.aptn");
    std::ofstream f(p, std::ios::binary);
    f << good << "extra";
    f.close();
    CHECK_THROWS_AS(load_tensor(p), FormatError);
    std::remove(p.c_str());
  }
  {  // unsupported version
    std::string bad = good;
    bad[4] = 9;
    std::istringstream is(bad, std::ios::binary);
    CHECK_THROWS_AS(read_tensor_blob(is), FormatError);
  }
  CHECK_THROWS_AS(load_tensor("does_not_exist.aptn"), IoError);
}

TEST_CASE("row-major flat order property") {
  // Lexicographic multi-index enumeration matches flat enumeration.
  Tensor t(Shape{3, 4, 5});
  int64_t flat = 0;
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      for (int64_t k = 0; k < 5; ++k) {
        CHECK(t.flat_index({i, j, k}) == flat);
        ++flat;
      }
    }
  }
}
