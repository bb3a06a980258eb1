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

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "vap/errors.hpp"

namespace vap {

// Dense row-major shape.  Extents are strictly positive; rank 1..8.
struct Shape {
  std::vector<int64_t> dims;

  Shape() = default;
  Shape(std::initializer_list<int64_t> d) : dims(d) { validate(); }
  explicit Shape(std::vector<int64_t> d) : dims(std::move(d)) { validate(); }

  int rank() const { return static_cast<int>(dims.size()); }
  int64_t operator[](int i) const { return dims.at(static_cast<size_t>(i)); }

  // Total element count.
  int64_t count() const;

  bool operator==(const Shape& o) const { return dims == o.dims; }
  bool operator!=(const Shape& o) const { return dims != o.dims; }

  // "(2, 3, 4)" for error messages.
  std::string str() const;

 private:
  void validate() const;
};

// Dense float32 tensor, row-major (last dimension contiguous).
//
// Value semantics: copies are deep.  All arithmetic entry points live as
// free functions so that the data layout stays the single hot-loop concern
// of this class.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(const Shape& s);  // zero-filled

  static Tensor zeros(const Shape& s) { return Tensor(s); }
  static Tensor full(const Shape& s, float value);
  static Tensor from_values(const Shape& s, std::vector<float> values);

  // Deterministic uniform fill over [lo, hi).  Element i depends only on
  // (seed, i): the same call always produces bit-identical tensors.
  static Tensor random_uniform(const Shape& s, float lo, float hi,
                               uint64_t seed);

  const Shape& shape() const { return shape_; }
  int rank() const { return shape_.rank(); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }

  // Bounds-checked multi-index access (throws ShapeError).  Convenience
  // for tests and cold paths; hot loops index data() directly.
  float at(std::initializer_list<int64_t> idx) const;
  float& at(std::initializer_list<int64_t> idx);

  int64_t flat_index(std::initializer_list<int64_t> idx) const;

  bool all_finite() const;

  // Deterministic full sum in a single 64-bit accumulator, flat order.
  double sum() const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Elementwise combine; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor map_binary(const Tensor& a, const Tensor& b,
                  const std::function<float(float, float)>& f);

// Same data, new shape; element counts must match.
Tensor reshape(const Tensor& t, const Shape& s);

// Sum along one axis; the result drops that axis (rank-1 input yields a
// single-element tensor).  Accumulation is 64-bit per output element.
Tensor reduce_sum(const Tensor& t, int axis);
// Full reduction to a single-element tensor.
Tensor reduce_sum(const Tensor& t);

// Central-difference gradient of a scalar-valued function at x:
//   g[i] = (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps)
// Exact for quadratics up to rounding.  Throws NumericError if f returns a
// non-finite value.  O(2n) evaluations of f; intended for tests.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f,
                              const Tensor& x, double eps);

// Tensor blob container: magic "APTN", version, rank, extents, f32 data,
// all little-endian.  load_tensor rejects bad magic, unknown versions and
// truncated or oversized payloads.
void write_tensor_blob(std::ostream& os, const Tensor& t);
Tensor read_tensor_blob(std::istream& is);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace vap
