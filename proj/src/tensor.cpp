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

#include "vap/tensor.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "vap/io_util.hpp"
#include "vap/rng.hpp"

namespace vap {

namespace {
constexpr int kMaxRank = 8;
constexpr int64_t kMaxCount = int64_t{1} << 34;  // 64 GiB of f32; sanity cap
constexpr uint32_t kBlobMagic = 0x4e545041;      // "APTN" little-endian
constexpr uint32_t kBlobVersion = 1;
}  // namespace

void Shape::validate() const {
  if (dims.empty() || dims.size() > kMaxRank) {
    throw ShapeError("shape rank must be 1.." + std::to_string(kMaxRank) +
                     ", got " + std::to_string(dims.size()));
  }
  int64_t n = 1;
  for (int64_t d : dims) {
    if (d <= 0) {
      throw ShapeError("shape extents must be positive, got " + str());
    }
    if (d > kMaxCount / n) {
      throw ShapeError("shape too large: " + str());
    }
    n *= d;
  }
}

int64_t Shape::count() const {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ", ";
    os << dims[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(const Shape& s)
    : shape_(s), data_(static_cast<size_t>(s.count()), 0.0f) {}

Tensor Tensor::full(const Shape& s, float value) {
  Tensor t(s);
  for (auto& v : t.data_) v = value;
  return t;
}

Tensor Tensor::from_values(const Shape& s, std::vector<float> values) {
  if (static_cast<int64_t>(values.size()) != s.count()) {
    throw ShapeError("from_values: " + std::to_string(values.size()) +
                     " values for shape " + s.str());
  }
  Tensor t;
  t.shape_ = s;
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::random_uniform(const Shape& s, float lo, float hi,
                              uint64_t seed) {
  if (!(lo < hi)) {
    throw ArgumentError("random_uniform: need lo < hi, got [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
  Tensor t(s);
  const double span = static_cast<double>(hi) - static_cast<double>(lo);
  const int64_t n = t.size();
  for (int64_t i = 0; i < n; ++i) {
    // Counter-based: element i is a pure function of (seed, i).
    double u =
        static_cast<double>(mix_seed(seed, static_cast<uint64_t>(i)) >> 11) *
        0x1.0p-53;
    t.data_[static_cast<size_t>(i)] = static_cast<float>(lo + u * span);
  }
  return t;
}

int64_t Tensor::flat_index(std::initializer_list<int64_t> idx) const {
  if (static_cast<int>(idx.size()) != rank()) {
    throw ShapeError("index rank " + std::to_string(idx.size()) +
                     " does not match tensor rank " + std::to_string(rank()));
  }
  int64_t flat = 0;
  int i = 0;
  for (int64_t v : idx) {
    int64_t extent = shape_[i];
    if (v < 0 || v >= extent) {
      throw ShapeError("index " + std::to_string(v) + " out of range for axis " +
                       std::to_string(i) + " of " + shape_.str());
    }
    flat = flat * extent + v;
    ++i;
  }
  return flat;
}

float Tensor::at(std::initializer_list<int64_t> idx) const {
  return data_[static_cast<size_t>(flat_index(idx))];
}

float& Tensor::at(std::initializer_list<int64_t> idx) {
  return data_[static_cast<size_t>(flat_index(idx))];
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::sum() const {
  double acc = 0.0;
  for (float v : data_) acc += v;
  return acc;
}

namespace {
template <class F>
Tensor combine(const Tensor& a, const Tensor& b, F f, const char* name) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(name) + ": shape mismatch " + a.shape().str() +
                     " vs " + b.shape().str());
  }
  Tensor out(a.shape());
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
  return out;
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return combine(a, b, [](float x, float y) { return x + y; }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return combine(a, b, [](float x, float y) { return x - y; }, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return combine(a, b, [](float x, float y) { return x * y; }, "mul");
}

Tensor map_binary(const Tensor& a, const Tensor& b,
                  const std::function<float(float, float)>& f) {
  return combine(a, b, [&f](float x, float y) { return f(x, y); },
                 "map_binary");
}

Tensor reshape(const Tensor& t, const Shape& s) {
  if (s.count() != t.size()) {
    throw ShapeError("reshape: cannot view " + t.shape().str() + " as " +
                     s.str());
  }
  return Tensor::from_values(
      s, std::vector<float>(t.data(), t.data() + t.size()));
}

Tensor reduce_sum(const Tensor& t, int axis) {
  if (axis < 0 || axis >= t.rank()) {
    throw ShapeError("reduce_sum: axis " + std::to_string(axis) +
                     " out of range for " + t.shape().str());
  }
  // Decompose the shape as (outer, axis, inner).
  int64_t outer = 1, inner = 1;
  const int64_t mid = t.shape()[axis];
  for (int i = 0; i < axis; ++i) outer *= t.shape()[i];
  for (int i = axis + 1; i < t.rank(); ++i) inner *= t.shape()[i];

  std::vector<int64_t> out_dims;
  for (int i = 0; i < t.rank(); ++i) {
    if (i != axis) out_dims.push_back(t.shape()[i]);
  }
  if (out_dims.empty()) out_dims.push_back(1);
  Tensor out{Shape(out_dims)};

  const float* src = t.data();
  float* dst = out.data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      double acc = 0.0;
      for (int64_t m = 0; m < mid; ++m) {
        acc += src[(o * mid + m) * inner + in];
      }
      dst[o * inner + in] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor reduce_sum(const Tensor& t) {
  Tensor out{Shape{1}};
  out[0] = static_cast<float>(t.sum());
  return out;
}

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f,
                              const Tensor& x, double eps) {
  if (!(eps > 0.0)) {
    throw ArgumentError("finite_difference_grad: eps must be positive");
  }
  Tensor probe = x;
  Tensor grad(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) {
    const float saved = probe[i];
    probe[i] = static_cast<float>(saved + eps);
    const double hi = f(probe);
    probe[i] = static_cast<float>(saved - eps);
    const double lo = f(probe);
    probe[i] = saved;
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw NumericError("finite_difference_grad: f returned a non-finite "
                         "value at element " +
                         std::to_string(i));
    }
    grad[i] = static_cast<float>((hi - lo) / (2.0 * eps));
  }
  return grad;
}

void write_tensor_blob(std::ostream& os, const Tensor& t) {
  if (t.empty()) {
    throw ArgumentError("write_tensor_blob: empty tensor");
  }
  io::write_u32(os, kBlobMagic);
  io::write_u32(os, kBlobVersion);
  io::write_u32(os, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) {
    io::write_u64(os, static_cast<uint64_t>(t.shape()[i]));
  }
  const int64_t n = t.size();
  for (int64_t i = 0; i < n; ++i) io::write_f32(os, t[i]);
}

Tensor read_tensor_blob(std::istream& is) {
  const uint32_t magic = io::read_u32(is, "tensor blob magic");
  if (magic != kBlobMagic) {
    std::ostringstream msg;
    msg << "bad tensor blob magic 0x" << std::hex << magic;
    throw FormatError(msg.str());
  }
  const uint32_t version = io::read_u32(is, "tensor blob version");
  if (version != kBlobVersion) {
    throw FormatError("unsupported tensor blob version " +
                      std::to_string(version));
  }
  const uint32_t rank = io::read_u32(is, "tensor blob rank");
  if (rank < 1 || rank > kMaxRank) {
    throw FormatError("tensor blob rank " + std::to_string(rank) +
                      " out of range");
  }
  std::vector<int64_t> dims(rank);
  for (uint32_t i = 0; i < rank; ++i) {
    const uint64_t e = io::read_u64(is, "tensor blob extent");
    if (e == 0 || e > static_cast<uint64_t>(kMaxCount)) {
      throw FormatError("tensor blob extent " + std::to_string(e) +
                        " out of range");
    }
    dims[i] = static_cast<int64_t>(e);
  }
  Shape shape(dims);
  Tensor t(shape);
  const int64_t n = t.size();
  for (int64_t i = 0; i < n; ++i) t[i] = io::read_f32(is, "tensor blob data");
  return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path);
  write_tensor_blob(os, t);
  os.flush();
  if (!os) throw IoError("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for read: " + path);
  Tensor t = read_tensor_blob(is);
  // A tensor blob is a whole-file container: trailing bytes mean the file
  // was not produced by this writer.
  is.peek();
  if (!is.eof()) throw FormatError("trailing bytes after tensor blob: " + path);
  return t;
}

}  // namespace vap
