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

namespace vap {

// splitmix64 finalizer.  Used both as the core generator step and as a
// hash for deriving independent seed streams.  Chosen over mt19937 because
// the state is a single counter: any element of any stream can be computed
// directly from (seed, index), which is what makes data generation,
// augmentation and batch sampling reproducible from a manifest regardless
// of evaluation order.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a child seed from a parent seed and a stream tag.  Distinct tags
// give statistically independent streams.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  return splitmix64(seed ^ (0x9e3779b97f4a7c15ULL + splitmix64(stream)));
}

inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

// Small counter-based generator.  Copyable; copies continue the sequence
// independently.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return splitmix64(state_++); }

  // Uniform in [0, 1).  53-bit mantissa.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + next_double() * (hi - lo);
  }

  // Uniform integer in [0, n).  n must be > 0.
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return next_double() < p; }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

}  // namespace vap
