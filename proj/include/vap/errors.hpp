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

#include <stdexcept>
#include <string>

namespace vap {

// Base class for all library errors.  Every throw site attaches enough
// context (names, offending values, expected vs. actual) that the message
// alone identifies the failure.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller passed structurally invalid input: mismatched tensor shapes,
// negative extents, out-of-range indices.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Caller passed a semantically invalid argument (bad enum value, empty
// required list, out-of-range scalar).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A geometric construction is impossible: crop outside the frame, a layer
// stack that collapses an extent to zero, a cuboid with no volume.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Non-finite values appeared where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A config file or key=value set failed validation (unknown key, bad value,
// missing required key).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Text input (manifest, proposal file, report) failed to parse.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Binary input (tensor blob, checkpoint) is malformed or truncated.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem operation failed (missing file, unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

// Dataset contents are inconsistent (annotation outside clip, label out of
// range, duplicate ids).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace vap
