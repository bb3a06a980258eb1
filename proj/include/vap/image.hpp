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
//
// Minimal PNG output: 8-bit grayscale or RGB, zlib stream of stored
// (uncompressed) deflate blocks.  No timestamps or ancillary chunks, so
// equal pixels give equal bytes.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vap {

// Pixels are row-major, top row first; gray is one byte per pixel, RGB is
// three.  ArgumentError for non-positive dimensions.
std::vector<uint8_t> encode_png_gray(const uint8_t* pixels, int64_t width,
                                     int64_t height);
std::vector<uint8_t> encode_png_rgb(const uint8_t* pixels, int64_t width,
                                    int64_t height);

void write_png_gray(const std::string& path, const uint8_t* pixels,
                    int64_t width, int64_t height);
void write_png_rgb(const std::string& path, const uint8_t* pixels,
                   int64_t width, int64_t height);

}  // namespace vap
