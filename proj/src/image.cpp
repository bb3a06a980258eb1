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

#include "vap/image.hpp"

#include <array>
#include <fstream>

#include "vap/errors.hpp"

namespace vap {
namespace {

const std::array<uint32_t, 256>& crc_table() {
  static const std::array<uint32_t, 256> table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t n = 0; n < 256; ++n) {
      uint32_t c = n;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      }
      t[n] = c;
    }
    return t;
  }();
  return table;
}

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0) {
  crc ^= 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) {
    crc = crc_table()[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  }
  return crc ^ 0xFFFFFFFFu;
}

uint32_t adler32(const uint8_t* data, size_t len) {
  uint32_t a = 1, b = 0;
  for (size_t i = 0; i < len; ++i) {
    a = (a + data[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const std::vector<uint8_t>& payload) {
  put_u32_be(out, static_cast<uint32_t>(payload.size()));
  const size_t type_at = out.size();
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(type[i]));
  out.insert(out.end(), payload.begin(), payload.end());
  put_u32_be(out, crc32(out.data() + type_at, 4 + payload.size()));
}

// zlib wrapper around stored deflate blocks: no compression, but every
// standard decoder reads it.
std::vector<uint8_t> zlib_stored(const std::vector<uint8_t>& raw) {
  std::vector<uint8_t> z;
  z.push_back(0x78);  // 32K window, deflate
  z.push_back(0x01);  // no preset dictionary, fastest-compression flag
  size_t off = 0;
  do {
    const size_t n = std::min<size_t>(raw.size() - off, 65535);
    const bool final = off + n == raw.size();
    z.push_back(final ? 1 : 0);  // BFINAL, BTYPE=00 (stored)
    z.push_back(static_cast<uint8_t>(n & 0xFF));
    z.push_back(static_cast<uint8_t>(n >> 8));
    z.push_back(static_cast<uint8_t>(~n & 0xFF));
    z.push_back(static_cast<uint8_t>((~n >> 8) & 0xFF));
    z.insert(z.end(), raw.begin() + static_cast<int64_t>(off),
             raw.begin() + static_cast<int64_t>(off + n));
    off += n;
  } while (off < raw.size());
  put_u32_be(z, adler32(raw.data(), raw.size()));
  return z;
}

std::vector<uint8_t> encode_png(const uint8_t* pixels, int64_t width,
                                int64_t height, int channels) {
  if (width < 1 || height < 1) {
    throw ArgumentError("png: dimensions must be positive, got " +
                        std::to_string(width) + "x" + std::to_string(height));
  }
  if (pixels == nullptr) throw ArgumentError("png: null pixel buffer");

  std::vector<uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<uint32_t>(width));
  put_u32_be(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);  // gray / truecolor
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  put_chunk(png, "IHDR", ihdr);

  const int64_t row_bytes = width * channels;
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(height * (row_bytes + 1)));
  for (int64_t r = 0; r < height; ++r) {
    raw.push_back(0);  // filter type: none
    raw.insert(raw.end(), pixels + r * row_bytes,
               pixels + (r + 1) * row_bytes);
  }
  put_chunk(png, "IDAT", zlib_stored(raw));
  put_chunk(png, "IEND", {});
  return png;
}

void write_png(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

std::vector<uint8_t> encode_png_gray(const uint8_t* pixels, int64_t width,
                                     int64_t height) {
  return encode_png(pixels, width, height, 1);
}

std::vector<uint8_t> encode_png_rgb(const uint8_t* pixels, int64_t width,
                                    int64_t height) {
  return encode_png(pixels, width, height, 3);
}

void write_png_gray(const std::string& path, const uint8_t* pixels,
                    int64_t width, int64_t height) {
  write_png(path, encode_png_gray(pixels, width, height));
}

void write_png_rgb(const std::string& path, const uint8_t* pixels,
                   int64_t width, int64_t height) {
  write_png(path, encode_png_rgb(pixels, width, height));
}

}  // namespace vap
