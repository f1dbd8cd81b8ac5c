// Copyright 2026 The neoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace neoc {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kDefaultFill{128, 128, 128};

/// Axis-aligned pixel rectangle, [x, x+w) x [y, y+h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const noexcept { return static_cast<long long>(w) * h; }
  bool operator==(const Rect&) const = default;
};

/// Overlap of two rectangles; nullopt when they do not share a pixel.
std::optional<Rect> intersect(const Rect& a, const Rect& b);
/// Intersection over union; 0 when either rectangle is empty.
double iou(const Rect& a, const Rect& b);

/// 8-bit RGB, row-major, 3 bytes per pixel.
struct ImageRecord {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  ImageRecord() = default;
  ImageRecord(int w, int h, Rgb fill = {});

  Rgb pixel(int x, int y) const noexcept {
    const auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    return {p[0], p[1], p[2]};
  }
  void set_pixel(int x, int y, Rgb c) noexcept {
    auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  bool contains(const Rect& r) const noexcept {
    return r.x >= 0 && r.y >= 0 && r.w >= 0 && r.h >= 0 && r.x + r.w <= width &&
           r.y + r.h <= height;
  }

  bool operator==(const ImageRecord&) const = default;
};

/// Binary PPM (P6) or PGM (P5, replicated to RGB), maxval 255. Throws
/// FormatError: kBadMagic, kUnsupported (P1-P4 and friends), kBadMaxval,
/// kTruncated, kMalformed.
ImageRecord decode_ppm(std::string_view bytes);
/// Always P6 with maxval 255.
std::string encode_ppm(const ImageRecord& image);

ImageRecord read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ImageRecord& image);

/// Bilinear resampling with half-pixel centers and edge clamping; values are
/// rounded to the nearest integer.
ImageRecord resize_bilinear(const ImageRecord& image, int out_w, int out_h);

/// Throws ConfigError when `rect` is not inside the image.
ImageRecord crop(const ImageRecord& image, const Rect& rect);

/// Copy of `image` with every pixel of `rect` set to `fill`. Throws
/// ConfigError when `rect` is not inside the image.
ImageRecord mask_region(const ImageRecord& image, const Rect& rect, Rgb fill = kDefaultFill);

}  // namespace neoc
