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

#include "neoc/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "neoc/error.hpp"
#include "neoc/json.hpp"

namespace neoc {

std::optional<Rect> intersect(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w);
  const int y1 = std::min(a.y + a.h, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return Rect{x0, y0, x1 - x0, y1 - y0};
}

double iou(const Rect& a, const Rect& b) {
  const auto overlap = intersect(a, b);
  if (!overlap || a.area() <= 0 || b.area() <= 0) return 0.0;
  const auto inter = static_cast<double>(overlap->area());
  return inter / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter);
}

ImageRecord::ImageRecord(int w, int h, Rgb fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw ConfigError("image dimensions must be positive");
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill.r;
    pixels[i + 1] = fill.g;
    pixels[i + 2] = fill.b;
  }
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  // Next decimal field, skipping whitespace and '#' comments.
  long next_number(const char* field) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) {
      throw FormatError(FormatError::Kind::kTruncated,
                        std::string("PPM: header ends before ") + field);
    }
    if (!std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError(FormatError::Kind::kMalformed, std::string("PPM: bad ") + field);
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) {
        throw FormatError(FormatError::Kind::kMalformed, std::string("PPM: ") + field + " too large");
      }
      ++pos_;
    }
    return value;
  }

  // The single whitespace byte separating the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size()) {
      throw FormatError(FormatError::Kind::kTruncated, "PPM: missing raster");
    }
    if (!std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError(FormatError::Kind::kMalformed, "PPM: no whitespace after maxval");
    }
    return pos_ + 1;
  }

  void skip(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageRecord decode_ppm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || !std::isdigit(static_cast<unsigned char>(bytes[1]))) {
    throw FormatError(FormatError::Kind::kBadMagic, "PPM: bad magic number");
  }
  const char kind = bytes[1];
  if (kind != '5' && kind != '6') {
    throw FormatError(FormatError::Kind::kUnsupported,
                      std::string("PPM: unsupported format P") + kind + " (only binary P5/P6)");
  }
  HeaderReader header(bytes);
  header.skip(2);
  const long w = header.next_number("width");
  const long h = header.next_number("height");
  const long maxval = header.next_number("maxval");
  if (w <= 0 || h <= 0) throw FormatError(FormatError::Kind::kMalformed, "PPM: zero dimension");
  if (maxval != 255) {
    throw FormatError(FormatError::Kind::kBadMaxval,
                      "PPM: maxval " + std::to_string(maxval) + " unsupported (need 255)");
  }
  const std::size_t start = header.raster_start();
  const std::size_t channels = kind == '6' ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
  if (bytes.size() - start < need) {
    throw FormatError(FormatError::Kind::kTruncated,
                      "PPM: raster truncated (" + std::to_string(bytes.size() - start) + " of " +
                          std::to_string(need) + " bytes)");
  }
  ImageRecord image(static_cast<int>(w), static_cast<int>(h));
  const auto* src = reinterpret_cast<const std::uint8_t*>(bytes.data() + start);
  if (channels == 3) {
    std::copy(src, src + need, image.pixels.begin());
  } else {
    for (std::size_t i = 0; i < need; ++i) {
      image.pixels[3 * i] = image.pixels[3 * i + 1] = image.pixels[3 * i + 2] = src[i];
    }
  }
  return image;
}

std::string encode_ppm(const ImageRecord& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

ImageRecord read_ppm(const std::filesystem::path& path) {
  try {
    return decode_ppm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.string() + ": " + e.what());
  }
}

void write_ppm(const std::filesystem::path& path, const ImageRecord& image) {
  write_file(path, encode_ppm(image));
}

ImageRecord resize_bilinear(const ImageRecord& image, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw ConfigError("resize: output dimensions must be positive");
  if (out_w == image.width && out_h == image.height) return image;
  ImageRecord out(out_w, out_h);
  const double sx = static_cast<double>(image.width) / out_w;
  const double sy = static_cast<double>(image.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        auto at = [&](int px, int py) {
          return static_cast<double>(image.pixels[(static_cast<std::size_t>(py) * image.width + px) * 3 + c]);
        };
        const double top = at(x0, y0) * (1.0 - wx) + at(x1, y0) * wx;
        const double bottom = at(x0, y1) * (1.0 - wx) + at(x1, y1) * wx;
        const double v = top * (1.0 - wy) + bottom * wy;
        out.pixels[(static_cast<std::size_t>(y) * out_w + x) * 3 + c] =
            static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

ImageRecord crop(const ImageRecord& image, const Rect& rect) {
  if (!image.contains(rect) || rect.w == 0 || rect.h == 0) {
    throw ConfigError("crop: rect (" + std::to_string(rect.x) + "," + std::to_string(rect.y) + "," +
                      std::to_string(rect.w) + "," + std::to_string(rect.h) + ") outside " +
                      std::to_string(image.width) + "x" + std::to_string(image.height) + " image");
  }
  ImageRecord out(rect.w, rect.h);
  for (int y = 0; y < rect.h; ++y) {
    const auto* src = &image.pixels[(static_cast<std::size_t>(rect.y + y) * image.width + rect.x) * 3];
    std::copy(src, src + static_cast<std::size_t>(rect.w) * 3,
              out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * rect.w * 3);
  }
  return out;
}

ImageRecord mask_region(const ImageRecord& image, const Rect& rect, Rgb fill) {
  if (!image.contains(rect)) {
    throw ConfigError("mask_region: rect (" + std::to_string(rect.x) + "," + std::to_string(rect.y) +
                      "," + std::to_string(rect.w) + "," + std::to_string(rect.h) + ") outside " +
                      std::to_string(image.width) + "x" + std::to_string(image.height) + " image");
  }
  ImageRecord out = image;
  for (int y = rect.y; y < rect.y + rect.h; ++y) {
    for (int x = rect.x; x < rect.x + rect.w; ++x) out.set_pixel(x, y, fill);
  }
  return out;
}

}  // namespace neoc
