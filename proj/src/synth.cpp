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

#include "neoc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "neoc/error.hpp"

namespace neoc {

namespace fs = std::filesystem;

namespace {

// Glyph strokes in unit coordinates, y pointing down.
struct Stroke {
  bool ellipse = false;
  double a, b, c, d;  // line: x0 y0 x1 y1; ellipse: cx cy rx ry
};

using Strokes = std::vector<Stroke>;

Stroke line(double x0, double y0, double x1, double y1) { return {false, x0, y0, x1, y1}; }
Stroke oval(double cx, double cy, double rx, double ry) { return {true, cx, cy, rx, ry}; }

void rect_outline(Strokes& s, double x0, double y0, double x1, double y1) {
  s.push_back(line(x0, y0, x1, y0));
  s.push_back(line(x1, y0, x1, y1));
  s.push_back(line(x1, y1, x0, y1));
  s.push_back(line(x0, y1, x0, y0));
}

Strokes glyph_strokes(std::string_view cls, Rng& rng) {
  auto j = [&](double v) { return v + rng.uniform(-0.035, 0.035); };
  Strokes s;
  if (cls == "chair") {
    const double l = j(0.3), r = j(0.72), t = j(0.08), seat = j(0.55);
    s.push_back(line(l, t, l, 0.95));
    s.push_back(line(l, seat, r, seat));
    s.push_back(line(r, seat, r, 0.95));
    s.push_back(line(l, t, l + 0.14, t));
    s.push_back(line(l, (t + seat) / 2, l + 0.12, (t + seat) / 2));
  } else if (cls == "table") {
    const double t = j(0.35), l = j(0.18), r = j(0.82);
    s.push_back(line(0.06, t, 0.94, t));
    s.push_back(line(0.06, t + 0.05, 0.94, t + 0.05));
    s.push_back(line(l, t, j(l), 0.95));
    s.push_back(line(r, t, j(r), 0.95));
    s.push_back(line(l, t + 0.15, r, t + 0.15));
  } else if (cls == "cabinet") {
    const double l = j(0.22), r = j(0.78), mid = (l + r) / 2;
    rect_outline(s, l, j(0.05), r, 0.95);
    s.push_back(line(mid, 0.05, mid, 0.95));
    s.push_back(line(mid - 0.07, 0.47, mid - 0.07, 0.57));
    s.push_back(line(mid + 0.07, 0.47, mid + 0.07, 0.57));
  } else if (cls == "chest_of_drawers") {
    const double t = j(0.22), b = j(0.84);
    rect_outline(s, 0.08, t, 0.92, b);
    for (int k = 1; k < 3; ++k) {
      const double y = t + (b - t) * k / 3.0;
      s.push_back(line(0.08, y, 0.92, y));
    }
    for (int k = 0; k < 3; ++k) {
      const double y = t + (b - t) * (k + 0.5) / 3.0;
      s.push_back(line(0.44, y, 0.56, y));
    }
    s.push_back(line(0.13, b, 0.13, 0.95));
    s.push_back(line(0.87, b, 0.87, 0.95));
  } else if (cls == "sofa") {
    const double back = j(0.3), seat = j(0.58), base = j(0.78);
    s.push_back(line(0.06, back, 0.94, back));
    s.push_back(line(0.06, back, 0.06, base));
    s.push_back(line(0.94, back, 0.94, base));
    s.push_back(line(0.06, seat, 0.94, seat));
    s.push_back(line(0.06, base, 0.94, base));
    s.push_back(line(0.06, (back + seat) / 2, 0.2, (back + seat) / 2));
    s.push_back(line(0.94, (back + seat) / 2, 0.8, (back + seat) / 2));
    s.push_back(line(0.12, base, 0.12, 0.9));
    s.push_back(line(0.88, base, 0.88, 0.9));
  } else if (cls == "bed") {
    const double mattress = j(0.52), frame = j(0.72);
    s.push_back(line(0.06, j(0.18), 0.06, 0.93));
    s.push_back(line(0.94, j(0.45), 0.94, 0.93));
    s.push_back(line(0.06, mattress, 0.94, mattress));
    s.push_back(line(0.06, frame, 0.94, frame));
    s.push_back(oval(0.22, mattress - 0.07, 0.1, 0.05));
  } else if (cls == "mirror") {
    s.push_back(oval(0.5, j(0.38), j(0.26), j(0.32)));
    s.push_back(line(0.5, 0.72, 0.5, 0.93));
    s.push_back(line(j(0.28), 0.93, j(0.72), 0.93));
  } else if (cls == "lamp") {
    const double top = j(0.08), rim = j(0.42);
    s.push_back(line(0.26, rim, 0.74, rim));
    s.push_back(line(0.26, rim, 0.4, top));
    s.push_back(line(0.74, rim, 0.6, top));
    s.push_back(line(0.4, top, 0.6, top));
    s.push_back(line(0.5, rim, 0.5, 0.9));
    s.push_back(line(j(0.3), 0.92, j(0.7), 0.92));
  } else if (cls == "clock") {
    const double l = j(0.33), r = j(0.67), cy = j(0.22);
    rect_outline(s, l, 0.04, r, 0.95);
    s.push_back(oval(0.5, cy, 0.12, 0.12));
    s.push_back(line(0.5, cy, 0.5, cy - 0.08));
    s.push_back(line(0.5, cy, 0.57, cy));
    s.push_back(line(0.5, 0.42, 0.5, 0.7));
    s.push_back(oval(0.5, 0.74, 0.05, 0.05));
  } else {
    throw ConfigError("unknown glyph class '" + std::string(cls) + "'");
  }
  return s;
}

class Pen {
 public:
  Pen(ImageRecord& canvas, const Rect& clip, int thickness, Rgb ink)
      : canvas_(canvas), clip_(clip), thickness_(thickness), ink_(ink) {}

  void dot(double x, double y) {
    const int x0 = static_cast<int>(std::floor(x - thickness_ / 2.0 + 0.5));
    const int y0 = static_cast<int>(std::floor(y - thickness_ / 2.0 + 0.5));
    for (int py = y0; py < y0 + thickness_; ++py) {
      for (int px = x0; px < x0 + thickness_; ++px) {
        if (px >= clip_.x && py >= clip_.y && px < clip_.x + clip_.w && py < clip_.y + clip_.h) {
          canvas_.set_pixel(px, py, ink_);
        }
      }
    }
  }

  void segment(double x0, double y0, double x1, double y1) {
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
    for (int k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) / steps;
      dot(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t);
    }
  }

  void ellipse(double cx, double cy, double rx, double ry) {
    const double circumference = 2.0 * std::numbers::pi * std::max(rx, ry);
    const int steps = std::max(8, static_cast<int>(std::ceil(circumference * 2.0)));
    for (int k = 0; k < steps; ++k) {
      const double a = 2.0 * std::numbers::pi * k / steps;
      dot(cx + rx * std::cos(a), cy + ry * std::sin(a));
    }
  }

 private:
  ImageRecord& canvas_;
  Rect clip_;
  int thickness_;
  Rgb ink_;
};

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

std::string padded(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

}  // namespace

const std::vector<std::string>& glyph_classes() {
  static const std::vector<std::string> names{"chair", "table", "cabinet", "chest_of_drawers", "sofa",
                                              "bed",   "mirror", "lamp",  "clock"};
  return names;
}

void draw_glyph(ImageRecord& canvas, std::string_view cls, const Rect& box, Rng& shape, Rng& view,
                Rgb ink) {
  const auto strokes = glyph_strokes(cls, shape);
  const double side = view.uniform(0.78, 0.95) * std::min(box.w, box.h);
  const double ox = box.x + view.uniform(0.0, box.w - side);
  const double oy = box.y + view.uniform(0.0, box.h - side);
  const bool mirror = view.bernoulli(0.5);
  const int thickness =
      std::max(1, static_cast<int>(std::lround(box.w / 16.0 * view.uniform(0.8, 1.25))));
  auto px = [&](double u) { return ox + (mirror ? 1.0 - u : u) * side; };
  auto py = [&](double v) { return oy + v * side; };
  Pen pen(canvas, box, thickness, ink);
  for (const auto& s : strokes) {
    if (s.ellipse) {
      pen.ellipse(px(s.a), py(s.b), s.c * side, s.d * side);
    } else {
      pen.segment(px(s.a), py(s.b), px(s.c), py(s.d));
    }
  }
}

ImageRecord render_scene(int width, int height, std::span<const Box> boxes, const SynthSpec& spec,
                         std::uint64_t shape_seed, std::uint64_t view_seed) {
  Rng rng(derive_seed(view_seed, 0xB6));
  const Rgb background{static_cast<std::uint8_t>(rng.between(190, 245)),
                       static_cast<std::uint8_t>(rng.between(190, 245)),
                       static_cast<std::uint8_t>(rng.between(190, 245))};
  ImageRecord image(width, height, background);
  const Rect full{0, 0, width, height};
  for (int k = 0; k < spec.distractor_strokes; ++k) {
    const auto gray = static_cast<std::uint8_t>(rng.between(110, 170));
    Pen pen(image, full, 1, {gray, gray, gray});
    const double x0 = rng.uniform(0.0, width), y0 = rng.uniform(0.0, height);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double len = rng.uniform(0.2, 0.5) * std::min(width, height);
    pen.segment(x0, y0, x0 + len * std::cos(angle), y0 + len * std::sin(angle));
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    Rng shape(derive_seed(shape_seed, i));
    Rng view(derive_seed(view_seed, i));
    const Rgb ink{static_cast<std::uint8_t>(view.between(10, 90)),
                  static_cast<std::uint8_t>(view.between(10, 90)),
                  static_cast<std::uint8_t>(view.between(10, 90))};
    draw_glyph(image, boxes[i].cls.path(), boxes[i].rect, shape, view, ink);
  }
  if (spec.noise_std > 0.0) {
    for (auto& p : image.pixels) p = to_byte(p + spec.noise_std * rng.normal());
  }
  return image;
}

CorpusManifest generate_synthetic_corpus(const SynthSpec& spec, std::uint64_t seed,
                                         const fs::path& root) {
  if (spec.classes.empty()) throw ConfigError("synth: no classes");
  if (spec.size < 8) throw ConfigError("synth: size must be at least 8");
  if (spec.views_per_artifact == 0) throw ConfigError("synth: views_per_artifact must be positive");
  for (const auto& c : spec.classes) {
    if (std::find(glyph_classes().begin(), glyph_classes().end(), c) == glyph_classes().end()) {
      throw ConfigError("synth: unknown glyph class '" + c + "'");
    }
  }
  const bool cluttered = spec.clutter.objects_per_scene > 0;
  if (cluttered && spec.clutter.canvas < spec.size) {
    throw ConfigError("synth: clutter canvas smaller than object size");
  }

  CorpusManifest manifest;
  manifest.root = root;
  manifest.provenance = "synthetic:seed=" + std::to_string(seed);
  for (const auto& cls : spec.classes) {
    const std::uint64_t class_seed = derive_seed(seed, fnv1a64(cls));
    for (std::size_t i = 0; i < spec.images_per_class; ++i) {
      const std::size_t artifact = i / spec.views_per_artifact;
      const std::uint64_t shape_seed = derive_seed(class_seed, 2 * artifact);
      const std::uint64_t view_seed = derive_seed(class_seed, 2 * i + 1);
      Sample s;
      s.cls = ClassId(cls);
      std::vector<Box> boxes;
      int side = spec.size;
      if (!cluttered) {
        boxes.push_back({Rect{0, 0, spec.size, spec.size}, s.cls});
        s.path = cls + "/" + cls + "_" + padded(i) + ".ppm";
        s.artifact_id = cls + "_a" + padded(artifact);
      } else {
        side = spec.clutter.canvas;
        Rng place(derive_seed(view_seed, 0x91));
        const int span = side - spec.size;
        for (std::size_t k = 0; k < spec.clutter.objects_per_scene; ++k) {
          const ClassId box_cls = k == 0 ? s.cls : ClassId(spec.classes[place.below(spec.classes.size())]);
          Rect r;
          for (int attempt = 0; attempt < 200; ++attempt) {
            r = Rect{place.between(0, span), place.between(0, span), spec.size, spec.size};
            const bool clear = std::all_of(boxes.begin(), boxes.end(), [&](const Box& b) {
              return iou(b.rect, r) <= spec.clutter.max_overlap;
            });
            if (clear) break;
          }
          boxes.push_back({r, box_cls});
        }
        s.path = cls + "/scene_" + padded(i) + ".ppm";
        s.artifact_id = cls + "_s" + padded(i);
        s.depiction = Depiction::kInterior;
        s.boxes = boxes;
      }
      write_ppm(root / s.path, render_scene(side, side, boxes, spec, shape_seed, view_seed));
      manifest.samples.push_back(std::move(s));
    }
  }
  return manifest;
}

void to_json(Json& j, const SynthSpec& spec) {
  j = Json{{"classes", spec.classes},
           {"images_per_class", spec.images_per_class},
           {"size", spec.size},
           {"views_per_artifact", spec.views_per_artifact},
           {"distractor_strokes", spec.distractor_strokes},
           {"noise_std", spec.noise_std},
           {"clutter",
            {{"objects_per_scene", spec.clutter.objects_per_scene},
             {"canvas", spec.clutter.canvas},
             {"max_overlap", spec.clutter.max_overlap}}}};
}

void from_json(const Json& j, SynthSpec& spec) {
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "classes") {
        spec.classes = value.get<std::vector<std::string>>();
      } else if (key == "images_per_class") {
        spec.images_per_class = value.get<std::size_t>();
      } else if (key == "size") {
        spec.size = value.get<int>();
      } else if (key == "views_per_artifact") {
        spec.views_per_artifact = value.get<std::size_t>();
      } else if (key == "distractor_strokes") {
        spec.distractor_strokes = value.get<int>();
      } else if (key == "noise_std") {
        spec.noise_std = value.get<double>();
      } else if (key == "clutter") {
        for (const auto& [ck, cv] : value.items()) {
          if (ck == "objects_per_scene") {
            spec.clutter.objects_per_scene = cv.get<std::size_t>();
          } else if (ck == "canvas") {
            spec.clutter.canvas = cv.get<int>();
          } else if (ck == "max_overlap") {
            spec.clutter.max_overlap = cv.get<double>();
          } else {
            throw ConfigError("synth: unknown key clutter." + ck);
          }
        }
      } else {
        throw ConfigError("synth: unknown key " + key);
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
}

}  // namespace neoc
