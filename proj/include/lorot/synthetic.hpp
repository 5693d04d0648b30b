// Copyright 2026 The LoRot Authors.
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

// Built-in synthetic datasets, so that every experiment runs without downloads.
//
//   blobs      two Gaussian clusters in pixel space (2 classes)
//   one-pixel  uniform noise; the centre pixel alone decides the class (2 classes)
//   glyphs     CIFAR-style 32x32 RGB scenes: one large glyph on a cluttered,
//              textured background. The ten classes are five pairs of glyphs
//              that are rotations of one another (L / upside-down L, C / U,
//              b / q, d / p, T / sideways T), so global orientation carries
//              class information while any single quadrant does not decide
//              the class.
//   textures   CIFAR-style scenes where class evidence is split between a
//              full-frame stripe texture (orientation and period) and a small
//              glyph. Rotating the whole frame moves the stripes into another
//              class; rotating one patch mostly does not.
//   textures-ood  stripes at arbitrary angles with held-out glyphs
//   glyphs-ood the same scenes with glyphs from a disjoint, held-out alphabet
//   shapes-ood the same scenes with an amorphous blob in place of the glyph
//   noise      smooth random colour fields with pixel noise, no object

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lorot/datasets.hpp"
#include "lorot/image.hpp"
#include "lorot/random.hpp"

namespace lorot::synthetic {

using Glyph = std::array<const char*, 5>;

// Ten in-distribution glyphs, in class order. Consecutive pairs are rotations
// of each other.
inline const std::array<Glyph, 10>& class_glyphs() {
  static const std::array<Glyph, 10> g = {{
      {"X....", "X....", "X....", "X....", "XXXXX"},  // L
      {"XXXXX", "....X", "....X", "....X", "....X"},  // L turned 180
      {".XXXX", "X....", "X....", "X....", ".XXXX"},  // C
      {"X...X", "X...X", "X...X", "X...X", ".XXX."},  // U (C turned 90)
      {"X....", "X....", "XXXX.", "X...X", "XXXX."},  // b
      {".XXXX", "X...X", ".XXXX", "....X", "....X"},  // q (b turned 180)
      {"....X", "....X", ".XXXX", "X...X", ".XXXX"},  // d
      {"XXXX.", "X...X", "XXXX.", "X....", "X...."},  // p (d turned 180)
      {"XXXXX", "..X..", "..X..", "..X..", "..X.."},  // T
      {"X....", "X....", "XXXXX", "X....", "X...."},  // T turned 90
  }};
  return g;
}

inline const std::array<const char*, 10>& class_names() {
  static const std::array<const char*, 10> n = {"L", "L180", "C", "U", "b", "q", "d", "p", "T", "T90"};
  return n;
}

// Held-out glyphs for near out-of-distribution sets.
inline const std::array<Glyph, 8>& ood_glyphs() {
  static const std::array<Glyph, 8> g = {{
      {"XXXXX", "X....", "XXXX.", "X....", "XXXXX"},  // E
      {"XXXXX", "X....", "XXXX.", "X....", "X...."},  // F
      {"X...X", "X...X", "XXXXX", "X...X", "X...X"},  // H
      {"X...X", "X..X.", "XXX..", "X..X.", "X...X"},  // K
      {"XXXXX", "...X.", "..X..", ".X...", "XXXXX"},  // Z
      {"X...X", ".X.X.", "..X..", ".X.X.", "X...X"},  // X
      {".XXX.", "X...X", "X...X", "X...X", ".XXX."},  // O
      {"XXXX.", "X...X", "XXXX.", "X..X.", "X...X"},  // R
  }};
  return g;
}

struct SceneOptions {
  int size = 32;
  double pixel_noise = 0.08;     // std of per-pixel Gaussian noise
  int clutter_strokes = 3;       // random short strokes in the background
  int min_scale = 4;             // glyph cell size in pixels (glyph = 5 cells)
  int max_scale = 5;
  double stroke_jitter = 0.15;   // per-cell intensity jitter inside the glyph
};

namespace detail {

inline std::array<float, 3> random_color(Rng& rng, double lo, double hi) {
  return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
          static_cast<float>(rng.uniform(lo, hi))};
}

// Smooth background: bilinear blend of four random corner colours.
inline void paint_background(ImageF& im, Rng& rng) {
  std::array<std::array<float, 3>, 4> corners;
  for (auto& c : corners) c = random_color(rng, 0.05, 0.55);
  const int h = im.height(), w = im.width();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float fy = static_cast<float>(y) / (h - 1), fx = static_cast<float>(x) / (w - 1);
      for (int c = 0; c < 3; ++c) {
        const float top = corners[0][c] * (1 - fx) + corners[1][c] * fx;
        const float bot = corners[2][c] * (1 - fx) + corners[3][c] * fx;
        im(y, x, c) = top * (1 - fy) + bot * fy;
      }
    }
}

inline void paint_clutter(ImageF& im, Rng& rng, int strokes) {
  const int h = im.height(), w = im.width();
  for (int s = 0; s < strokes; ++s) {
    const auto col = random_color(rng, 0.2, 0.8);
    const bool vertical = rng.uniform_int(0, 1) == 1;
    const int len = static_cast<int>(rng.uniform_int(3, 7));
    const int y0 = static_cast<int>(rng.uniform_int(0, h - 1)), x0 = static_cast<int>(rng.uniform_int(0, w - 1));
    for (int t = 0; t < len; ++t) {
      const int y = vertical ? y0 + t : y0, x = vertical ? x0 : x0 + t;
      if (y >= h || x >= w) break;
      for (int c = 0; c < 3; ++c) im(y, x, c) = col[c];
    }
  }
}

// Paints a 5x5 cell mask scaled by `scale` at (top, left).
template <typename Mask>
void paint_mask(ImageF& im, Rng& rng, const Mask& mask, int scale, int top, int left, double jitter) {
  auto base = random_color(rng, 0.55, 1.0);
  // Keep the glyph clearly brighter than the background in at least one channel.
  base[rng.uniform_int(0, 2)] = 1.0f;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      if (mask[r][c] != 'X') continue;
      const float j = static_cast<float>(1.0 - rng.uniform(0.0, jitter));
      for (int dy = 0; dy < scale; ++dy)
        for (int dx = 0; dx < scale; ++dx) {
          const int y = top + r * scale + dy, x = left + c * scale + dx;
          if (y < 0 || y >= im.height() || x < 0 || x >= im.width()) continue;
          for (int ch = 0; ch < 3; ++ch) im(y, x, ch) = base[ch] * j;
        }
    }
}

inline void add_noise(ImageF& im, Rng& rng, double sigma) {
  for (auto& v : im.values()) v = std::clamp(v + static_cast<float>(rng.normal() * sigma), 0.0f, 1.0f);
}

// Random 5x5 blob: a connected random walk over cells, with as many cells as a
// typical glyph.
inline std::array<std::array<char, 5>, 5> random_blob(Rng& rng) {
  std::array<std::array<char, 5>, 5> m{};
  for (auto& row : m) row.fill('.');
  int r = 2, c = 2, filled = 0;
  const int target = static_cast<int>(rng.uniform_int(9, 13));
  while (filled < target) {
    if (m[r][c] != 'X') {
      m[r][c] = 'X';
      ++filled;
    }
    switch (rng.uniform_int(0, 3)) {
      case 0: r = std::max(0, r - 1); break;
      case 1: r = std::min(4, r + 1); break;
      case 2: c = std::max(0, c - 1); break;
      default: c = std::min(4, c + 1); break;
    }
  }
  return m;
}

inline LabeledDataset make_empty(std::string name, int classes, std::vector<std::string> names) {
  LabeledDataset ds;
  ds.name = std::move(name);
  ds.num_classes = classes;
  ds.class_names = std::move(names);
  return ds;
}

}  // namespace detail

/// One scene with glyph/mask `mask`; the image stream is keyed by `rng`.
template <typename Mask>
ImageF render_scene(const Mask& mask, Rng& rng, const SceneOptions& opt) {
  ImageF im(opt.size, opt.size, 3);
  detail::paint_background(im, rng);
  detail::paint_clutter(im, rng, opt.clutter_strokes);
  const int scale = static_cast<int>(rng.uniform_int(opt.min_scale, opt.max_scale));
  const int extent = 5 * scale;
  const int top = static_cast<int>(rng.uniform_int(0, std::max(0, opt.size - extent)));
  const int left = static_cast<int>(rng.uniform_int(0, std::max(0, opt.size - extent)));
  detail::paint_mask(im, rng, mask, scale, top, left, opt.stroke_jitter);
  detail::add_noise(im, rng, opt.pixel_noise);
  return im;
}

/// Balanced glyph scenes, `per_class` images for each of `classes` (<= 10)
/// classes, interleaved by class. Image i depends only on (seed, i).
inline LabeledDataset glyphs(int per_class, std::uint64_t seed, const SceneOptions& opt = {}, int classes = 10) {
  if (classes < 2 || classes > 10) throw ConfigError("classes", "glyphs supports 2..10 classes");
  std::vector<std::string> names(class_names().begin(), class_names().begin() + classes);
  auto ds = detail::make_empty("glyphs", classes, names);
  for (int i = 0; i < per_class * classes; ++i) {
    const int k = i % classes;
    Rng rng(derive_seed({seed, 0x676c79ULL, static_cast<std::uint64_t>(i)}));
    ds.images.push_back(render_scene(class_glyphs()[k], rng, opt));
    ds.labels.push_back(k);
  }
  return ds;
}

/// Per-class texture recipe for `textures`: stripe angle (degrees) and period.
struct TextureClass {
  double angle;
  double period;
};

// Pairs (2j, 2j+1) are global rotations of each other: the glyph and the
// stripe direction turn together.
inline const std::array<TextureClass, 10>& texture_classes() {
  static const std::array<TextureClass, 10> t = {{
      {0, 5}, {180, 5},     // L, L180
      {30, 7}, {120, 7},    // C, U
      {60, 9}, {240, 9},    // b, q
      {150, 5}, {330, 5},   // d, p
      {90, 9}, {180, 9},    // T, T90
  }};
  return t;
}

namespace detail {

inline void paint_stripes(ImageF& im, Rng& rng, double angle_deg, double period) {
  const double a = (angle_deg + rng.uniform(-8.0, 8.0)) * 3.14159265358979323846 / 180.0;
  const double p = period * rng.uniform(0.85, 1.15);
  const double phase = rng.uniform(0.0, 2 * 3.14159265358979323846);
  const auto c0 = random_color(rng, 0.05, 0.45), c1 = random_color(rng, 0.35, 0.8);
  const double ca = std::cos(a), sa = std::sin(a);
  for (int y = 0; y < im.height(); ++y)
    for (int x = 0; x < im.width(); ++x) {
      const double t = 0.5 + 0.5 * std::sin(2 * 3.14159265358979323846 * (x * ca - y * sa) / p + phase);
      for (int c = 0; c < 3; ++c) im(y, x, c) = static_cast<float>(c0[c] * (1 - t) + c1[c] * t);
    }
}

}  // namespace detail

/// Striped textures with a localized discriminative glyph. Class k has its own
/// stripe direction and period plus glyph k, so most of the image carries class
/// evidence that survives a local rotation while a global rotation maps each
/// class onto its partner.
inline LabeledDataset textures(int per_class, std::uint64_t seed, const SceneOptions& opt = {}, int classes = 10) {
  if (classes < 2 || classes > 10) throw ConfigError("classes", "textures supports 2..10 classes");
  std::vector<std::string> names(class_names().begin(), class_names().begin() + classes);
  auto ds = detail::make_empty("textures", classes, names);
  for (int i = 0; i < per_class * classes; ++i) {
    const int k = i % classes;
    Rng rng(derive_seed({seed, 0x746578ULL, static_cast<std::uint64_t>(i)}));
    ImageF im(opt.size, opt.size, 3);
    detail::paint_stripes(im, rng, texture_classes()[k].angle, texture_classes()[k].period);
    detail::paint_clutter(im, rng, opt.clutter_strokes);
    const int scale = static_cast<int>(rng.uniform_int(opt.min_scale, opt.max_scale));
    const int extent = 5 * scale;
    const int top = static_cast<int>(rng.uniform_int(0, std::max(0, opt.size - extent)));
    const int left = static_cast<int>(rng.uniform_int(0, std::max(0, opt.size - extent)));
    detail::paint_mask(im, rng, class_glyphs()[k], scale, top, left, opt.stroke_jitter);
    detail::add_noise(im, rng, opt.pixel_noise);
    ds.images.push_back(std::move(im));
    ds.labels.push_back(k);
  }
  return ds;
}

/// Near out-of-distribution textures: stripes with a uniformly random
/// direction and period and a glyph from the held-out alphabet (8 groups).
inline LabeledDataset textures_ood(int count, std::uint64_t seed, const SceneOptions& opt = {}) {
  auto ds = detail::make_empty("textures-ood", 8, {"E", "F", "H", "K", "Z", "X", "O", "R"});
  for (int i = 0; i < count; ++i) {
    const int k = i % 8;
    Rng rng(derive_seed({seed, 0x74786fULL, static_cast<std::uint64_t>(i)}));
    ImageF im(opt.size, opt.size, 3);
    detail::paint_stripes(im, rng, rng.uniform(0.0, 360.0), rng.uniform(4.0, 10.0));
    detail::paint_clutter(im, rng, opt.clutter_strokes);
    const int scale = static_cast<int>(rng.uniform_int(opt.min_scale, opt.max_scale));
    const int extent = 5 * scale;
    const int top = static_cast<int>(rng.uniform_int(0, std::max(0, opt.size - extent)));
    const int left = static_cast<int>(rng.uniform_int(0, std::max(0, opt.size - extent)));
    detail::paint_mask(im, rng, ood_glyphs()[k], scale, top, left, opt.stroke_jitter);
    detail::add_noise(im, rng, opt.pixel_noise);
    ds.images.push_back(std::move(im));
    ds.labels.push_back(k);
  }
  return ds;
}

/// Scenes with held-out glyphs. Labels index the held-out alphabet (8 groups).
inline LabeledDataset glyphs_ood(int count, std::uint64_t seed, const SceneOptions& opt = {}) {
  auto ds = detail::make_empty("glyphs-ood", 8, {"E", "F", "H", "K", "Z", "X", "O", "R"});
  for (int i = 0; i < count; ++i) {
    const int k = i % 8;
    Rng rng(derive_seed({seed, 0x6f6f64ULL, static_cast<std::uint64_t>(i)}));
    ds.images.push_back(render_scene(ood_glyphs()[k], rng, opt));
    ds.labels.push_back(k);
  }
  return ds;
}

/// Scenes whose object is an amorphous random blob (single group).
inline LabeledDataset shapes_ood(int count, std::uint64_t seed, const SceneOptions& opt = {}) {
  auto ds = detail::make_empty("shapes-ood", 1, {"blob"});
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed({seed, 0x626c6fULL, static_cast<std::uint64_t>(i)}));
    const auto blob = detail::random_blob(rng);
    ds.images.push_back(render_scene(blob, rng, opt));
    ds.labels.push_back(0);
  }
  return ds;
}

/// Object-free smooth colour fields with clutter and pixel noise (single group).
inline LabeledDataset noise(int count, std::uint64_t seed, const SceneOptions& opt = {}) {
  auto ds = detail::make_empty("noise", 1, {"noise"});
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed({seed, 0x6e6f69ULL, static_cast<std::uint64_t>(i)}));
    ImageF im(opt.size, opt.size, 3);
    detail::paint_background(im, rng);
    detail::paint_clutter(im, rng, opt.clutter_strokes + 4);
    detail::add_noise(im, rng, opt.pixel_noise);
    ds.images.push_back(std::move(im));
    ds.labels.push_back(0);
  }
  return ds;
}

/// Two Gaussian clusters in pixel space: class k has per-pixel mean 0.35 + 0.3 k.
inline LabeledDataset blobs(int count, std::uint64_t seed, int size = 8, int channels = 3) {
  auto ds = detail::make_empty("blobs", 2, {"low", "high"});
  for (int i = 0; i < count; ++i) {
    const int k = i % 2;
    Rng rng(derive_seed({seed, 0x626c62ULL, static_cast<std::uint64_t>(i)}));
    ImageF im(size, size, channels, 0.35f + 0.3f * k);
    detail::add_noise(im, rng, 0.1);
    ds.images.push_back(std::move(im));
    ds.labels.push_back(k);
  }
  return ds;
}

/// Uniform noise images whose centre pixel is 0 (class 0) or 1 (class 1).
inline LabeledDataset one_pixel(int count, std::uint64_t seed, int size = 8) {
  auto ds = detail::make_empty("one-pixel", 2, {"dark", "bright"});
  for (int i = 0; i < count; ++i) {
    const int k = i % 2;
    Rng rng(derive_seed({seed, 0x707831ULL, static_cast<std::uint64_t>(i)}));
    ImageF im(size, size, 1);
    for (auto& v : im.values()) v = static_cast<float>(rng.uniform(0.25, 0.75));
    im(size / 2, size / 2) = static_cast<float>(k);
    ds.images.push_back(std::move(im));
    ds.labels.push_back(k);
  }
  return ds;
}

}  // namespace lorot::synthetic
