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

// Localizable rotation transforms.
//
// LoRot-I rotates one randomly sized and placed square patch and labels the
// sample with the rotation (4 classes). LoRot-E rotates one cell of a K x K
// grid and labels the sample with (cell, rotation), 16 classes for K = 2. The
// four (cell, 0 degree) labels are kept, so a quarter of LoRot-E samples are
// left untouched. Global rotation is the classic whole-image baseline.
//
// Conventions fixed here so that labels are portable across checkpoints:
//   * rotation index r means 90 * r degrees counter-clockwise;
//   * LoRot-E labels pack as 4 * q + r, q row-major from the top-left cell.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "lorot/common.hpp"
#include "lorot/image.hpp"
#include "lorot/random.hpp"

namespace lorot {

enum class Variant { I, E, GlobalRot };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::I: return "lorot-i";
    case Variant::E: return "lorot-e";
    case Variant::GlobalRot: return "rotation";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "lorot-i" || s == "I" || s == "i") return Variant::I;
  if (s == "lorot-e" || s == "E" || s == "e") return Variant::E;
  if (s == "rotation" || s == "rot" || s == "global") return Variant::GlobalRot;
  throw ConfigError("variant", "unknown variant '" + std::string(s) + "'");
}

/// Number of pretext classes for a variant.
constexpr int label_space_size(Variant v) { return v == Variant::E ? 16 : 4; }

/// A multiple of 90 degrees, counter-clockwise.
class Rotation {
 public:
  constexpr Rotation() = default;
  constexpr explicit Rotation(int index) : index_(index) {
    if (index < 0 || index > 3) throw LabelError("rotation index must be in [0, 4)");
  }
  constexpr int index() const noexcept { return index_; }
  constexpr int degrees() const noexcept { return 90 * index_; }
  constexpr Rotation then(Rotation other) const noexcept {
    Rotation r;
    r.index_ = (index_ + other.index_) % 4;
    return r;
  }
  friend constexpr bool operator==(Rotation, Rotation) = default;

 private:
  int index_ = 0;
};

/// Square region designated for rotation.
struct PatchSpec {
  int top_x = 0;
  int top_y = 0;
  int side = 0;
  std::optional<int> cell_index;  // set when the patch comes from a grid

  friend bool operator==(const PatchSpec&, const PatchSpec&) = default;

  bool contains(int y, int x) const noexcept {
    return x >= top_x && x < top_x + side && y >= top_y && y < top_y + side;
  }

  bool fits(int height, int width) const noexcept {
    return top_x >= 0 && top_y >= 0 && top_x + side <= width && top_y + side <= height;
  }
};

/// Pretext label. For I and GlobalRot the value is the rotation index; for E it
/// is 4 * cell + rotation.
class LoRotLabel {
 public:
  constexpr LoRotLabel() = default;
  constexpr LoRotLabel(Variant variant, int value) : variant_(variant), value_(value) {
    if (value < 0 || value >= label_space_size(variant)) {
      throw LabelError("pretext label " + std::to_string(value) + " outside label space of " +
                       std::string(to_string(variant)));
    }
  }

  static constexpr LoRotLabel encode_e(int cell, int rotation) {
    if (cell < 0 || cell > 3) throw LabelError("LoRot-E cell must be in [0, 4)");
    return LoRotLabel(Variant::E, 4 * cell + Rotation(rotation).index());
  }

  constexpr Variant variant() const noexcept { return variant_; }
  constexpr int value() const noexcept { return value_; }
  constexpr Rotation rotation() const { return Rotation(value_ % 4); }
  /// Grid cell for LoRot-E labels; 0 otherwise.
  constexpr int cell() const noexcept { return variant_ == Variant::E ? value_ / 4 : 0; }

  friend constexpr bool operator==(LoRotLabel, LoRotLabel) = default;

 private:
  Variant variant_ = Variant::I;
  int value_ = 0;
};

/// LoRot-I patch sampling: side uniform on the integers [2, min(W/2, H/2)],
/// then a top-left corner uniform over all positions that keep the patch inside.
inline PatchSpec sample_patch_i(Rng& rng, int height, int width) {
  if (std::min(height, width) < 4) {
    throw DimensionError("LoRot-I needs min(H, W) >= 4, got " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  const int max_side = std::min(width / 2, height / 2);
  PatchSpec p;
  p.side = static_cast<int>(rng.uniform_int(2, max_side));
  p.top_x = static_cast<int>(rng.uniform_int(0, width - p.side));
  p.top_y = static_cast<int>(rng.uniform_int(0, height - p.side));
  return p;
}

/// Cell `cell` (row-major) of a K x K grid over a square image.
inline PatchSpec grid_cell(int height, int width, int grid, int cell) {
  if (grid < 1) throw DimensionError("grid dimension must be >= 1");
  if (height != width) {
    throw DimensionError("LoRot-E needs a square image, got " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  if (height % grid != 0) {
    throw DimensionError("image side " + std::to_string(height) + " is not divisible by grid " +
                         std::to_string(grid));
  }
  if (cell < 0 || cell >= grid * grid) throw LabelError("grid cell index out of range");
  const int side = height / grid;
  if (side < 2) throw DimensionError("grid cells must be at least 2 pixels wide");
  PatchSpec p;
  p.side = side;
  p.top_y = (cell / grid) * side;
  p.top_x = (cell % grid) * side;
  p.cell_index = cell;
  return p;
}

/// Uniformly chosen cell of a K x K grid.
inline PatchSpec sample_cell_e(Rng& rng, int height, int width, int grid = 2) {
  // Validate geometry before consuming randomness.
  grid_cell(height, width, grid, 0);
  const int cell = static_cast<int>(rng.uniform_int(0, grid * grid - 1));
  return grid_cell(height, width, grid, cell);
}

/// Uniform label over the variant's full label space, identity labels included.
inline LoRotLabel sample_label(Rng& rng, Variant variant) {
  return LoRotLabel(variant, static_cast<int>(rng.uniform_int(0, label_space_size(variant) - 1)));
}

namespace detail {

// Source coordinates (within an n x n block) of output position (i, j) after a
// counter-clockwise rotation by r quarter turns.
inline void rotated_source(int r, int n, int i, int j, int& si, int& sj) {
  switch (r) {
    case 1: si = j; sj = n - 1 - i; break;
    case 2: si = n - 1 - i; sj = n - 1 - j; break;
    case 3: si = n - 1 - j; sj = i; break;
    default: si = i; sj = j; break;
  }
}

}  // namespace detail

/// Rotates the square patch in place of a copy of `image`. Pixels outside the
/// patch are copied unchanged; inside, the move is an exact permutation.
template <typename T>
Image<T> apply_lorot(const Image<T>& image, const PatchSpec& patch, Rotation rotation) {
  if (patch.side < 2) throw DimensionError("patch side must be >= 2");
  if (!patch.fits(image.height(), image.width())) {
    throw OutOfBoundsError("patch (" + std::to_string(patch.top_x) + ", " +
                           std::to_string(patch.top_y) + ", side " + std::to_string(patch.side) +
                           ") exceeds a " + std::to_string(image.height()) + "x" +
                           std::to_string(image.width()) + " image");
  }
  Image<T> out = image;
  const int r = rotation.index();
  if (r == 0) return out;
  const int n = patch.side;
  const int c = image.channels();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      int si, sj;
      detail::rotated_source(r, n, i, j, si, sj);
      const T* src = image.pixel(patch.top_y + si, patch.top_x + sj);
      std::copy(src, src + c, out.pixel(patch.top_y + i, patch.top_x + j));
    }
  }
  return out;
}

/// Whole-image rotation. Quarter and three-quarter turns require a square image.
template <typename T>
Image<T> apply_global_rotation(const Image<T>& image, Rotation rotation) {
  if (rotation.index() % 2 == 1 && image.height() != image.width()) {
    throw DimensionError("global rotation by " + std::to_string(rotation.degrees()) +
                         " degrees requires a square image");
  }
  if (rotation.index() == 2 && image.height() != image.width()) {
    Image<T> out = image;
    const int h = image.height(), w = image.width(), c = image.channels();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const T* src = image.pixel(h - 1 - y, w - 1 - x);
        std::copy(src, src + c, out.pixel(y, x));
      }
    return out;
  }
  PatchSpec whole;
  whole.side = image.height();
  return apply_lorot(image, whole, rotation);
}

/// Transformed image with its primary and pretext labels.
template <typename T>
struct TransformedSample {
  Image<T> image;
  int primary_label = 0;
  LoRotLabel pretext_label;
  PatchSpec patch;
};

/// Draws one pretext label (and patch) for `variant` and applies it.
///
/// LoRot-I always samples a patch, even for the identity rotation, so the
/// stream position does not depend on the drawn label.
template <typename T>
TransformedSample<T> transform_one(const Image<T>& image, int primary_label, Variant variant,
                                   Rng& rng, int grid = 2) {
  TransformedSample<T> s;
  s.primary_label = primary_label;
  switch (variant) {
    case Variant::I: {
      s.pretext_label = sample_label(rng, Variant::I);
      s.patch = sample_patch_i(rng, image.height(), image.width());
      break;
    }
    case Variant::E: {
      if (grid != 2) throw DimensionError("the 16-way LoRot-E label space assumes a 2x2 grid");
      s.pretext_label = sample_label(rng, Variant::E);
      s.patch = grid_cell(image.height(), image.width(), grid, s.pretext_label.cell());
      break;
    }
    case Variant::GlobalRot: {
      s.pretext_label = sample_label(rng, Variant::GlobalRot);
      if (image.height() != image.width()) throw DimensionError("global rotation needs a square image");
      s.patch.side = image.height();
      break;
    }
  }
  s.image = apply_lorot(image, s.patch, s.pretext_label.rotation());
  return s;
}

template <typename T>
struct LabeledImageRef {
  const Image<T>* image;
  int label;
};

/// Transforms a batch with one independent draw per sample.
///
/// A single base seed is drawn from `rng`; sample i then uses a stream derived
/// from (base seed, i). Outputs are therefore identical for any worker count.
template <typename T>
std::vector<TransformedSample<T>> transform_batch(std::span<const LabeledImageRef<T>> batch,
                                                  Variant variant, Rng& rng, int workers = 1) {
  if (batch.empty()) throw EmptyInputError("transform_batch: empty batch");
  const std::uint64_t base = rng.next_u64();
  std::vector<TransformedSample<T>> out(batch.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng local(derive_seed({base, i}));
      out[i] = transform_one(*batch[i].image, batch[i].label, variant, local);
    }
  };
  workers = std::max(1, std::min<int>(workers, static_cast<int>(batch.size())));
  if (workers == 1) {
    run(0, batch.size());
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (batch.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, e = std::min(batch.size(), b + chunk);
      if (b >= e) continue;
      pool.emplace_back([&, w, b, e] {
        try {
          run(b, e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return out;
}

template <typename T>
std::vector<TransformedSample<T>> transform_batch(const std::vector<Image<T>>& images,
                                                  const std::vector<int>& labels, Variant variant,
                                                  Rng& rng, int workers = 1) {
  std::vector<LabeledImageRef<T>> refs;
  refs.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) refs.push_back({&images[i], labels.at(i)});
  return transform_batch<T>(std::span<const LabeledImageRef<T>>(refs), variant, rng, workers);
}

}  // namespace lorot
