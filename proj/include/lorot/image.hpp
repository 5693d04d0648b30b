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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lorot/common.hpp"

namespace lorot {

/// Dense H x W x C image stored row-major with interleaved channels (HWC):
/// the value of channel c at row y, column x lives at (y * W + x) * C + c.
///
/// Float images hold values in [0, 1]; the transforms in this library are pure
/// pixel permutations and work for any value range.
template <typename T>
class Image {
 public:
  using value_type = T;

  static constexpr int kMinSide = 4;

  Image() = default;

  Image(int height, int width, int channels, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < kMinSide || width < kMinSide || channels < 1) {
      throw DimensionError("image must be at least 4x4x1, got " + std::to_string(height) + "x" +
                           std::to_string(width) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  T& operator()(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

  /// Pointer to the C contiguous channel values of pixel (y, x).
  T* pixel(int y, int x) noexcept { return data_.data() + index(y, x); }
  const T* pixel(int y, int x) const noexcept { return data_.data() + index(y, x); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image& a, const Image& b) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using ImageF = Image<float>;

}  // namespace lorot
