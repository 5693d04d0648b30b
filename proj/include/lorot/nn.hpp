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

// Minimal layers with hand-written backward passes. Activations are stored
// channels-last (N x H x W x C) so that a 3x3 convolution is one GEMM between
// the im2col matrix and a (k*k*C_in) x C_out weight matrix.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lorot/common.hpp"
#include "lorot/image.hpp"
#include "lorot/random.hpp"

namespace lorot::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<Matrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const Matrix<T>>;

/// grad[c] += sum over rows of m(r, c), always summed top to bottom. Eigen's
/// vectorized reductions pick a summation order from the buffer alignment,
/// which would make bias gradients depend on where malloc put the data.
template <typename T, typename M>
void add_column_sums(const M& m, std::vector<T>& grad) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    T s = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) s += m(r, c);
    grad[static_cast<std::size_t>(c)] += s;
  }
}

/// Batch of feature maps, N x H x W x C, channels innermost.
template <typename T>
struct FeatureMap {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<T> data;

  FeatureMap() = default;
  FeatureMap(int n_, int h_, int w_, int c_)
      : n(n_), h(h_), w(w_), c(c_), data(static_cast<std::size_t>(n_) * h_ * w_ * c_, T(0)) {}

  std::size_t pixels() const noexcept { return static_cast<std::size_t>(n) * h * w; }
  std::size_t per_sample() const noexcept { return static_cast<std::size_t>(h) * w * c; }
  T* sample(int i) noexcept { return data.data() + i * per_sample(); }
  const T* sample(int i) const noexcept { return data.data() + i * per_sample(); }

  MatrixMap<T> mat() { return MatrixMap<T>(data.data(), pixels(), c); }
  ConstMatrixMap<T> mat() const { return ConstMatrixMap<T>(data.data(), pixels(), c); }
};

/// Stacks images into a batch, converting the scalar type.
template <typename T, typename S>
FeatureMap<T> to_batch(std::span<const Image<S>* const> images) {
  if (images.empty()) throw EmptyInputError("empty batch");
  const auto& first = *images.front();
  FeatureMap<T> fm(static_cast<int>(images.size()), first.height(), first.width(), first.channels());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i]->same_shape(first)) throw DimensionError("batch images differ in shape");
    auto src = images[i]->values();
    std::transform(src.begin(), src.end(), fm.sample(static_cast<int>(i)),
                   [](S v) { return static_cast<T>(v); });
  }
  return fm;
}

template <typename T, typename S>
FeatureMap<T> to_batch(const std::vector<Image<S>>& images) {
  std::vector<const Image<S>*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& im : images) ptrs.push_back(&im);
  return to_batch<T, S>(std::span<const Image<S>* const>(ptrs));
}

enum class ParamGroup { Extractor, PrimaryHead, PretextHead };

template <typename T>
struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::Extractor;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Parameter() = default;
  Parameter(std::string name_, ParamGroup group_, std::vector<int> shape_)
      : name(std::move(name_)), group(group_), shape(std::move(shape_)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    value.assign(n, T(0));
    grad.assign(n, T(0));
  }

  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// k x k convolution, stride 1, "same" zero padding.
template <typename T>
class Conv2d {
 public:
  struct Cache {
    Matrix<T> cols;
    int n = 0, h = 0, w = 0;
  };

  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, ParamGroup group)
      : in_(in_channels),
        out_(out_channels),
        k_(kernel),
        weight_(name + ".weight", group, {kernel * kernel * in_channels, out_channels}),
        bias_(name + ".bias", group, {out_channels}) {}

  void init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (k_ * k_ * in_));
    for (auto& v : weight_.value) v = static_cast<T>(rng.normal() * stddev);
    std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }
  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }

  FeatureMap<T> forward(const FeatureMap<T>& x, Cache* cache) const {
    if (x.c != in_) throw DimensionError("conv input has " + std::to_string(x.c) + " channels, expected " + std::to_string(in_));
    Matrix<T> cols = im2col(x);
    FeatureMap<T> y(x.n, x.h, x.w, out_);
    auto ym = y.mat();
    ym.noalias() = cols * ConstMatrixMap<T>(weight_.value.data(), k_ * k_ * in_, out_);
    ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.value.data(), out_);
    if (cache) {
      cache->cols = std::move(cols);
      cache->n = x.n;
      cache->h = x.h;
      cache->w = x.w;
    }
    return y;
  }

  /// Accumulates parameter gradients; returns the input gradient when asked.
  FeatureMap<T> backward(const FeatureMap<T>& dy, const Cache& cache, bool need_input_grad) {
    const auto dym = dy.mat();
    MatrixMap<T>(weight_.grad.data(), k_ * k_ * in_, out_).noalias() += cache.cols.transpose() * dym;
    add_column_sums(dym, bias_.grad);
    FeatureMap<T> dx;
    if (!need_input_grad) return dx;
    Matrix<T> dcols = dym * ConstMatrixMap<T>(weight_.value.data(), k_ * k_ * in_, out_).transpose();
    dx = FeatureMap<T>(cache.n, cache.h, cache.w, in_);
    col2im(dcols, dx);
    return dx;
  }

 private:
  Matrix<T> im2col(const FeatureMap<T>& x) const {
    const int pad = k_ / 2;
    const int row_len = k_ * k_ * in_;
    Matrix<T> cols(static_cast<Eigen::Index>(x.pixels()), row_len);
    T* out = cols.data();
    for (int n = 0; n < x.n; ++n) {
      const T* src = x.sample(n);
      for (int y = 0; y < x.h; ++y) {
        for (int xx = 0; xx < x.w; ++xx) {
          for (int ky = 0; ky < k_; ++ky) {
            const int sy = y + ky - pad;
            for (int kx = 0; kx < k_; ++kx) {
              const int sx = xx + kx - pad;
              if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) {
                std::fill(out, out + in_, T(0));
              } else {
                std::memcpy(out, src + (static_cast<std::size_t>(sy) * x.w + sx) * in_, sizeof(T) * in_);
              }
              out += in_;
            }
          }
        }
      }
    }
    return cols;
  }

  void col2im(const Matrix<T>& dcols, FeatureMap<T>& dx) const {
    const int pad = k_ / 2;
    const T* in = dcols.data();
    for (int n = 0; n < dx.n; ++n) {
      T* dst = dx.sample(n);
      for (int y = 0; y < dx.h; ++y) {
        for (int xx = 0; xx < dx.w; ++xx) {
          for (int ky = 0; ky < k_; ++ky) {
            const int sy = y + ky - pad;
            for (int kx = 0; kx < k_; ++kx) {
              const int sx = xx + kx - pad;
              if (sy >= 0 && sy < dx.h && sx >= 0 && sx < dx.w) {
                T* d = dst + (static_cast<std::size_t>(sy) * dx.w + sx) * in_;
                for (int c = 0; c < in_; ++c) d[c] += in[c];
              }
              in += in_;
            }
          }
        }
      }
    }
  }

  int in_ = 0, out_ = 0, k_ = 3;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

template <typename T>
void relu_inplace(FeatureMap<T>& x) {
  for (auto& v : x.data) v = v > T(0) ? v : T(0);
}

/// Zeroes gradient entries where the (post-activation) output was not positive.
template <typename T>
void relu_backward_inplace(FeatureMap<T>& dy, const FeatureMap<T>& activated) {
  for (std::size_t i = 0; i < dy.data.size(); ++i)
    if (!(activated.data[i] > T(0))) dy.data[i] = T(0);
}

/// 2x2 max pooling with stride 2. Odd trailing rows and columns are dropped.
template <typename T>
class MaxPool2 {
 public:
  struct Cache {
    std::vector<std::size_t> argmax;
    int n = 0, h = 0, w = 0, c = 0;
  };

  static FeatureMap<T> forward(const FeatureMap<T>& x, Cache* cache) {
    if (x.h < 2 || x.w < 2) throw DimensionError("max pool needs at least 2x2 input");
    FeatureMap<T> y(x.n, x.h / 2, x.w / 2, x.c);
    if (cache) {
      cache->argmax.resize(y.data.size());
      cache->n = x.n;
      cache->h = x.h;
      cache->w = x.w;
      cache->c = x.c;
    }
    std::size_t o = 0;
    for (int n = 0; n < x.n; ++n) {
      const std::size_t base = n * x.per_sample();
      for (int py = 0; py < y.h; ++py) {
        for (int px = 0; px < y.w; ++px) {
          for (int c = 0; c < x.c; ++c, ++o) {
            std::size_t best = base + ((2 * py) * static_cast<std::size_t>(x.w) + 2 * px) * x.c + c;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const std::size_t idx =
                    base + ((2 * py + dy) * static_cast<std::size_t>(x.w) + 2 * px + dx) * x.c + c;
                if (x.data[idx] > x.data[best]) best = idx;
              }
            y.data[o] = x.data[best];
            if (cache) cache->argmax[o] = best;
          }
        }
      }
    }
    return y;
  }

  static FeatureMap<T> backward(const FeatureMap<T>& dy, const Cache& cache) {
    FeatureMap<T> dx(cache.n, cache.h, cache.w, cache.c);
    for (std::size_t i = 0; i < dy.data.size(); ++i) dx.data[cache.argmax[i]] += dy.data[i];
    return dx;
  }
};

/// Fully connected layer: y = x W + b with W stored (in x out).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in, int out, ParamGroup group)
      : in_(in), out_(out), weight_(name + ".weight", group, {in, out}), bias_(name + ".bias", group, {out}) {}

  void init(Rng& rng) {
    const double stddev = std::sqrt(1.0 / in_);
    for (auto& v : weight_.value) v = static_cast<T>(rng.normal() * stddev);
    std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

  int in_features() const noexcept { return in_; }
  int out_features() const noexcept { return out_; }
  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }
  const Parameter<T>& weight() const noexcept { return weight_; }
  const Parameter<T>& bias() const noexcept { return bias_; }

  Matrix<T> forward(const Matrix<T>& x) const {
    if (x.cols() != in_) throw DimensionError("linear input width " + std::to_string(x.cols()) + " != " + std::to_string(in_));
    Matrix<T> y = x * ConstMatrixMap<T>(weight_.value.data(), in_, out_);
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.value.data(), out_);
    return y;
  }

  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& dy) {
    MatrixMap<T>(weight_.grad.data(), in_, out_).noalias() += x.transpose() * dy;
    add_column_sums(dy, bias_.grad);
    return dy * ConstMatrixMap<T>(weight_.value.data(), in_, out_).transpose();
  }

 private:
  int in_ = 0, out_ = 0;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

/// Row-wise numerically stable softmax.
template <typename T>
Matrix<T> softmax(const Matrix<T>& logits) {
  Matrix<T> p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace lorot::nn
