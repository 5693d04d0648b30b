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

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lorot/nn.hpp"
#include "lorot/transforms.hpp"

namespace lorot {

using nn::FeatureMap;
using nn::Matrix;
using nn::ParamGroup;
using nn::Parameter;

enum class PoolingMode { GAP, ReducedDense, Dense };

inline std::string_view to_string(PoolingMode m) {
  switch (m) {
    case PoolingMode::GAP: return "gap";
    case PoolingMode::ReducedDense: return "reduced-dense";
    case PoolingMode::Dense: return "dense";
  }
  return "?";
}

inline PoolingMode parse_pooling(std::string_view s) {
  if (s == "gap") return PoolingMode::GAP;
  if (s == "reduced-dense" || s == "reduced_dense") return PoolingMode::ReducedDense;
  if (s == "dense") return PoolingMode::Dense;
  throw ConfigError("model.pooling", "unknown pooling mode '" + std::string(s) + "'");
}

struct Shape3 {
  int h = 0, w = 0, c = 0;
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Width of the pooled vector for a C x h x w feature map.
inline int pooled_width(PoolingMode mode, Shape3 f) {
  switch (mode) {
    case PoolingMode::GAP: return f.c;
    case PoolingMode::ReducedDense: return 4 * f.c;
    case PoolingMode::Dense: return f.h * f.w * f.c;
  }
  return 0;
}

namespace detail {

// Row and column boundaries of the 2x2 quadrants of an h x w map.
inline void quadrant_bounds(int q, int h, int w, int& y0, int& y1, int& x0, int& x1) {
  const int hy = h / 2, hx = w / 2;
  y0 = (q / 2) ? hy : 0;
  y1 = (q / 2) ? h : hy;
  x0 = (q % 2) ? hx : 0;
  x1 = (q % 2) ? w : hx;
}

}  // namespace detail

/// Pools a feature-map batch into an N x width matrix.
///   GAP           per-channel spatial mean (width C)
///   ReducedDense  mean over each 2x2 quadrant, laid out (quadrant, channel) (width 4C)
///   Dense         flatten in (y, x, channel) order (width h*w*C)
template <typename T>
Matrix<T> pool_features(const FeatureMap<T>& f, PoolingMode mode) {
  const Shape3 s{f.h, f.w, f.c};
  if (mode == PoolingMode::ReducedDense && (f.h < 2 || f.w < 2)) {
    throw DimensionError("reduced-dense pooling needs a feature map of at least 2x2");
  }
  Matrix<T> out = Matrix<T>::Zero(f.n, pooled_width(mode, s));
  for (int n = 0; n < f.n; ++n) {
    const T* src = f.sample(n);
    switch (mode) {
      case PoolingMode::GAP: {
        for (int p = 0; p < f.h * f.w; ++p)
          for (int c = 0; c < f.c; ++c) out(n, c) += src[p * f.c + c];
        out.row(n) /= static_cast<T>(f.h * f.w);
        break;
      }
      case PoolingMode::ReducedDense: {
        for (int q = 0; q < 4; ++q) {
          int y0, y1, x0, x1;
          detail::quadrant_bounds(q, f.h, f.w, y0, y1, x0, x1);
          const T inv = T(1) / static_cast<T>((y1 - y0) * (x1 - x0));
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
              for (int c = 0; c < f.c; ++c) out(n, q * f.c + c) += src[(y * f.w + x) * f.c + c] * inv;
        }
        break;
      }
      case PoolingMode::Dense: {
        for (std::size_t i = 0; i < f.per_sample(); ++i) out(n, static_cast<Eigen::Index>(i)) = src[i];
        break;
      }
    }
  }
  return out;
}

/// Adds the gradient of `pool_features` (given dL/dpooled) into `df`.
template <typename T>
void pool_features_backward(const Matrix<T>& dpooled, PoolingMode mode, FeatureMap<T>& df) {
  for (int n = 0; n < df.n; ++n) {
    T* dst = df.sample(n);
    switch (mode) {
      case PoolingMode::GAP: {
        const T inv = T(1) / static_cast<T>(df.h * df.w);
        for (int p = 0; p < df.h * df.w; ++p)
          for (int c = 0; c < df.c; ++c) dst[p * df.c + c] += dpooled(n, c) * inv;
        break;
      }
      case PoolingMode::ReducedDense: {
        for (int q = 0; q < 4; ++q) {
          int y0, y1, x0, x1;
          detail::quadrant_bounds(q, df.h, df.w, y0, y1, x0, x1);
          const T inv = T(1) / static_cast<T>((y1 - y0) * (x1 - x0));
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
              for (int c = 0; c < df.c; ++c) dst[(y * df.w + x) * df.c + c] += dpooled(n, q * df.c + c) * inv;
        }
        break;
      }
      case PoolingMode::Dense: {
        for (std::size_t i = 0; i < df.per_sample(); ++i) dst[i] += dpooled(n, static_cast<Eigen::Index>(i));
        break;
      }
    }
  }
}

/// Everything a backward pass through an extractor needs.
template <typename T>
struct ExtractorTape {
  std::vector<typename nn::Conv2d<T>::Cache> conv;
  std::vector<typename nn::MaxPool2<T>::Cache> pool;
  std::vector<FeatureMap<T>> activations;
};

/// Trainable map from an image batch to a C_f x h_f x w_f feature-map batch.
template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string kind() const = 0;
  virtual Shape3 output_shape(Shape3 input) const = 0;
  virtual FeatureMap<T> forward(const FeatureMap<T>& x, ExtractorTape<T>* tape) const = 0;
  /// Accumulates parameter gradients. Returns dL/dinput if requested.
  virtual FeatureMap<T> backward(const FeatureMap<T>& dfeatures, const ExtractorTape<T>& tape,
                                 bool need_input_grad) = 0;
  virtual std::vector<Parameter<T>*> parameters() = 0;
  virtual void init(Rng& rng) = 0;
  virtual std::unique_ptr<FeatureExtractor> clone() const = 0;
};

/// Plain stack of conv3x3 + ReLU blocks with 2x2 max pooling between blocks.
/// An empty channel list gives the identity extractor (features = input).
template <typename T>
class ReferenceCNN final : public FeatureExtractor<T> {
 public:
  ReferenceCNN(int in_channels, std::vector<int> channels) : channels_(std::move(channels)) {
    int c = in_channels;
    for (std::size_t i = 0; i < channels_.size(); ++i) {
      convs_.emplace_back("conv" + std::to_string(i), c, channels_[i], 3, ParamGroup::Extractor);
      c = channels_[i];
    }
  }

  std::string kind() const override { return "reference-cnn"; }

  Shape3 output_shape(Shape3 in) const override {
    Shape3 s = in;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      s.c = channels_[i];
      if (i + 1 < convs_.size()) {
        s.h /= 2;
        s.w /= 2;
      }
    }
    return s;
  }

  FeatureMap<T> forward(const FeatureMap<T>& x, ExtractorTape<T>* tape) const override {
    if (tape) {
      tape->conv.assign(convs_.size(), {});
      tape->pool.assign(convs_.size(), {});
      tape->activations.assign(convs_.size(), {});
    }
    FeatureMap<T> h = x;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      h = convs_[i].forward(h, tape ? &tape->conv[i] : nullptr);
      nn::relu_inplace(h);
      if (tape) tape->activations[i] = h;
      if (i + 1 < convs_.size()) h = nn::MaxPool2<T>::forward(h, tape ? &tape->pool[i] : nullptr);
    }
    return h;
  }

  FeatureMap<T> backward(const FeatureMap<T>& dfeatures, const ExtractorTape<T>& tape,
                         bool need_input_grad) override {
    FeatureMap<T> d = dfeatures;
    for (std::size_t i = convs_.size(); i-- > 0;) {
      if (i + 1 < convs_.size()) d = nn::MaxPool2<T>::backward(d, tape.pool[i]);
      nn::relu_backward_inplace(d, tape.activations[i]);
      d = convs_[i].backward(d, tape.conv[i], i > 0 || need_input_grad);
    }
    return d;
  }

  std::vector<Parameter<T>*> parameters() override {
    std::vector<Parameter<T>*> ps;
    for (auto& c : convs_) {
      ps.push_back(&c.weight());
      ps.push_back(&c.bias());
    }
    return ps;
  }

  void init(Rng& rng) override {
    for (auto& c : convs_) c.init(rng);
  }

  std::unique_ptr<FeatureExtractor<T>> clone() const override {
    return std::make_unique<ReferenceCNN>(*this);
  }

 private:
  std::vector<int> channels_;
  std::vector<nn::Conv2d<T>> convs_;
};

/// Residual backbone adapter: a stem convolution followed by one basic block
/// (conv-ReLU-conv plus identity skip) per stage. Stages after the first
/// downsample by 2x2 max pooling and project channels with a 1x1 convolution.
/// No batch normalization.
template <typename T>
class ResidualCNN final : public FeatureExtractor<T> {
 public:
  ResidualCNN(int in_channels, std::vector<int> stage_channels) : channels_(std::move(stage_channels)) {
    if (channels_.empty()) throw ConfigError("model.channels", "residual backbone needs at least one stage");
    stem_ = nn::Conv2d<T>("stem", in_channels, channels_[0], 3, ParamGroup::Extractor);
    for (std::size_t s = 0; s < channels_.size(); ++s) {
      const std::string p = "stage" + std::to_string(s);
      if (s > 0) proj_.emplace_back(p + ".proj", channels_[s - 1], channels_[s], 1, ParamGroup::Extractor);
      conv_a_.emplace_back(p + ".a", channels_[s], channels_[s], 3, ParamGroup::Extractor);
      conv_b_.emplace_back(p + ".b", channels_[s], channels_[s], 3, ParamGroup::Extractor);
    }
  }

  std::string kind() const override { return "residual-cnn"; }

  Shape3 output_shape(Shape3 in) const override {
    Shape3 s{in.h, in.w, channels_.back()};
    for (std::size_t i = 1; i < channels_.size(); ++i) {
      s.h /= 2;
      s.w /= 2;
    }
    return s;
  }

  // Tape layout: conv = [stem, (proj_s), a_s, b_s ...]; activations = [stem_out, h_s, out_s ...];
  // pool = one per downsampling stage.
  FeatureMap<T> forward(const FeatureMap<T>& x, ExtractorTape<T>* tape) const override {
    if (tape) {
      tape->conv.clear();
      tape->pool.clear();
      tape->activations.clear();
    }
    auto conv_cache = [&]() -> typename nn::Conv2d<T>::Cache* {
      if (!tape) return nullptr;
      tape->conv.emplace_back();
      return &tape->conv.back();
    };
    FeatureMap<T> h = stem_.forward(x, conv_cache());
    nn::relu_inplace(h);
    if (tape) tape->activations.push_back(h);
    for (std::size_t s = 0; s < channels_.size(); ++s) {
      if (s > 0) {
        typename nn::MaxPool2<T>::Cache* pc = nullptr;
        if (tape) {
          tape->pool.emplace_back();
          pc = &tape->pool.back();
        }
        h = nn::MaxPool2<T>::forward(h, pc);
        h = proj_[s - 1].forward(h, conv_cache());
      }
      FeatureMap<T> a = conv_a_[s].forward(h, conv_cache());
      nn::relu_inplace(a);
      if (tape) tape->activations.push_back(a);
      FeatureMap<T> b = conv_b_[s].forward(a, conv_cache());
      for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] += h.data[i];
      nn::relu_inplace(b);
      if (tape) tape->activations.push_back(b);
      h = std::move(b);
    }
    return h;
  }

  FeatureMap<T> backward(const FeatureMap<T>& dfeatures, const ExtractorTape<T>& tape,
                         bool need_input_grad) override {
    std::size_t ci = tape.conv.size(), ai = tape.activations.size(), pi = tape.pool.size();
    FeatureMap<T> d = dfeatures;
    for (std::size_t s = channels_.size(); s-- > 0;) {
      nn::relu_backward_inplace(d, tape.activations[--ai]);  // block output
      FeatureMap<T> da = conv_b_[s].backward(d, tape.conv[--ci], true);
      nn::relu_backward_inplace(da, tape.activations[--ai]);
      FeatureMap<T> dh = conv_a_[s].backward(da, tape.conv[--ci], true);
      for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += d.data[i];
      if (s > 0) {
        dh = proj_[s - 1].backward(dh, tape.conv[--ci], true);
        dh = nn::MaxPool2<T>::backward(dh, tape.pool[--pi]);
      }
      d = std::move(dh);
    }
    nn::relu_backward_inplace(d, tape.activations[--ai]);
    return stem_.backward(d, tape.conv[--ci], need_input_grad);
  }

  std::vector<Parameter<T>*> parameters() override {
    std::vector<Parameter<T>*> ps{&stem_.weight(), &stem_.bias()};
    for (std::size_t s = 0; s < channels_.size(); ++s) {
      if (s > 0) {
        ps.push_back(&proj_[s - 1].weight());
        ps.push_back(&proj_[s - 1].bias());
      }
      ps.push_back(&conv_a_[s].weight());
      ps.push_back(&conv_a_[s].bias());
      ps.push_back(&conv_b_[s].weight());
      ps.push_back(&conv_b_[s].bias());
    }
    return ps;
  }

  void init(Rng& rng) override {
    stem_.init(rng);
    for (std::size_t s = 0; s < channels_.size(); ++s) {
      if (s > 0) proj_[s - 1].init(rng);
      conv_a_[s].init(rng);
      conv_b_[s].init(rng);
      // Start each residual branch near zero so the block begins close to identity.
      for (auto& v : conv_b_[s].weight().value) v *= T(0.1);
    }
  }

  std::unique_ptr<FeatureExtractor<T>> clone() const override {
    return std::make_unique<ResidualCNN>(*this);
  }

 private:
  std::vector<int> channels_;
  nn::Conv2d<T> stem_;
  std::vector<nn::Conv2d<T>> proj_;
  std::vector<nn::Conv2d<T>> conv_a_;
  std::vector<nn::Conv2d<T>> conv_b_;
};

/// Architecture of a dual-head model. Everything needed to rebuild it.
struct ModelSpec {
  std::string backbone = "reference-cnn";  // or "residual-cnn"
  Shape3 input{32, 32, 3};
  std::vector<int> channels{16, 32, 64};
  int num_classes = 10;
  Variant variant = Variant::I;  // fixes the pretext label space
  PoolingMode pooling = PoolingMode::GAP;
  float input_mean = 0.5f;
  float input_std = 0.25f;
  std::uint64_t init_seed = 0;

  int pretext_classes() const { return label_space_size(variant); }
};

/// Forward record for one batch: probabilities plus what backward needs.
template <typename T>
struct ForwardPass {
  FeatureMap<T> input;  // normalized
  ExtractorTape<T> tape;
  FeatureMap<T> features;
  Matrix<T> pooled_primary;
  Matrix<T> pooled_pretext;
  Matrix<T> primary_logits;
  Matrix<T> pretext_logits;
  Matrix<T> primary_probs;  // P_u
  Matrix<T> pretext_probs;  // P_v
  bool recorded = false;
};

/// Shared feature extractor with a primary softmax head (GAP features) and a
/// pretext softmax head over the pooled features selected by `pooling`.
/// Under GAP both heads read the same pooled vector.
template <typename T>
class DualHeadModel {
 public:
  explicit DualHeadModel(ModelSpec spec) : spec_(std::move(spec)) {
    if (spec_.num_classes < 2) throw ConfigError("model.num_classes", "need at least 2 classes");
    if (spec_.backbone == "reference-cnn") {
      extractor_ = std::make_unique<ReferenceCNN<T>>(spec_.input.c, spec_.channels);
    } else if (spec_.backbone == "residual-cnn") {
      extractor_ = std::make_unique<ResidualCNN<T>>(spec_.input.c, spec_.channels);
    } else {
      throw ConfigError("model.backbone", "unknown backbone '" + spec_.backbone + "'");
    }
    feature_shape_ = extractor_->output_shape(spec_.input);
    if (feature_shape_.h < 1 || feature_shape_.w < 1) throw DimensionError("input too small for backbone");
    if (spec_.pooling == PoolingMode::ReducedDense && (feature_shape_.h < 2 || feature_shape_.w < 2)) {
      throw DimensionError("reduced-dense pooling needs feature maps of at least 2x2");
    }
    primary_ = nn::Linear<T>("primary", feature_shape_.c, spec_.num_classes, ParamGroup::PrimaryHead);
    pretext_ = nn::Linear<T>("pretext", pooled_width(spec_.pooling, feature_shape_), spec_.pretext_classes(),
                             ParamGroup::PretextHead);
    Rng rng(spec_.init_seed);
    extractor_->init(rng);
    primary_.init(rng);
    pretext_.init(rng);
  }

  DualHeadModel(const DualHeadModel& o)
      : spec_(o.spec_),
        extractor_(o.extractor_->clone()),
        feature_shape_(o.feature_shape_),
        primary_(o.primary_),
        pretext_(o.pretext_) {}
  DualHeadModel& operator=(const DualHeadModel& o) {
    if (this != &o) *this = DualHeadModel(o);
    return *this;
  }
  DualHeadModel(DualHeadModel&&) noexcept = default;
  DualHeadModel& operator=(DualHeadModel&&) noexcept = default;

  const ModelSpec& spec() const noexcept { return spec_; }
  Shape3 feature_shape() const noexcept { return feature_shape_; }
  int num_classes() const noexcept { return spec_.num_classes; }
  int pretext_classes() const noexcept { return spec_.pretext_classes(); }
  FeatureExtractor<T>& extractor() noexcept { return *extractor_; }
  nn::Linear<T>& primary_head() noexcept { return primary_; }
  nn::Linear<T>& pretext_head() noexcept { return pretext_; }

  /// One extractor pass serving both heads. With `record` the pass keeps what
  /// `backward` needs.
  ForwardPass<T> forward(const FeatureMap<T>& batch, bool record = true) const {
    if (batch.h != spec_.input.h || batch.w != spec_.input.w || batch.c != spec_.input.c) {
      throw DimensionError("batch shape " + std::to_string(batch.h) + "x" + std::to_string(batch.w) + "x" +
                           std::to_string(batch.c) + " does not match model input " +
                           std::to_string(spec_.input.h) + "x" + std::to_string(spec_.input.w) + "x" +
                           std::to_string(spec_.input.c));
    }
    ForwardPass<T> fp;
    fp.recorded = record;
    fp.input = batch;
    const T mean = static_cast<T>(spec_.input_mean), inv_std = T(1) / static_cast<T>(spec_.input_std);
    for (auto& v : fp.input.data) v = (v - mean) * inv_std;
    ++extractor_calls_;
    if (record) forwarded_samples_ += static_cast<std::uint64_t>(batch.n);
    fp.features = extractor_->forward(fp.input, record ? &fp.tape : nullptr);
    fp.pooled_primary = pool_features(fp.features, PoolingMode::GAP);
    fp.pooled_pretext =
        spec_.pooling == PoolingMode::GAP ? fp.pooled_primary : pool_features(fp.features, spec_.pooling);
    fp.primary_logits = primary_.forward(fp.pooled_primary);
    fp.pretext_logits = pretext_.forward(fp.pooled_pretext);
    fp.primary_probs = nn::softmax(fp.primary_logits);
    fp.pretext_probs = nn::softmax(fp.pretext_logits);
    if (!record) {
      fp.input = {};
      fp.features = {};
    }
    return fp;
  }

  /// Backpropagates logit gradients into parameter gradients (accumulating).
  /// Either logit gradient may be empty (0 rows) to skip that head. Returns the
  /// gradient with respect to the un-normalized input when requested.
  FeatureMap<T> backward(const ForwardPass<T>& fp, const Matrix<T>& d_primary_logits,
                         const Matrix<T>& d_pretext_logits, bool need_input_grad = false) {
    if (!fp.recorded) throw Error("backward needs a recorded forward pass");
    FeatureMap<T> dfeat(fp.features.n, fp.features.h, fp.features.w, fp.features.c);
    if (d_primary_logits.rows() > 0) {
      Matrix<T> dp = primary_.backward(fp.pooled_primary, d_primary_logits);
      pool_features_backward(dp, PoolingMode::GAP, dfeat);
    }
    if (d_pretext_logits.rows() > 0) {
      Matrix<T> dp = pretext_.backward(fp.pooled_pretext, d_pretext_logits);
      pool_features_backward(dp, spec_.pooling, dfeat);
    }
    FeatureMap<T> dx = extractor_->backward(dfeat, fp.tape, need_input_grad);
    if (need_input_grad) {
      const T inv_std = T(1) / static_cast<T>(spec_.input_std);
      for (auto& v : dx.data) v *= inv_std;
    }
    return dx;
  }

  /// Primary-class probabilities only, without recording.
  Matrix<T> predict_proba(const FeatureMap<T>& batch) const { return forward(batch, false).primary_probs; }

  Matrix<T> predict(std::span<const ImageF* const> images) const {
    return predict_proba(nn::to_batch<T, float>(images));
  }

  std::vector<Parameter<T>*> parameters() {
    auto ps = extractor_->parameters();
    ps.push_back(&primary_.weight());
    ps.push_back(&primary_.bias());
    ps.push_back(&pretext_.weight());
    ps.push_back(&pretext_.bias());
    return ps;
  }

  std::vector<const Parameter<T>*> parameters() const {
    auto ps = const_cast<DualHeadModel*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  /// Extractor invocations (training and inference).
  std::uint64_t extractor_calls() const noexcept { return extractor_calls_; }
  /// Samples pushed through recorded (trainable) forward passes.
  std::uint64_t forwarded_samples() const noexcept { return forwarded_samples_; }
  void reset_counters() noexcept {
    extractor_calls_ = 0;
    forwarded_samples_ = 0;
  }

 private:
  ModelSpec spec_;
  std::unique_ptr<FeatureExtractor<T>> extractor_;
  Shape3 feature_shape_;
  nn::Linear<T> primary_;
  nn::Linear<T> pretext_;
  mutable std::uint64_t extractor_calls_ = 0;
  mutable std::uint64_t forwarded_samples_ = 0;
};

using Model = DualHeadModel<float>;

}  // namespace lorot
