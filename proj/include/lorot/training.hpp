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

// Training strategies for a pretext task next to a supervised classifier:
//
//   Baseline  clean input, primary loss only
//   DA        transformed input, primary loss only (pretext head untouched)
//   MT        transformed input shared by both heads, primary + lambda * pretext
//   PT        clean batch for the primary loss and a separately forwarded
//             transformed batch for the pretext loss
//
// PGD adversarial training wraps the MT step: the batch is transformed first
// and the primary-loss adversary is then crafted around the transformed image,
// so the pretext label still matches the visible patch. With
// adversarial.transform_first off the clean image is attacked and the
// perturbed image is transformed afterwards.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lorot/datasets.hpp"
#include "lorot/hash.hpp"
#include "lorot/loss.hpp"
#include "lorot/model.hpp"
#include "lorot/optim.hpp"
#include "lorot/transforms.hpp"

namespace lorot {

enum class Strategy { Baseline, DA, MT, PT };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Baseline: return "baseline";
    case Strategy::DA: return "da";
    case Strategy::MT: return "mt";
    case Strategy::PT: return "pt";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "baseline") return Strategy::Baseline;
  if (s == "da") return Strategy::DA;
  if (s == "mt") return Strategy::MT;
  if (s == "pt") return Strategy::PT;
  throw ConfigError("training.strategy", "unknown strategy '" + std::string(s) + "'");
}

/// L-infinity PGD settings. Pixel units are the [0, 1] image range.
struct AdversarialConfig {
  bool enabled = false;
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  int train_steps = 10;
  int eval_steps = 20;
  bool random_start = true;
  bool transform_first = true;
  double pixel_min = 0.0;
  double pixel_max = 1.0;

  /// Step size used for an attack of `steps` iterations: 2/255 for up to 20
  /// steps and 0.3/255 for longer attacks.
  static double alpha_for_steps(int steps) { return steps > 20 ? 0.3 / 255.0 : 2.0 / 255.0; }

  void validate() const {
    if (epsilon < 0) throw ConfigError("adversarial.epsilon", "must be non-negative");
    if (alpha < 0) throw ConfigError("adversarial.alpha", "must be non-negative");
    if (epsilon > 0 && alpha > epsilon) throw ConfigError("adversarial.alpha", "must not exceed epsilon");
    if (train_steps < 1) throw ConfigError("adversarial.train_steps", "must be >= 1");
    if (eval_steps < 1) throw ConfigError("adversarial.eval_steps", "must be >= 1");
  }
};

/// Optional crop/flip augmentation, applied before the pretext transform.
struct AugmentConfig {
  int crop_padding = 0;  // random crop after zero padding by this many pixels
  bool horizontal_flip = false;
};

struct TrainingConfig {
  Strategy strategy = Strategy::MT;
  Variant variant = Variant::I;
  double lambda = 0.1;
  int batch_size = 64;
  int epochs = 10;
  OptimizerSpec optimizer;
  AugmentConfig augment;
  AdversarialConfig adversarial;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const {
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw ConfigError("training.lambda", "must be a non-negative number");
    if (batch_size < 1) throw ConfigError("training.batch_size", "must be >= 1");
    if (epochs < 0) throw ConfigError("training.epochs", "must be >= 0");
    if (!(optimizer.lr > 0)) throw ConfigError("optimizer.lr", "must be positive");
    if (optimizer.weight_decay < 0) throw ConfigError("optimizer.weight_decay", "must be non-negative");
    if (optimizer.momentum < 0 || optimizer.momentum >= 1) throw ConfigError("optimizer.momentum", "must be in [0, 1)");
    if (workers < 1) throw ConfigError("training.workers", "must be >= 1");
    if (augment.crop_padding < 0) throw ConfigError("augment.crop_padding", "must be non-negative");
    adversarial.validate();
  }
};

struct StepResult {
  LossValue loss;
  int correct = 0;  // primary-head hits on the primary-loss inputs
  int count = 0;
};

namespace detail {

template <typename T>
int count_correct(const Matrix<T>& probs, std::span<const int> labels) {
  int hits = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg;
    probs.row(i).maxCoeff(&arg);
    hits += static_cast<int>(arg) == labels[i];
  }
  return hits;
}

inline std::vector<const ImageF*> image_ptrs(const std::vector<TransformedSample<float>>& batch) {
  std::vector<const ImageF*> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(&s.image);
  return out;
}

inline std::vector<int> primary_labels(const std::vector<TransformedSample<float>>& batch) {
  std::vector<int> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(s.primary_label);
  return out;
}

inline std::vector<int> pretext_labels(const std::vector<TransformedSample<float>>& batch) {
  std::vector<int> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(s.pretext_label.value());
  return out;
}

template <typename T>
void check_variant(const DualHeadModel<T>& model, const std::vector<TransformedSample<float>>& batch) {
  for (const auto& s : batch)
    if (label_space_size(s.pretext_label.variant()) != model.pretext_classes())
      throw LabelError("pretext labels do not match the model's pretext head");
}

}  // namespace detail

/// Primary-loss-only step on clean images.
template <typename T>
StepResult train_step_baseline(DualHeadModel<T>& model, Optimizer<T>& opt, std::span<const ImageF* const> images,
                               std::span<const int> labels, double lr) {
  const auto fp = model.forward(nn::to_batch<T, float>(images));
  StepResult r;
  r.loss = multitask_loss<T>(fp.primary_probs, Matrix<T>(), labels, {}, 0.0);
  r.correct = detail::count_correct(fp.primary_probs, labels);
  r.count = static_cast<int>(labels.size());
  model.zero_grad();
  model.backward(fp, nll_logit_grad(fp.primary_probs, labels, 1.0), Matrix<T>());
  opt.step(model.parameters(), lr, GroupMask{true, true, false});
  return r;
}

/// Multi-task step: one forward of the transformed batch feeds both heads.
template <typename T>
StepResult train_step_mt(DualHeadModel<T>& model, Optimizer<T>& opt,
                         const std::vector<TransformedSample<float>>& batch, double lambda, double lr) {
  if (batch.empty()) throw EmptyInputError("train_step_mt: empty batch");
  detail::check_variant(model, batch);
  const auto ptrs = detail::image_ptrs(batch);
  const auto y = detail::primary_labels(batch);
  const auto yhat = detail::pretext_labels(batch);
  const auto fp = model.forward(nn::to_batch<T, float>(std::span<const ImageF* const>(ptrs)));
  StepResult r;
  r.loss = multitask_loss<T>(fp.primary_probs, fp.pretext_probs, y, yhat, lambda);
  r.correct = detail::count_correct<T>(fp.primary_probs, y);
  r.count = static_cast<int>(batch.size());
  model.zero_grad();
  // With lambda = 0 the pretext head is outside the loss and is left alone, so
  // MT(0) follows the DA trajectory exactly.
  const bool pretext = lambda > 0;
  model.backward(fp, nll_logit_grad<T>(fp.primary_probs, y, 1.0),
                 pretext ? nll_logit_grad<T>(fp.pretext_probs, yhat, lambda) : Matrix<T>());
  opt.step(model.parameters(), lr, GroupMask{true, true, pretext});
  return r;
}

/// Transformation used as plain augmentation: primary loss on the transformed
/// batch; the pretext head is neither in the loss nor updated.
template <typename T>
StepResult train_step_da(DualHeadModel<T>& model, Optimizer<T>& opt,
                         const std::vector<TransformedSample<float>>& batch, double lr) {
  if (batch.empty()) throw EmptyInputError("train_step_da: empty batch");
  const auto ptrs = detail::image_ptrs(batch);
  const auto y = detail::primary_labels(batch);
  return train_step_baseline<T>(model, opt, ptrs, y, lr);
}

/// Parallel-task step: the clean batch drives the primary loss and the
/// transformed batch, forwarded separately, drives the pretext loss.
template <typename T>
StepResult train_step_pt(DualHeadModel<T>& model, Optimizer<T>& opt, std::span<const ImageF* const> clean,
                         std::span<const int> labels, const std::vector<TransformedSample<float>>& transformed,
                         double lambda, double lr) {
  if (clean.empty() || transformed.empty()) throw EmptyInputError("train_step_pt: empty batch");
  detail::check_variant(model, transformed);
  const auto fp_clean = model.forward(nn::to_batch<T, float>(clean));
  const auto ptrs = detail::image_ptrs(transformed);
  const auto yhat = detail::pretext_labels(transformed);
  const auto fp_t = model.forward(nn::to_batch<T, float>(std::span<const ImageF* const>(ptrs)));
  StepResult r;
  const LossValue primary = multitask_loss<T>(fp_clean.primary_probs, Matrix<T>(), labels, {}, 0.0);
  const LossValue pretext = multitask_loss<T>(fp_t.primary_probs, fp_t.pretext_probs,
                                              detail::primary_labels(transformed), yhat, 1.0);
  r.loss.primary = primary.primary;
  r.loss.pretext = pretext.pretext;
  r.loss.total = r.loss.primary + lambda * r.loss.pretext;
  r.correct = detail::count_correct<T>(fp_clean.primary_probs, labels);
  r.count = static_cast<int>(labels.size());
  model.zero_grad();
  model.backward(fp_clean, nll_logit_grad<T>(fp_clean.primary_probs, labels, 1.0), Matrix<T>());
  const bool use_pretext = lambda > 0;
  if (use_pretext) model.backward(fp_t, Matrix<T>(), nll_logit_grad<T>(fp_t.pretext_probs, yhat, lambda));
  opt.step(model.parameters(), lr, GroupMask{true, true, use_pretext});
  return r;
}

/// Projected gradient ascent on the primary cross-entropy inside the
/// L-infinity ball of radius epsilon around `clean`, intersected with the pixel
/// range. Starts uniformly inside the ball when `random_start` is set.
/// Leaves the model's parameter gradients zeroed.
template <typename T>
std::vector<ImageF> pgd_attack(DualHeadModel<T>& model, std::span<const ImageF* const> clean,
                               std::span<const int> labels, const AdversarialConfig& adv, int steps, double alpha,
                               Rng& rng) {
  if (clean.empty()) throw EmptyInputError("pgd_attack: empty batch");
  if (steps < 1) throw ConfigError("adversarial.steps", "must be >= 1");
  const float eps = static_cast<float>(adv.epsilon);
  const float lo = static_cast<float>(adv.pixel_min), hi = static_cast<float>(adv.pixel_max);
  std::vector<ImageF> x;
  x.reserve(clean.size());
  for (const auto* im : clean) x.push_back(*im);

  // Float bounds of the ball around x0, pulled inward where rounding would put
  // them outside the exact radius.
  auto bounds = [&](float x0, float& b_lo, float& b_hi) {
    b_lo = x0 - eps;
    b_hi = x0 + eps;
    while (static_cast<double>(b_hi) - x0 > adv.epsilon) b_hi = std::nextafter(b_hi, x0);
    while (static_cast<double>(x0) - b_lo > adv.epsilon) b_lo = std::nextafter(b_lo, x0);
  };
  auto project = [&](std::size_t i) {
    auto xv = x[i].values();
    auto x0 = clean[i]->values();
    for (std::size_t j = 0; j < xv.size(); ++j) {
      float b_lo, b_hi;
      bounds(x0[j], b_lo, b_hi);
      const float v = std::clamp(xv[j], b_lo, b_hi);
      xv[j] = std::clamp(v, lo, hi);
    }
  };

  if (adv.random_start && eps > 0) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (auto& v : x[i].values()) v += static_cast<float>(rng.uniform(-adv.epsilon, adv.epsilon));
      project(i);
    }
  }
  for (int s = 0; s < steps; ++s) {
    const auto fp = model.forward(nn::to_batch<T, float>(x));
    model.zero_grad();
    const auto dx = model.backward(fp, nll_logit_grad<T>(fp.primary_probs, labels, 1.0), Matrix<T>(), true);
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto xv = x[i].values();
      const T* g = dx.sample(static_cast<int>(i));
      for (std::size_t j = 0; j < xv.size(); ++j) {
        if (!std::isfinite(static_cast<double>(g[j]))) throw NumericError("pgd_attack: non-finite input gradient");
        const float sign = g[j] > T(0) ? 1.0f : (g[j] < T(0) ? -1.0f : 0.0f);
        xv[j] += static_cast<float>(alpha) * sign;
      }
      project(i);
    }
  }
  model.zero_grad();
  return x;
}

/// PGD adversarial training on top of the MT step. With adversarial training
/// disabled this is exactly `train_step_mt`.
template <typename T>
StepResult adversarial_train_step(DualHeadModel<T>& model, Optimizer<T>& opt,
                                  const std::vector<TransformedSample<float>>& batch, double lambda,
                                  const AdversarialConfig& adv, Rng& rng, double lr,
                                  std::vector<ImageF>* used_inputs = nullptr) {
  if (!adv.enabled) return train_step_mt(model, opt, batch, lambda, lr);
  const auto ptrs = detail::image_ptrs(batch);
  const auto y = detail::primary_labels(batch);
  auto x_adv = pgd_attack<T>(model, ptrs, y, adv, adv.train_steps, adv.alpha, rng);
  std::vector<TransformedSample<float>> adv_batch = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) adv_batch[i].image = std::move(x_adv[i]);
  if (used_inputs) {
    used_inputs->clear();
    for (const auto& s : adv_batch) used_inputs->push_back(s.image);
  }
  return train_step_mt(model, opt, adv_batch, lambda, lr);
}

/// Random crop (after zero padding) and horizontal flip.
inline ImageF augment_image(const ImageF& im, const AugmentConfig& aug, Rng& rng) {
  if (aug.crop_padding == 0 && !aug.horizontal_flip) return im;
  const int p = aug.crop_padding;
  const int dy = p ? static_cast<int>(rng.uniform_int(-p, p)) : 0;
  const int dx = p ? static_cast<int>(rng.uniform_int(-p, p)) : 0;
  const bool flip = aug.horizontal_flip && rng.uniform_int(0, 1) == 1;
  ImageF out(im.height(), im.width(), im.channels(), 0.0f);
  for (int y = 0; y < im.height(); ++y)
    for (int x = 0; x < im.width(); ++x) {
      const int sy = y + dy, sx0 = x + dx;
      const int sx = flip ? im.width() - 1 - sx0 : sx0;
      if (sy < 0 || sy >= im.height() || sx < 0 || sx >= im.width()) continue;
      std::copy(im.pixel(sy, sx), im.pixel(sy, sx) + im.channels(), out.pixel(y, x));
    }
  return out;
}

struct EpochRecord {
  int epoch = 0;
  double primary_loss = 0;
  double pretext_loss = 0;
  double train_accuracy = 0;  // percent, primary head on the primary-loss inputs
  double val_accuracy = -1;   // percent; -1 without a validation set
  double learning_rate = 0;
  std::uint64_t forwarded_samples = 0;  // cumulative
  std::uint64_t seed = 0;
  double wall_time_s = 0;  // excluded from the checksum
};

/// Per-epoch training record, serialized one JSON object per line.
struct TrainingHistory {
  std::vector<EpochRecord> epochs;

  /// Fingerprint over every deterministic field (wall time excluded).
  std::string checksum() const {
    Fnv1a h;
    for (const auto& e : epochs) {
      h.value(e.epoch).value(e.primary_loss).value(e.pretext_loss).value(e.train_accuracy);
      h.value(e.val_accuracy).value(e.learning_rate).value(e.forwarded_samples).value(e.seed);
    }
    return h.hex();
  }
};

/// Primary-head probabilities for a whole dataset, evaluated in batches.
template <typename M>
Matrix<float> predict_dataset(const M& model, const std::vector<ImageF>& images, int batch_size = 256) {
  if (images.empty()) throw EmptyInputError("predict_dataset: no images");
  Matrix<float> out;
  for (std::size_t b = 0; b < images.size(); b += batch_size) {
    const std::size_t e = std::min(images.size(), b + batch_size);
    std::vector<const ImageF*> ptrs;
    for (std::size_t i = b; i < e; ++i) ptrs.push_back(&images[i]);
    Matrix<float> p = model.predict(std::span<const ImageF* const>(ptrs)).template cast<float>();
    if (b == 0) out.resize(static_cast<Eigen::Index>(images.size()), p.cols());
    out.middleRows(static_cast<Eigen::Index>(b), p.rows()) = p;
  }
  return out;
}

template <typename T>
struct TrainingResult {
  DualHeadModel<T> model;
  TrainingHistory history;
};

/// Full training loop. In single-worker mode the (seed, config, data) triple
/// fixes the whole parameter trajectory.
template <typename T = float>
TrainingResult<T> run_training(const TrainingConfig& cfg, const ModelSpec& spec, const LabeledDataset& train,
                               const LabeledDataset* val = nullptr) {
  cfg.validate();
  enable_flush_to_zero();
  if (train.size() == 0) throw EmptyInputError("run_training: empty training set");
  if (train.num_classes != spec.num_classes) {
    throw ConfigError("model.num_classes", "model has " + std::to_string(spec.num_classes) +
                                               " classes but the dataset has " + std::to_string(train.num_classes));
  }
  ModelSpec s = spec;
  if (cfg.strategy != Strategy::Baseline) s.variant = cfg.variant;
  TrainingResult<T> result{DualHeadModel<T>(s), {}};
  auto& model = result.model;
  Optimizer<T> opt(cfg.optimizer);

  const std::size_t n = train.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<std::size_t> order(n);
  const auto start = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed({cfg.seed, 1, static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order.begin(), order.end());
    double sum_primary = 0, sum_pretext = 0;
    long long correct = 0, seen = 0;
    double lr = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      lr = scheduled_lr(cfg.optimizer, epoch + static_cast<double>(b) / batches, cfg.epochs);
      Rng rng(derive_seed({cfg.seed, 2, static_cast<std::uint64_t>(epoch), b}));
      const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      std::vector<ImageF> clean;
      std::vector<int> labels;
      clean.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) {
        clean.push_back(augment_image(train.images[order[i]], cfg.augment, rng));
        labels.push_back(train.labels[order[i]]);
      }
      StepResult r;
      if (cfg.strategy == Strategy::Baseline) {
        std::vector<const ImageF*> ptrs;
        for (const auto& im : clean) ptrs.push_back(&im);
        if (cfg.adversarial.enabled) {
          auto adv = pgd_attack<T>(model, ptrs, labels, cfg.adversarial, cfg.adversarial.train_steps,
                                   cfg.adversarial.alpha, rng);
          clean = std::move(adv);
          ptrs.clear();
          for (const auto& im : clean) ptrs.push_back(&im);
        }
        r = train_step_baseline<T>(model, opt, ptrs, labels, lr);
      } else {
        const bool attack_clean =
            cfg.strategy == Strategy::MT && cfg.adversarial.enabled && !cfg.adversarial.transform_first;
        if (attack_clean) {
          std::vector<const ImageF*> ptrs;
          for (const auto& im : clean) ptrs.push_back(&im);
          clean = pgd_attack<T>(model, ptrs, labels, cfg.adversarial, cfg.adversarial.train_steps,
                                cfg.adversarial.alpha, rng);
        }
        auto transformed = transform_batch<float>(clean, labels, cfg.variant, rng, cfg.workers);
        switch (cfg.strategy) {
          case Strategy::DA: r = train_step_da<T>(model, opt, transformed, lr); break;
          case Strategy::MT:
            r = attack_clean ? train_step_mt<T>(model, opt, transformed, cfg.lambda, lr)
                             : adversarial_train_step<T>(model, opt, transformed, cfg.lambda, cfg.adversarial, rng, lr);
            break;
          case Strategy::PT: {
            std::vector<const ImageF*> ptrs;
            for (const auto& im : clean) ptrs.push_back(&im);
            r = train_step_pt<T>(model, opt, ptrs, labels, transformed, cfg.lambda, lr);
            break;
          }
          default: break;
        }
      }
      sum_primary += r.loss.primary * r.count;
      sum_pretext += r.loss.pretext * r.count;
      correct += r.correct;
      seen += r.count;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.primary_loss = sum_primary / seen;
    rec.pretext_loss = sum_pretext / seen;
    rec.train_accuracy = 100.0 * correct / seen;
    rec.learning_rate = lr;
    rec.forwarded_samples = model.forwarded_samples();
    rec.seed = cfg.seed;
    if (val && val->size() > 0) {
      const auto probs = predict_dataset(model, val->images);
      rec.val_accuracy = 100.0 * detail::count_correct<float>(probs, val->labels) / val->size();
    }
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(rec);
  }
  return result;
}

}  // namespace lorot
