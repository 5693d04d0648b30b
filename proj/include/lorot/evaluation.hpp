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

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lorot/datasets.hpp"
#include "lorot/registry.hpp"
#include "lorot/training.hpp"
#include "lorot/transforms.hpp"

namespace lorot {

/// Anything that maps an image batch to a row-stochastic probability matrix.
template <typename M>
concept ProbabilisticClassifier = requires(const M& m, std::span<const ImageF* const> batch) {
  { m.predict(batch) };
  { m.num_classes() } -> std::convertible_to<int>;
};

// ---------------------------------------------------------------------------
// Scores on single probability rows

inline constexpr double kRowTolerance = 1e-4;

template <typename T>
void validate_probability_row(std::span<const T> p) {
  if (p.empty()) throw ProbabilityError("empty probability row");
  double sum = 0;
  for (T v : p) {
    if (!(v >= T(0)) || !std::isfinite(static_cast<double>(v))) throw ProbabilityError("negative or non-finite probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kRowTolerance) throw ProbabilityError("probability row sums to " + std::to_string(sum));
}

/// KL(p || uniform) = sum_c p_c log(C p_c), with 0 log 0 = 0. Higher means more
/// confident, i.e. more in-distribution.
template <typename T>
double kl_to_uniform(std::span<const T> p) {
  validate_probability_row(p);
  const double c = static_cast<double>(p.size());
  double kl = 0;
  for (T v : p)
    if (v > T(0)) kl += v * std::log(c * v);
  return std::max(kl, 0.0);
}

template <typename T>
double max_softmax(std::span<const T> p) {
  validate_probability_row(p);
  return static_cast<double>(*std::max_element(p.begin(), p.end()));
}

enum class ScoreKind { KLToUniform, MaxSoftmax };

inline std::string_view to_string(ScoreKind k) { return k == ScoreKind::KLToUniform ? "kl" : "max-softmax"; }

inline ScoreKind parse_score_kind(std::string_view s) {
  if (s == "kl" || s == "kl-to-uniform") return ScoreKind::KLToUniform;
  if (s == "msp" || s == "max-softmax") return ScoreKind::MaxSoftmax;
  throw ConfigError("score", "unknown score kind '" + std::string(s) + "'");
}

template <typename T>
double score_row(std::span<const T> p, ScoreKind kind) {
  return kind == ScoreKind::KLToUniform ? kl_to_uniform(p) : max_softmax(p);
}

// ---------------------------------------------------------------------------
// AUROC

/// P(in-score > out-score) + 0.5 P(tie), by the Mann-Whitney rank sum with
/// midranks for ties. Computed in integers, so the result equals an exhaustive
/// pair count divided by n*m exactly.
inline double auroc(std::span<const double> in_scores, std::span<const double> out_scores) {
  if (in_scores.empty() || out_scores.empty()) throw EmptyInputError("auroc: both score sets must be non-empty");
  struct Entry {
    double score;
    bool in;
  };
  std::vector<Entry> all;
  all.reserve(in_scores.size() + out_scores.size());
  for (double s : in_scores) {
    if (std::isnan(s)) throw NumericError("auroc: NaN score");
    all.push_back({s, true});
  }
  for (double s : out_scores) {
    if (std::isnan(s)) throw NumericError("auroc: NaN score");
    all.push_back({s, false});
  }
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });
  // Twice the rank sum of the in-distribution scores; a tie group spanning
  // 1-based ranks i..j gives every member twice-midrank i + j.
  unsigned long long twice_rank_sum = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j + 1 < all.size() && all[j + 1].score == all[i].score) ++j;
    const unsigned long long twice_mid = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (all[k].in) twice_rank_sum += twice_mid;
    i = j + 1;
  }
  const unsigned long long n = in_scores.size(), m = out_scores.size();
  const unsigned long long twice_u = twice_rank_sum - n * (n + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * n * m);
}

// ---------------------------------------------------------------------------
// Dataset-level metrics

template <typename M>
Matrix<float> predict_all(const M& model, const std::vector<ImageF>& images, int batch_size = 256) {
  return predict_dataset(model, images, batch_size);
}

struct AccuracyResult {
  double top1 = 0;                // percent
  std::optional<double> top5;     // percent, when requested and >= 5 classes
  std::size_t count = 0;
};

inline AccuracyResult accuracy_from_probs(const Matrix<float>& probs, std::span<const int> labels, bool want_top5 = false) {
  if (probs.rows() == 0) throw EmptyInputError("accuracy: empty dataset");
  long long hit1 = 0, hit5 = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const float target = probs(i, labels[i]);
    int strictly_above = 0, tied_before = 0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      if (probs(i, c) > target) ++strictly_above;
      else if (probs(i, c) == target && c < labels[i]) ++tied_before;  // argmax breaks ties to the lowest index
    }
    const int rank = strictly_above + tied_before;
    hit1 += rank == 0;
    hit5 += rank < 5;
  }
  AccuracyResult r;
  r.count = static_cast<std::size_t>(probs.rows());
  r.top1 = 100.0 * static_cast<double>(hit1) / static_cast<double>(r.count);
  if (want_top5 && probs.cols() >= 5) r.top5 = 100.0 * static_cast<double>(hit5) / static_cast<double>(r.count);
  return r;
}

template <ProbabilisticClassifier M>
AccuracyResult accuracy(const M& model, const LabeledDataset& ds, bool want_top5 = false) {
  if (ds.size() == 0) throw EmptyInputError("accuracy: empty dataset");
  return accuracy_from_probs(predict_all(model, ds.images), ds.labels, want_top5);
}

/// The transformation whose distribution shift `affinity` measures.
enum class ShiftTransform { Identity, GlobalRotation, LoRotI, LoRotE };

inline std::string_view to_string(ShiftTransform t) {
  switch (t) {
    case ShiftTransform::Identity: return "identity";
    case ShiftTransform::GlobalRotation: return "rotation";
    case ShiftTransform::LoRotI: return "lorot-i";
    case ShiftTransform::LoRotE: return "lorot-e";
  }
  return "?";
}

inline ShiftTransform parse_shift_transform(std::string_view s) {
  if (s == "identity") return ShiftTransform::Identity;
  if (s == "rotation" || s == "rot") return ShiftTransform::GlobalRotation;
  if (s == "lorot-i") return ShiftTransform::LoRotI;
  if (s == "lorot-e") return ShiftTransform::LoRotE;
  throw ConfigError("transform", "unknown transform '" + std::string(s) + "'");
}

struct AffinityOptions {
  std::uint64_t seed = 0;
  bool include_identity_labels = true;  // sample over the full label space
};

/// D'_val: one transform draw per image. Image i uses a stream derived from
/// (seed, i), so the result does not depend on dataset order elsewhere.
inline LabeledDataset shifted_copy(const LabeledDataset& ds, ShiftTransform t, const AffinityOptions& opt) {
  LabeledDataset out = ds;
  if (t == ShiftTransform::Identity) return out;
  const Variant v = t == ShiftTransform::GlobalRotation ? Variant::GlobalRot
                    : t == ShiftTransform::LoRotI       ? Variant::I
                                                        : Variant::E;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Rng rng(derive_seed({opt.seed, 0x616666ULL, i}));
    TransformedSample<float> s;
    do {
      s = transform_one(ds.images[i], ds.labels[i], v, rng);
    } while (!opt.include_identity_labels && s.pretext_label.rotation().index() == 0);
    out.images[i] = std::move(s.image);
  }
  return out;
}

struct AffinityResult {
  double clean_accuracy = 0;    // percent
  double shifted_accuracy = 0;  // percent
  double affinity = 0;          // percent: 100 * shifted / clean
  std::size_t clean_correct = 0;
  std::size_t shifted_correct = 0;
};

namespace detail {

inline std::size_t correct_count(const Matrix<float>& probs, std::span<const int> labels) {
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg;
    probs.row(i).maxCoeff(&arg);
    hits += static_cast<int>(arg) == labels[i];
  }
  return hits;
}

}  // namespace detail

/// Affinity = 100 * A(m, D'_val) / A(m, D_val). The ratio is taken between the
/// correct counts, so the identity transform gives exactly 100.
template <ProbabilisticClassifier M>
AffinityResult affinity(const M& model, const LabeledDataset& val, ShiftTransform transform,
                        const AffinityOptions& opt = {}) {
  if (val.size() == 0) throw EmptyInputError("affinity: empty validation set");
  AffinityResult r;
  r.clean_correct = detail::correct_count(predict_all(model, val.images), val.labels);
  const auto shifted = shifted_copy(val, transform, opt);
  r.shifted_correct = detail::correct_count(predict_all(model, shifted.images), shifted.labels);
  if (r.clean_correct == 0) throw UndefinedAffinityError("affinity undefined: clean accuracy is zero");
  const double n = static_cast<double>(val.size());
  r.clean_accuracy = 100.0 * static_cast<double>(r.clean_correct) / n;
  r.shifted_accuracy = 100.0 * static_cast<double>(r.shifted_correct) / n;
  r.affinity = 100.0 * (static_cast<double>(r.shifted_correct) / static_cast<double>(r.clean_correct));
  return r;
}

// ---------------------------------------------------------------------------
// OOD detection

struct OODScoreReport {
  ScoreKind score_kind = ScoreKind::KLToUniform;
  std::vector<double> in_scores;
  std::vector<double> out_scores;
  double auroc = 0;  // in [0, 1]; > 0.5 means in-distribution scores higher

  double recompute_auroc() const { return lorot::auroc(in_scores, out_scores); }
};

inline std::vector<double> score_rows(const Matrix<float>& probs, ScoreKind kind) {
  std::vector<double> s(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const Eigen::Matrix<float, 1, Eigen::Dynamic> row = probs.row(i);
    s[i] = score_row<float>(std::span<const float>(row.data(), row.size()), kind);
  }
  return s;
}

template <ProbabilisticClassifier M>
OODScoreReport ood_evaluate(const M& model, const OODEvalPair& pair, ScoreKind kind = ScoreKind::KLToUniform) {
  OODScoreReport r;
  r.score_kind = kind;
  r.in_scores = score_rows(predict_all(model, pair.in_dist.images), kind);
  r.out_scores = score_rows(predict_all(model, pair.out_dist.images), kind);
  r.auroc = lorot::auroc(r.in_scores, r.out_scores);
  return r;
}

/// Per-group mean max-softmax confidence for in- and out-of-distribution data,
/// with the raw per-sample values kept for audit.
struct ConfidenceReport {
  std::vector<std::string> in_groups;
  std::vector<double> in_means;
  std::vector<std::string> out_groups;
  std::vector<double> out_means;
  std::vector<double> in_confidence;  // per sample
  std::vector<int> in_labels;
  std::vector<double> out_confidence;
  std::vector<int> out_labels;  // -1 everywhere when ungrouped
};

namespace detail {

inline std::vector<double> group_means(const std::vector<double>& values, const std::vector<int>& groups, int count) {
  std::vector<double> sum(count, 0.0);
  std::vector<long long> n(count, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum[groups[i]] += values[i];
    ++n[groups[i]];
  }
  for (int g = 0; g < count; ++g) sum[g] = n[g] ? sum[g] / n[g] : 0.0;
  return sum;
}

}  // namespace detail

template <ProbabilisticClassifier M>
ConfidenceReport classwise_confidence(const M& model, const OODEvalPair& pair, bool group_out_dist = true) {
  ConfidenceReport r;
  r.in_confidence = score_rows(predict_all(model, pair.in_dist.images), ScoreKind::MaxSoftmax);
  r.out_confidence = score_rows(predict_all(model, pair.out_dist.images), ScoreKind::MaxSoftmax);
  r.in_labels = pair.in_dist.labels;
  for (int k = 0; k < pair.in_dist.num_classes; ++k)
    r.in_groups.push_back(k < static_cast<int>(pair.in_dist.class_names.size()) ? pair.in_dist.class_names[k]
                                                                               : "class" + std::to_string(k));
  r.in_means = detail::group_means(r.in_confidence, r.in_labels, pair.in_dist.num_classes);
  const bool grouped = group_out_dist && pair.out_dist.labels.size() == pair.out_dist.size() &&
                       pair.out_dist.num_classes > 0;
  if (grouped) {
    r.out_labels = pair.out_dist.labels;
    for (int k = 0; k < pair.out_dist.num_classes; ++k)
      r.out_groups.push_back(k < static_cast<int>(pair.out_dist.class_names.size()) ? pair.out_dist.class_names[k]
                                                                                   : "group" + std::to_string(k));
    r.out_means = detail::group_means(r.out_confidence, r.out_labels, pair.out_dist.num_classes);
  } else {
    r.out_labels.assign(r.out_confidence.size(), -1);
    r.out_groups = {"all"};
    r.out_means = {std::accumulate(r.out_confidence.begin(), r.out_confidence.end(), 0.0) /
                   static_cast<double>(r.out_confidence.size())};
  }
  return r;
}

// ---------------------------------------------------------------------------
// Adversarial robustness

struct AdversarialResult {
  double clean_accuracy = 0;   // percent
  double robust_accuracy = 0;  // percent
  int steps = 0;
  double alpha = 0;
  double epsilon = 0;
  double max_linf = 0;  // largest perturbation actually emitted
};

/// Clean accuracy and accuracy under a `steps`-step PGD attack. A sample counts
/// as robust only if it is classified correctly both clean and under attack,
/// so robust accuracy never exceeds clean accuracy.
template <typename T>
AdversarialResult eval_adversarial(DualHeadModel<T>& model, const LabeledDataset& ds, const AdversarialConfig& adv,
                                   int steps, std::uint64_t seed, int batch_size = 128,
                                   std::optional<double> alpha = std::nullopt) {
  if (ds.size() == 0) throw EmptyInputError("eval_adversarial: empty dataset");
  AdversarialResult r;
  r.steps = steps;
  r.alpha = alpha.value_or(AdversarialConfig::alpha_for_steps(steps));
  r.epsilon = adv.epsilon;
  std::size_t clean_hits = 0, robust_hits = 0;
  for (std::size_t b = 0; b < ds.size(); b += batch_size) {
    const std::size_t e = std::min(ds.size(), b + batch_size);
    std::vector<const ImageF*> ptrs;
    std::vector<int> labels;
    for (std::size_t i = b; i < e; ++i) {
      ptrs.push_back(&ds.images[i]);
      labels.push_back(ds.labels[i]);
    }
    Rng rng(derive_seed({seed, 0x616476ULL, b}));
    const auto clean_probs = model.predict(std::span<const ImageF* const>(ptrs));
    const auto x_adv = pgd_attack<T>(model, ptrs, labels, adv, steps, r.alpha, rng);
    const auto adv_probs = predict_dataset(model, x_adv, batch_size);
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      Eigen::Index c1, c2;
      clean_probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&c1);
      adv_probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&c2);
      const bool ok_clean = static_cast<int>(c1) == labels[i];
      clean_hits += ok_clean;
      robust_hits += ok_clean && static_cast<int>(c2) == labels[i];
      auto xa = x_adv[i].values();
      auto x0 = ptrs[i]->values();
      for (std::size_t j = 0; j < xa.size(); ++j)
        r.max_linf = std::max(r.max_linf, static_cast<double>(std::abs(xa[j] - x0[j])));
    }
  }
  r.clean_accuracy = 100.0 * static_cast<double>(clean_hits) / static_cast<double>(ds.size());
  r.robust_accuracy = 100.0 * static_cast<double>(robust_hits) / static_cast<double>(ds.size());
  return r;
}

// ---------------------------------------------------------------------------
// Lambda sweep

struct SweepRow {
  double lambda = 0;
  double accuracy = 0;                // percent, mean over seeds
  std::optional<double> auroc;        // mean over seeds, when an OOD set is given
  std::vector<double> per_seed_accuracy;
  std::vector<double> per_seed_auroc;
};

/// Produces a trained model for one (config, spec) pair; lets callers reuse
/// models across experiments.
using Trainer = std::function<DualHeadModel<float>(const TrainingConfig&, const ModelSpec&)>;

/// Trains one model per (lambda, seed) and reports accuracy (and AUROC) per lambda.
inline std::vector<SweepRow> lambda_sweep(const TrainingConfig& base, const ModelSpec& spec,
                                          const std::vector<double>& lambdas, const std::vector<std::uint64_t>& seeds,
                                          const LabeledDataset& train, const LabeledDataset& test,
                                          const LabeledDataset* ood = nullptr, Trainer trainer = nullptr) {
  if (lambdas.empty()) throw ConfigError("lambdas", "lambda list must be non-empty");
  if (seeds.empty()) throw ConfigError("seeds", "seed list must be non-empty");
  if (!trainer) {
    trainer = [&train](const TrainingConfig& c, const ModelSpec& s) { return run_training<float>(c, s, train).model; };
  }
  std::vector<SweepRow> rows;
  for (double lambda : lambdas) {
    SweepRow row;
    row.lambda = lambda;
    for (auto seed : seeds) {
      TrainingConfig cfg = base;
      cfg.lambda = lambda;
      cfg.seed = seed;
      ModelSpec s = spec;
      s.init_seed = seed;
      const auto model = trainer(cfg, s);
      row.per_seed_accuracy.push_back(accuracy(model, test).top1);
      if (ood) row.per_seed_auroc.push_back(100.0 * ood_evaluate(model, make_ood_pair(test, *ood)).auroc);
    }
    row.accuracy = std::accumulate(row.per_seed_accuracy.begin(), row.per_seed_accuracy.end(), 0.0) / seeds.size();
    if (ood) row.auroc = std::accumulate(row.per_seed_auroc.begin(), row.per_seed_auroc.end(), 0.0) / seeds.size();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace lorot
