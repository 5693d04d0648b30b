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
#include <span>
#include <string>

#include "lorot/nn.hpp"

namespace lorot {

/// Probabilities are floored here before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossValue {
  double total = 0;
  double primary = 0;  // mean -log P_u[y]
  double pretext = 0;  // mean -log P_v[y_hat]
};

namespace detail {

inline void check_labels(std::span<const int> labels, Eigen::Index rows, Eigen::Index classes, const char* what) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw LabelError(std::string(what) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  for (int l : labels)
    if (l < 0 || l >= classes) throw LabelError(std::string(what) + " label " + std::to_string(l) + " out of range");
}

template <typename T>
double mean_nll(const nn::Matrix<T>& probs, std::span<const int> labels) {
  double s = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    s -= std::log(std::max(static_cast<double>(probs(i, labels[i])), kProbabilityFloor));
  return s / static_cast<double>(probs.rows());
}

}  // namespace detail

/// Multi-task objective over a batch:
///   -(1/N) * sum_i ( log P_u[i, y_i] + lambda * log P_v[i, yhat_i] )
/// Pass an empty `pretext_probs` (0 rows) for the primary term alone.
template <typename T>
LossValue multitask_loss(const nn::Matrix<T>& primary_probs, const nn::Matrix<T>& pretext_probs,
                         std::span<const int> labels, std::span<const int> pretext_labels, double lambda) {
  if (primary_probs.rows() == 0) throw EmptyInputError("multitask_loss: empty batch");
  if (lambda < 0) throw ConfigError("training.lambda", "must be non-negative");
  detail::check_labels(labels, primary_probs.rows(), primary_probs.cols(), "primary");
  LossValue v;
  v.primary = detail::mean_nll(primary_probs, labels);
  if (pretext_probs.rows() > 0) {
    detail::check_labels(pretext_labels, pretext_probs.rows(), pretext_probs.cols(), "pretext");
    v.pretext = detail::mean_nll(pretext_probs, pretext_labels);
  }
  v.total = v.primary + lambda * v.pretext;
  return v;
}

/// d(weight * mean NLL)/d(logits) for softmax probabilities: weight * (P - onehot) / N.
/// This is the gradient of the unfloored loss.
template <typename T>
nn::Matrix<T> nll_logit_grad(const nn::Matrix<T>& probs, std::span<const int> labels, double weight) {
  nn::Matrix<T> g = probs;
  for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, labels[i]) -= T(1);
  g *= static_cast<T>(weight / static_cast<double>(probs.rows()));
  return g;
}

}  // namespace lorot
