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

// Independent reference implementations shared by the unit and acceptance
// suites. Nothing here calls the code path it checks.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "lorot/loss.hpp"
#include "lorot/model.hpp"

namespace lorot::testing {

/// AUROC by counting every (in, out) pair; ties count one half. Returned as
/// an exact fraction (twice the numerator over twice the pair count).
struct PairCount {
  long long twice_wins = 0;
  long long twice_pairs = 0;
  double value() const { return static_cast<double>(twice_wins) / static_cast<double>(twice_pairs); }
};

inline PairCount brute_force_auroc(std::span<const double> in, std::span<const double> out) {
  PairCount r;
  for (double a : in)
    for (double b : out) r.twice_wins += a > b ? 2 : (a == b ? 1 : 0);
  r.twice_pairs = 2LL * static_cast<long long>(in.size()) * static_cast<long long>(out.size());
  return r;
}

/// Loss of `model` on a fixed batch, recomputed from scratch.
inline double batch_loss(const DualHeadModel<double>& model, const nn::FeatureMap<double>& x,
                         const std::vector<int>& y, const std::vector<int>& yhat, double lambda) {
  const auto fp = model.forward(x, false);
  return multitask_loss<double>(fp.primary_probs, fp.pretext_probs, y, yhat, lambda).total;
}

struct GradCheck {
  int checked = 0;
  double max_rel_error = 0;
};

/// Compares the analytic multi-task gradient with central finite differences
/// at `coords` random parameter coordinates.
inline GradCheck finite_difference_check(DualHeadModel<double>& model, const nn::FeatureMap<double>& x,
                                         const std::vector<int>& y, const std::vector<int>& yhat, double lambda,
                                         int coords, Rng& rng, double h = 1e-5) {
  const auto fp = model.forward(x);
  model.zero_grad();
  model.backward(fp, nll_logit_grad<double>(fp.primary_probs, y, 1.0),
                 nll_logit_grad<double>(fp.pretext_probs, yhat, lambda));
  auto params = model.parameters();
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t j = 0; j < params[p]->size(); ++j) all.emplace_back(p, j);
  rng.shuffle(all.begin(), all.end());
  GradCheck r;
  for (int k = 0; k < coords && k < static_cast<int>(all.size()); ++k) {
    auto [p, j] = all[k];
    double& w = params[p]->value[j];
    const double analytic = params[p]->grad[j];
    const double saved = w;
    w = saved + h;
    const double up = batch_loss(model, x, y, yhat, lambda);
    w = saved - h;
    const double down = batch_loss(model, x, y, yhat, lambda);
    w = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
    ++r.checked;
  }
  return r;
}

/// A tiny double-precision model for gradient checks (well under 10^3 parameters).
inline ModelSpec grad_check_spec(PoolingMode pooling = PoolingMode::GAP, Variant v = Variant::E) {
  ModelSpec s;
  s.input = {8, 8, 2};
  s.channels = {3, 3};
  s.num_classes = 3;
  s.variant = v;
  s.pooling = pooling;
  s.init_seed = 11;
  return s;
}

inline nn::FeatureMap<double> random_batch(Rng& rng, int n, Shape3 shape) {
  nn::FeatureMap<double> x(n, shape.h, shape.w, shape.c);
  for (auto& v : x.data) v = rng.uniform();
  return x;
}

/// Hands out one-hot rows for in-distribution images (the class is encoded in
/// the first pixel) and uniform rows for everything else.
struct OracleClassifier {
  int classes = 10;

  int num_classes() const { return classes; }

  Matrix<float> predict(std::span<const ImageF* const> batch) const {
    Matrix<float> p(static_cast<Eigen::Index>(batch.size()), classes);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const float code = (*batch[i])(0, 0, 0);
      const int k = static_cast<int>(std::lround(code * 100.0f)) - 1;
      if (k >= 0 && k < classes) {
        p.row(static_cast<Eigen::Index>(i)).setZero();
        p(static_cast<Eigen::Index>(i), k) = 1.0f;
      } else {
        p.row(static_cast<Eigen::Index>(i)).setConstant(1.0f / static_cast<float>(classes));
      }
    }
    return p;
  }

  /// An image the oracle classifies as `label`.
  static ImageF encode(int label, int side = 8) {
    ImageF im(side, side, 1, 0.5f);
    im(0, 0, 0) = static_cast<float>(label + 1) / 100.0f;
    return im;
  }
};

}  // namespace lorot::testing
