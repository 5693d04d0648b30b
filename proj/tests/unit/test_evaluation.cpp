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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "lorot/evaluation.hpp"
#include "lorot/registry.hpp"
#include "oracles.hpp"

namespace lorot {
namespace {

using testing::brute_force_auroc;
using testing::OracleClassifier;

// Predicts a pseudo-random class from the image content.
struct HashClassifier {
  int classes = 10;
  int num_classes() const { return classes; }
  Matrix<float> predict(std::span<const ImageF* const> batch) const {
    Matrix<float> p = Matrix<float>::Zero(static_cast<Eigen::Index>(batch.size()), classes);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Fnv1a h;
      h.values<float>(batch[i]->values());
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(h.digest() % classes)) = 1.0f;
    }
    return p;
  }
};

// Always predicts class 0.
struct ConstantClassifier {
  int num_classes() const { return 10; }
  Matrix<float> predict(std::span<const ImageF* const> batch) const {
    Matrix<float> p = Matrix<float>::Zero(static_cast<Eigen::Index>(batch.size()), 10);
    p.col(0).setOnes();
    return p;
  }
};

LabeledDataset oracle_set(int per_class, int classes = 10) {
  LabeledDataset ds;
  ds.name = "oracle";
  ds.num_classes = classes;
  for (int i = 0; i < per_class * classes; ++i) {
    ds.images.push_back(OracleClassifier::encode(i % classes));
    ds.labels.push_back(i % classes);
  }
  return ds;
}

LabeledDataset uniform_set(int count, int groups) {
  LabeledDataset ds;
  ds.name = "far";
  ds.num_classes = groups;
  for (int i = 0; i < count; ++i) {
    ds.images.emplace_back(8, 8, 1, 0.5f);
    ds.labels.push_back(i % groups);
  }
  return ds;
}

TEST(Scores, KlToUniformClosedForms) {
  std::vector<double> uniform(10, 0.1), onehot(10, 0.0), half(10, 0.0);
  onehot[3] = 1;
  half[0] = half[1] = 0.5;
  EXPECT_NEAR(kl_to_uniform<double>(uniform), 0.0, 1e-15);
  EXPECT_NEAR(kl_to_uniform<double>(onehot), 2.302585, 5e-7);
  EXPECT_NEAR(kl_to_uniform<double>(half), 1.609438, 5e-7);
  EXPECT_NEAR(kl_to_uniform<double>(half), std::log(5.0), 1e-14);
}

TEST(Scores, KlIsNonNegativeOnRandomRows) {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> p(7);
    for (auto& v : p) v = rng.uniform();
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= s;
    EXPECT_GE(kl_to_uniform<double>(p), 0.0);
  }
}

TEST(Scores, MaxSoftmaxAndInvalidRows) {
  std::vector<double> uniform(10, 0.1), onehot(10, 0.0);
  onehot[0] = 1;
  EXPECT_NEAR(max_softmax<double>(uniform), 0.1, 1e-15);
  EXPECT_EQ(max_softmax<double>(onehot), 1.0);
  EXPECT_GT(kl_to_uniform<double>(onehot), kl_to_uniform<double>(uniform));
  std::vector<double> negative{1.2, -0.2}, short_row{0.3, 0.3};
  EXPECT_THROW(kl_to_uniform<double>(negative), ProbabilityError);
  EXPECT_THROW(max_softmax<double>(short_row), ProbabilityError);
}

TEST(Auroc, HandWorkedExamples) {
  EXPECT_EQ(auroc(std::vector<double>{2, 3}, std::vector<double>{0, 1}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{1, 1, 1}, std::vector<double>{1, 1, 1}), 0.5);
  EXPECT_EQ(auroc(std::vector<double>{3, 1}, std::vector<double>{2, 0}), 0.75);
  EXPECT_THROW(auroc(std::vector<double>{}, std::vector<double>{1}), EmptyInputError);
  EXPECT_THROW(auroc(std::vector<double>{std::nan("")}, std::vector<double>{1}), NumericError);
}

TEST(Auroc, EqualsBruteForcePairCountExactly) {
  Rng rng(2);
  for (int t = 0; t < 1000; ++t) {
    const int n = static_cast<int>(rng.uniform_int(1, 50)), m = static_cast<int>(rng.uniform_int(1, 50));
    std::vector<double> in(n), out(m);
    // Coarse values make ties common.
    for (auto& v : in) v = static_cast<double>(rng.uniform_int(0, 12)) / 4;
    for (auto& v : out) v = static_cast<double>(rng.uniform_int(0, 10)) / 4;
    ASSERT_EQ(auroc(in, out), brute_force_auroc(in, out).value()) << "instance " << t;
  }
}

TEST(Auroc, InvariantUnderStrictlyIncreasingMaps) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> in(30), out(25);
    for (auto& v : in) v = rng.uniform(-2, 2);
    for (auto& v : out) v = rng.uniform(-2, 2);
    const double a = rng.uniform(0.1, 3), b = rng.uniform(-1, 1);
    auto f = [&](double x) { return std::exp(a * x) + b + x * x * x; };
    std::vector<double> fin, fout;
    for (double v : in) fin.push_back(f(v));
    for (double v : out) fout.push_back(f(v));
    ASSERT_EQ(auroc(in, out), auroc(fin, fout));
  }
}

TEST(Accuracy, OracleChanceAndConstantModels) {
  const auto ds = oracle_set(20);
  const auto r = accuracy(OracleClassifier{}, ds, true);
  EXPECT_EQ(r.top1, 100.0);
  ASSERT_TRUE(r.top5.has_value());
  EXPECT_EQ(*r.top5, 100.0);

  const auto scenes = load_dataset("synthetic:noise,count=1000,seed=9,size=8");
  LabeledDataset balanced = scenes;
  balanced.num_classes = 10;
  for (std::size_t i = 0; i < balanced.size(); ++i) balanced.labels[i] = static_cast<int>(i % 10);
  EXPECT_NEAR(accuracy(HashClassifier{}, balanced).top1, 10.0, 3.8);
  EXPECT_EQ(accuracy(ConstantClassifier{}, balanced).top1, 10.0);
  EXPECT_THROW(accuracy(OracleClassifier{}, LabeledDataset{}), EmptyInputError);
}

TEST(Affinity, IdentityIsExactlyHundred) {
  ModelSpec s;
  s.input = {16, 16, 3};
  s.channels = {4};
  s.num_classes = 10;
  s.init_seed = 4;
  const DualHeadModel<float> model(s);
  const auto val = load_dataset("synthetic:glyphs,per_class=20,seed=3,size=16");
  const auto r = affinity(model, val, ShiftTransform::Identity);
  EXPECT_EQ(r.affinity, 100.0);

  const auto a = affinity(OracleClassifier{}, oracle_set(10), ShiftTransform::LoRotI);
  EXPECT_EQ(a.affinity, 100.0 * a.shifted_correct / a.clean_correct);
  const auto rot = affinity(model, val, ShiftTransform::GlobalRotation);
  EXPECT_GE(rot.affinity, 0.0);
}

TEST(Affinity, UndefinedWhenCleanAccuracyIsZero) {
  auto ds = oracle_set(2);
  for (auto& l : ds.labels) l = (l + 1) % 10;
  EXPECT_THROW(affinity(OracleClassifier{}, ds, ShiftTransform::LoRotE), UndefinedAffinityError);
}

TEST(Affinity, ExcludingIdentityNeverKeepsAnImageUnrotated) {
  const auto ds = load_dataset("synthetic:glyphs,per_class=5,seed=3");
  const auto shifted = shifted_copy(ds, ShiftTransform::GlobalRotation, {7, false});
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_NE(shifted.images[i], ds.images[i]);
  const auto same = shifted_copy(ds, ShiftTransform::GlobalRotation, {7, true});
  EXPECT_EQ(same.checksum(), shifted_copy(ds, ShiftTransform::GlobalRotation, {7, true}).checksum());
}

TEST(Ood, OracleSeparatesPerfectlyAndScoresAreAuditable) {
  const auto pair = make_ood_pair(oracle_set(10), uniform_set(30, 3));
  const auto r = ood_evaluate(OracleClassifier{}, pair, ScoreKind::KLToUniform);
  EXPECT_EQ(r.auroc, 1.0);
  EXPECT_EQ(r.recompute_auroc(), r.auroc);
  EXPECT_EQ(r.in_scores.size(), 100u);
  EXPECT_EQ(r.out_scores.size(), 30u);
  EXPECT_NEAR(r.in_scores.front(), std::log(10.0), 1e-6);
  EXPECT_NEAR(r.out_scores.front(), 0.0, 1e-6);
  EXPECT_EQ(ood_evaluate(OracleClassifier{}, pair, ScoreKind::MaxSoftmax).auroc, 1.0);
}

TEST(Ood, UntrainedModelIsNearChance) {
  const auto in = load_dataset("synthetic:noise,count=400,seed=1,size=16");
  const auto out = load_dataset("synthetic:noise,count=400,seed=2,size=16");
  double sum = 0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    ModelSpec s;
    s.input = {16, 16, 3};
    s.channels = {4, 8};
    s.num_classes = 10;
    s.init_seed = seed;
    sum += ood_evaluate(DualHeadModel<float>(s), make_ood_pair(in, out)).auroc;
  }
  EXPECT_NEAR(sum / 5, 0.5, 0.05);
}

TEST(Confidence, OracleMeansAndRecomputation) {
  const auto pair = make_ood_pair(oracle_set(4), uniform_set(12, 3));
  const auto r = classwise_confidence(OracleClassifier{}, pair);
  ASSERT_EQ(r.in_means.size(), 10u);
  for (double m : r.in_means) EXPECT_DOUBLE_EQ(m, 1.0);
  ASSERT_EQ(r.out_means.size(), 3u);
  for (double m : r.out_means) EXPECT_NEAR(m, 0.1, 1e-7);
  for (int g = 0; g < 3; ++g) {
    double s = 0;
    int n = 0;
    for (std::size_t i = 0; i < r.out_confidence.size(); ++i)
      if (r.out_labels[i] == g) {
        s += r.out_confidence[i];
        ++n;
      }
    EXPECT_NEAR(s / n, r.out_means[g], 1e-12);
  }
}

TEST(Confidence, SingleGroupAndUngroupedFallback) {
  const auto one = make_ood_pair(oracle_set(2), uniform_set(5, 1));
  EXPECT_EQ(classwise_confidence(OracleClassifier{}, one).out_means.size(), 1u);
  auto unlabeled = uniform_set(5, 2);
  unlabeled.labels.clear();
  OODEvalPair pair{oracle_set(2), unlabeled};
  const auto r = classwise_confidence(OracleClassifier{}, pair);
  ASSERT_EQ(r.out_groups, std::vector<std::string>{"all"});
  EXPECT_NEAR(r.out_means[0], 0.1, 1e-7);
}

TEST(Adversarial, ZeroEpsilonAndRobustNeverExceedsClean) {
  ModelSpec s;
  s.input = {16, 16, 3};
  s.channels = {4, 8};
  s.num_classes = 10;
  TrainingConfig c;
  c.strategy = Strategy::Baseline;
  c.epochs = 3;
  c.batch_size = 16;
  c.optimizer.lr = 0.05;
  const auto train = load_dataset("synthetic:glyphs,per_class=10,seed=1,size=16");
  auto model = run_training<float>(c, s, train).model;
  const auto test = load_dataset("synthetic:glyphs,per_class=5,seed=2,size=16");
  AdversarialConfig zero;
  zero.epsilon = 0;
  zero.alpha = 0;
  const auto r0 = eval_adversarial(model, test, zero, 20, 1, 128, 0.0);
  EXPECT_EQ(r0.robust_accuracy, r0.clean_accuracy);
  EXPECT_EQ(r0.max_linf, 0.0);
  for (int steps : {20, 100}) {
    const auto r = eval_adversarial(model, test, AdversarialConfig{}, steps, 1);
    EXPECT_LE(r.robust_accuracy, r.clean_accuracy);
    EXPECT_LE(r.max_linf, 8.0 / 255.0 + 1e-8);
    EXPECT_DOUBLE_EQ(r.alpha, steps > 20 ? 0.3 / 255.0 : 2.0 / 255.0);
  }
}

TEST(LambdaSweep, SingleLambdaMatchesAPlainRun) {
  const auto train = load_dataset("synthetic:glyphs,per_class=6,seed=1,size=16");
  const auto test = load_dataset("synthetic:glyphs,per_class=3,seed=2,size=16");
  ModelSpec s;
  s.input = {16, 16, 3};
  s.channels = {4};
  s.num_classes = 10;
  TrainingConfig c;
  c.epochs = 1;
  c.batch_size = 16;
  const auto rows = lambda_sweep(c, s, {0.1}, {5}, train, test);
  ASSERT_EQ(rows.size(), 1u);
  c.seed = 5;
  s.init_seed = 5;
  const auto plain = run_training<float>(c, s, train).model;
  EXPECT_EQ(rows[0].accuracy, accuracy(plain, test).top1);
  EXPECT_THROW(lambda_sweep(c, s, {}, {0}, train, test), ConfigError);
}

}  // namespace
}  // namespace lorot
