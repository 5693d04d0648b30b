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

#include <vector>

#include "lorot/model.hpp"

namespace lorot {
namespace {

FeatureMap<double> random_map(Rng& rng, int n, int h, int w, int c) {
  FeatureMap<double> f(n, h, w, c);
  for (auto& v : f.data) v = rng.uniform(-1, 1);
  return f;
}

std::vector<ImageF> random_images(Rng& rng, int n, int side, int c) {
  std::vector<ImageF> out;
  for (int i = 0; i < n; ++i) {
    ImageF im(side, side, c);
    for (auto& v : im.values()) v = static_cast<float>(rng.uniform());
    out.push_back(im);
  }
  return out;
}

ModelSpec small_spec(PoolingMode pooling = PoolingMode::GAP, Variant v = Variant::I) {
  ModelSpec s;
  s.input = {8, 8, 3};
  s.channels = {4, 6};
  s.num_classes = 5;
  s.variant = v;
  s.pooling = pooling;
  s.init_seed = 3;
  return s;
}

TEST(PoolFeatures, ConstantMapGivesConstantOutput) {
  for (PoolingMode m : {PoolingMode::GAP, PoolingMode::ReducedDense, PoolingMode::Dense}) {
    FeatureMap<double> f(2, 4, 6, 3);
    std::fill(f.data.begin(), f.data.end(), 0.375);
    const auto p = pool_features(f, m);
    EXPECT_EQ(p.cols(), pooled_width(m, {4, 6, 3}));
    for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(p.data()[i], 0.375);
  }
}

TEST(PoolFeatures, ReducedDenseIsQuadrantMean) {
  Rng rng(1);
  const auto f = random_map(rng, 1, 4, 4, 2);
  const auto p = pool_features(f, PoolingMode::ReducedDense);
  for (int q = 0; q < 4; ++q)
    for (int c = 0; c < 2; ++c) {
      const int y0 = (q / 2) * 2, x0 = (q % 2) * 2;
      double m = 0;
      for (int y = y0; y < y0 + 2; ++y)
        for (int x = x0; x < x0 + 2; ++x) m += f.data[(y * 4 + x) * 2 + c];
      EXPECT_NEAR(p(0, q * 2 + c), m / 4, 1e-15);
    }
}

TEST(PoolFeatures, OneByOneGapIsIdentity) {
  Rng rng(2);
  const auto f = random_map(rng, 3, 1, 1, 5);
  const auto p = pool_features(f, PoolingMode::GAP);
  for (int n = 0; n < 3; ++n)
    for (int c = 0; c < 5; ++c) EXPECT_EQ(p(n, c), f.data[n * 5 + c]);
  EXPECT_THROW(pool_features(f, PoolingMode::ReducedDense), DimensionError);
}

TEST(PoolFeatures, GapInvariantUnderSpatialPermutation) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto f = random_map(rng, 1, 5, 5, 3);
    std::vector<int> perm(25);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    FeatureMap<double> g = f;
    for (int p = 0; p < 25; ++p)
      for (int c = 0; c < 3; ++c) g.data[p * 3 + c] = f.data[perm[p] * 3 + c];
    const auto a = pool_features(f, PoolingMode::GAP), b = pool_features(g, PoolingMode::GAP);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(a(0, c), b(0, c), 1e-14);
  }
}

TEST(DualHeadModel, HeadWidthsFollowPooling) {
  for (PoolingMode m : {PoolingMode::GAP, PoolingMode::ReducedDense, PoolingMode::Dense}) {
    for (Variant v : {Variant::I, Variant::E}) {
      DualHeadModel<double> model(small_spec(m, v));
      const auto fs = model.feature_shape();
      EXPECT_EQ(model.pretext_head().in_features(), pooled_width(m, fs));
      EXPECT_EQ(model.pretext_head().out_features(), v == Variant::E ? 16 : 4);
      EXPECT_EQ(model.primary_head().in_features(), fs.c);
    }
  }
}

TEST(DualHeadModel, RowsAreProbabilitiesAndOneExtractorCall) {
  Rng rng(4);
  DualHeadModel<float> model(small_spec(PoolingMode::ReducedDense, Variant::E));
  const auto images = random_images(rng, 7, 8, 3);
  const auto fp = model.forward(nn::to_batch<float, float>(images));
  EXPECT_EQ(model.extractor_calls(), 1u);
  EXPECT_EQ(model.forwarded_samples(), 7u);
  for (const auto* m : {&fp.primary_probs, &fp.pretext_probs})
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      EXPECT_NEAR(m->row(r).sum(), 1.0, 1e-5);
      EXPECT_GE(m->row(r).minCoeff(), 0.0f);
      EXPECT_LE(m->row(r).maxCoeff(), 1.0f);
    }
}

TEST(DualHeadModel, EqualLogitsGiveUniformRows) {
  DualHeadModel<double> model(small_spec());
  for (auto* p : model.parameters()) std::fill(p->value.begin(), p->value.end(), 0.0);
  Rng rng(5);
  const auto images = random_images(rng, 3, 8, 3);
  const auto fp = model.forward(nn::to_batch<double, float>(images));
  for (Eigen::Index i = 0; i < fp.primary_probs.size(); ++i) EXPECT_DOUBLE_EQ(fp.primary_probs.data()[i], 0.2);
  for (Eigen::Index i = 0; i < fp.pretext_probs.size(); ++i) EXPECT_DOUBLE_EQ(fp.pretext_probs.data()[i], 0.25);
}

TEST(DualHeadModel, DoubledBatchGivesIdenticalHalves) {
  Rng rng(6);
  DualHeadModel<float> model(small_spec(PoolingMode::Dense));
  auto images = random_images(rng, 5, 8, 3);
  auto doubled = images;
  doubled.insert(doubled.end(), images.begin(), images.end());
  const auto p = model.predict_proba(nn::to_batch<float, float>(doubled));
  // Equal up to float rounding; the GEMM blocking may depend on the batch size.
  EXPECT_TRUE(p.topRows(5).isApprox(p.bottomRows(5), 1e-6f));
}

TEST(DualHeadModel, RejectsShapeMismatch) {
  DualHeadModel<float> model(small_spec());
  Rng rng(7);
  const auto images = random_images(rng, 2, 12, 3);
  EXPECT_THROW(model.forward(nn::to_batch<float, float>(images)), DimensionError);
}

TEST(DualHeadModel, CopyIsDeep) {
  DualHeadModel<float> a(small_spec());
  DualHeadModel<float> b = a;
  b.parameters()[0]->value[0] += 1.0f;
  EXPECT_NE(a.parameters()[0]->value[0], b.parameters()[0]->value[0]);
}

TEST(DualHeadModel, ResidualBackboneBuildsAndNormalizes) {
  ModelSpec s = small_spec();
  s.backbone = "residual-cnn";
  DualHeadModel<float> model(s);
  Rng rng(8);
  const auto images = random_images(rng, 3, 8, 3);
  const auto p = model.predict_proba(nn::to_batch<float, float>(images));
  for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-5);
  s.backbone = "vgg";
  EXPECT_THROW(DualHeadModel<float>{s}, ConfigError);
}

}  // namespace
}  // namespace lorot
