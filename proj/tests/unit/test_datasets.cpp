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

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "lorot/registry.hpp"

namespace lorot {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lorot_datasets_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// n images per class, 10 classes; the first pixel stores the original index.
LabeledDataset indexed_dataset(int per_class, int classes = 10) {
  LabeledDataset ds;
  ds.name = "indexed";
  ds.num_classes = classes;
  for (int i = 0; i < per_class * classes; ++i) {
    ImageF im(4, 4, 1);
    im(0, 0) = static_cast<float>(i);
    ds.images.push_back(im);
    ds.labels.push_back(i % classes);
  }
  return ds;
}

TEST(Synthetic, BlobsContract) {
  const auto ds = load_dataset("synthetic:two-gaussian-blobs,n=200,seed=1");
  EXPECT_EQ(ds.size(), 200u);
  EXPECT_EQ(ds.num_classes, 2);
  EXPECT_EQ(ds.class_counts(), (std::vector<int>{100, 100}));
}

TEST(Synthetic, LoadingTwiceIsIdentical) {
  for (const char* d : {"synthetic:glyphs,per_class=5,seed=3", "synthetic:textures,per_class=5,seed=3",
                        "synthetic:shapes-ood,count=20,seed=3", "synthetic:noise,count=20,seed=3"}) {
    const auto a = load_dataset(d), b = load_dataset(d);
    EXPECT_EQ(a.checksum(), b.checksum()) << d;
    EXPECT_EQ(a.labels, b.labels);
  }
  EXPECT_NE(load_dataset("synthetic:glyphs,per_class=5,seed=3").checksum(),
            load_dataset("synthetic:glyphs,per_class=5,seed=4").checksum());
}

TEST(Synthetic, ScenesAreThirtyTwoSquareRgbInRange) {
  const auto ds = load_dataset("synthetic:textures,per_class=3,seed=1");
  EXPECT_EQ(ds.num_classes, 10);
  for (const auto& im : ds.images) {
    EXPECT_EQ(im.height(), 32);
    EXPECT_EQ(im.width(), 32);
    EXPECT_EQ(im.channels(), 3);
    for (float v : im.values()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
}

TEST(Sources, UnknownOrMalformedDescriptorsFail) {
  EXPECT_THROW(load_dataset("synthetic:unicorns"), SourceError);
  EXPECT_THROW(load_dataset("nonsense"), SourceError);
  EXPECT_THROW(load_dataset("synthetic:glyphs,per_class"), SourceError);
  EXPECT_THROW(load_dataset("packed:/definitely/not/here.pack"), SourceError);
}

TEST(Sources, PackedRoundTripAndCorruption) {
  const auto dir = scratch_dir("packed");
  const auto ds = load_dataset("synthetic:glyphs,per_class=3,seed=2");
  save_packed(ds, dir / "g.pack");
  const auto back = load_dataset("packed:" + (dir / "g.pack").string());
  EXPECT_EQ(back.labels, ds.labels);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto a = back.images[i].values(), b = ds.images[i].values();
    for (std::size_t j = 0; j < a.size(); ++j) ASSERT_NEAR(a[j], b[j], 0.5 / 255.0 + 1e-6);
  }
  // Already quantized data survives a second round trip exactly.
  save_packed(back, dir / "g2.pack");
  EXPECT_EQ(load_packed(dir / "g2.pack").checksum(), back.checksum());

  {
    std::ofstream bad(dir / "bad.pack", std::ios::binary);
    bad << "NOTMAGIC";
  }
  try {
    load_packed(dir / "bad.pack");
    FAIL() << "expected SourceError";
  } catch (const SourceError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.pack"), std::string::npos);
  }
  fs::resize_file(dir / "g.pack", fs::file_size(dir / "g.pack") - 7);
  EXPECT_THROW(load_packed(dir / "g.pack"), SourceError);
}

TEST(Sources, DirectoryLayoutRoundTrip) {
  const auto dir = scratch_dir("tree");
  auto ds = load_dataset("synthetic:glyphs,per_class=2,seed=5,size=16");
  ds.split = Split::Val;
  save_directory(ds, dir);
  const auto back = load_dataset("dir:" + dir.string() + ",split=val");
  EXPECT_EQ(back.num_classes, ds.num_classes);
  EXPECT_EQ(back.class_counts(), ds.class_counts());
  EXPECT_EQ(back.split, Split::Val);
  EXPECT_THROW(load_dataset("dir:" + dir.string() + ",split=test"), SourceError);
}

TEST(Imbalance, ExponentialCountsMatchTheFormula) {
  const auto ds = indexed_dataset(5000);
  Rng rng(1);
  const auto lt = build_imbalanced(ds, {0.01}, rng);
  // floor(5000 * 10^(-2i/9)), evaluated independently at 50 digits.
  const std::vector<int> expected{5000, 2997, 1796, 1077, 645, 387, 232, 139, 83, 50};
  EXPECT_EQ(lt.class_counts(), expected);
  EXPECT_EQ(lt.size(), static_cast<std::size_t>(std::accumulate(expected.begin(), expected.end(), 0)));
}

TEST(Imbalance, MuOneIsIdentity) {
  const auto ds = indexed_dataset(20);
  Rng rng(2);
  const auto lt = build_imbalanced(ds, {1.0}, rng);
  EXPECT_EQ(lt.checksum(), ds.checksum());
}

TEST(Imbalance, SubsetIsDeterministicWithoutDuplicates) {
  const auto ds = indexed_dataset(100);
  Rng a(3), b(3), c(4);
  const auto x = build_imbalanced(ds, {0.05}, a), y = build_imbalanced(ds, {0.05}, b), z = build_imbalanced(ds, {0.05}, c);
  EXPECT_EQ(x.checksum(), y.checksum());
  EXPECT_NE(x.checksum(), z.checksum());
  std::set<float> seen;
  float prev = -1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float id = x.images[i](0, 0);
    EXPECT_TRUE(seen.insert(id).second);
    EXPECT_GT(id, prev);  // original order kept
    prev = id;
    EXPECT_EQ(x.labels[i], static_cast<int>(id) % 10);
  }
  const auto counts = x.class_counts();
  for (std::size_t k = 1; k < counts.size(); ++k) EXPECT_LE(counts[k], counts[k - 1]);
}

TEST(Imbalance, FloorKeepsAtLeastOnePerClass) {
  const auto ds = indexed_dataset(10);
  Rng rng(5);
  const auto lt = build_imbalanced(ds, {0.001}, rng);
  for (int c : lt.class_counts()) EXPECT_GE(c, 1);
}

TEST(Imbalance, StepProfile) {
  const auto ds = indexed_dataset(100);
  Rng rng(6);
  ImbalanceSpec spec{0.1, ImbalanceProfile::Step};
  const auto lt = build_imbalanced(ds, spec, rng);
  EXPECT_EQ(lt.class_counts(), (std::vector<int>{100, 100, 100, 100, 100, 10, 10, 10, 10, 10}));
}

TEST(Imbalance, RejectsBadMuAndTestSplits) {
  auto ds = indexed_dataset(10);
  Rng rng(7);
  EXPECT_THROW(build_imbalanced(ds, {0.0}, rng), ConfigError);
  EXPECT_THROW(build_imbalanced(ds, {1.5}, rng), ConfigError);
  ds.split = Split::Test;
  const auto before = ds.checksum();
  EXPECT_THROW(build_imbalanced(ds, {0.1}, rng), ConfigError);
  EXPECT_EQ(ds.checksum(), before);
}

TEST(OODPair, SelfPairAndShapeRules) {
  const auto in = load_dataset("synthetic:glyphs,per_class=2,seed=1");
  const auto pair = make_ood_pair(in, in);
  EXPECT_EQ(pair.in_dist.checksum(), pair.out_dist.checksum());

  const auto noise = load_dataset("synthetic:noise,count=10,seed=2");
  EXPECT_NO_THROW(make_ood_pair(in, noise));

  const auto big = load_dataset("synthetic:noise,count=4,seed=2,size=64");
  EXPECT_THROW(make_ood_pair(in, big), DimensionError);
  const auto resized = make_ood_pair(in, big, ResizeRule::Nearest);
  EXPECT_TRUE(resized.out_dist.images.front().same_shape(in.images.front()));
}

TEST(Registry, FileLookupAndPairing) {
  const auto dir = scratch_dir("registry");
  {
    std::ofstream f(dir / "datasets.reg");
    f << "# desk sets\n"
      << "in  = synthetic:glyphs,per_class=2,seed=1\n"
      << "out = synthetic:glyphs-ood,count=8,seed=2   # held-out glyphs\n";
  }
  const auto reg = DatasetRegistry::from_file(dir / "datasets.reg");
  EXPECT_TRUE(reg.contains("in"));
  EXPECT_EQ(reg.descriptor("out"), "synthetic:glyphs-ood,count=8,seed=2");
  const auto pair = pair_ood("in", "out", reg);
  EXPECT_EQ(pair.out_dist.size(), 8u);
  EXPECT_THROW(reg.load("missing"), SourceError);
}

}  // namespace
}  // namespace lorot
