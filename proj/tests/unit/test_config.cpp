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

#include <cstdlib>
#include <string>

#include "lorot/config.hpp"

namespace lorot {
namespace {

constexpr const char* kSample = R"(# tiny run
name = sample
experiment = ood
seeds = 0, 1, 2
output_dir = runs/sample
data.train = synthetic:glyphs,per_class=10,seed=1
data.ood = synthetic:glyphs-ood,count=20,seed=3   # held-out glyphs
model.channels = 8,16
training.strategy = mt
training.variant = lorot-e
training.lambda = 0.3
optimizer.milestones = 4, 8
)";

TEST(Config, ParsesKeysListsAndComments) {
  const auto c = ExperimentConfig::parse(kSample);
  EXPECT_EQ(c.name, "sample");
  EXPECT_EQ(c.kind, ExperimentKind::OOD);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(c.model.channels, (std::vector<int>{8, 16}));
  EXPECT_EQ(c.training.strategy, Strategy::MT);
  EXPECT_EQ(c.training.variant, Variant::E);
  EXPECT_DOUBLE_EQ(c.training.lambda, 0.3);
  EXPECT_EQ(c.training.optimizer.milestones, (std::vector<int>{4, 8}));
  EXPECT_EQ(c.data.ood, "synthetic:glyphs-ood,count=20,seed=3");
}

TEST(Config, CanonicalDumpParsesBackToTheSameHash) {
  const auto c = ExperimentConfig::parse(kSample);
  const auto again = ExperimentConfig::parse(c.canonical() + "output_dir = elsewhere\n");
  EXPECT_EQ(again.hash(), c.hash());
  EXPECT_EQ(again.canonical(), c.canonical());
}

TEST(Config, DuplicateAndUnknownKeysAreRejected) {
  try {
    ExperimentConfig::parse("name = a\nname = b\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "name");
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
  EXPECT_THROW(ExperimentConfig::parse("training.lamda = 0.1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("just words\n"), ConfigError);
}

TEST(Config, ValidationNamesTheOffendingField) {
  auto field_of = [](const std::string& text) -> std::string {
    try {
      ExperimentConfig::parse(text);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return "";
  };
  EXPECT_EQ(field_of("training.lambda = -1\n"), "training.lambda");
  EXPECT_EQ(field_of("training.batch_size = zero\n"), "training.batch_size");
  EXPECT_EQ(field_of("model.channels = 8,-2\n"), "model.channels");
  EXPECT_EQ(field_of("experiment = ood\n"), "data.ood");
  EXPECT_EQ(field_of("optimizer.nesterov = maybe\n"), "optimizer.nesterov");
  EXPECT_EQ(field_of("imbalance.mu = 2\n"), "imbalance.mu");
  EXPECT_EQ(field_of(""), "");
}

TEST(Config, HashIgnoresOutputDirOnly) {
  auto a = ExperimentConfig::parse(kSample);
  auto b = a;
  b.output_dir = "somewhere/else";
  EXPECT_EQ(a.hash(), b.hash());
  b.set("training.lambda", "0.5");
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Config, EnvironmentOverridesOutputDir) {
  auto c = ExperimentConfig::parse(kSample);
  const auto before = c.hash();
  ::setenv("LOROT_OUTPUT_DIR", "/tmp/lorot_env_dir", 1);
  c.apply_environment();
  ::unsetenv("LOROT_OUTPUT_DIR");
  EXPECT_EQ(c.output_dir, "/tmp/lorot_env_dir");
  EXPECT_EQ(c.hash(), before);
}

TEST(Config, EveryKeyRoundTripsThroughItsDump) {
  const auto c = ExperimentConfig::parse(kSample);
  for (const auto& key : config_keys()) {
    auto copy = ExperimentConfig::parse(kSample);
    const auto line_start = c.canonical().find(key + " = ");
    if (key == "output_dir") continue;
    ASSERT_NE(line_start, std::string::npos) << key;
    const auto text = c.canonical();
    const auto eol = text.find('\n', line_start);
    const auto value = text.substr(line_start + key.size() + 3, eol - line_start - key.size() - 3);
    copy.set(key, value);
    EXPECT_EQ(copy.canonical(), c.canonical()) << key;
  }
}

}  // namespace
}  // namespace lorot
