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


// Runs the lorot binary end to end. Each test works in its own temp directory.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lorot/checkpoint.hpp"
#include "lorot/datasets.hpp"

namespace lorot {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string output;
};

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lorot_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run lorot(const std::string& args, const fs::path& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string("\"") + LOROT_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

const std::string kTiny = std::string(LOROT_CONFIG_DIR) + "/tiny_mt_lorot_i.cfg";

// Two-channel 8x8 grayscale model whose answer is fixed by hand: the centre
// tap sees (pixel - 128/255), channel 0 fires on bright images, channel 1 on
// dark ones, and mid-grey images activate neither, giving a uniform row. The
// packed format stores 8-bit pixels, so mid-grey is 128/255.
void write_oracle_fixture(const fs::path& dir) {
  ModelSpec s;
  s.input = {8, 8, 1};
  s.channels = {2};
  s.num_classes = 2;
  s.input_mean = 128.0f / 255.0f;
  s.input_std = 1.0f;
  DualHeadModel<float> model(s);
  for (auto* p : model.parameters()) std::fill(p->value.begin(), p->value.end(), 0.0f);
  for (auto* p : model.parameters()) {
    if (p->name == "conv0.weight") {
      p->value[4 * 2 + 0] = 1.0f;
      p->value[4 * 2 + 1] = -1.0f;
    } else if (p->name == "primary.weight") {
      p->value[0] = 100.0f;
      p->value[3] = 100.0f;
    }
  }
  save_checkpoint(dir / "oracle.bin", model, "fixture");

  LabeledDataset in, out;
  in.name = "bright-dark";
  in.num_classes = 2;
  out.name = "grey";
  out.num_classes = 1;
  for (int i = 0; i < 20; ++i) {
    in.images.emplace_back(8, 8, 1, i % 2 == 0 ? 1.0f : 0.0f);
    in.labels.push_back(i % 2);
    out.images.emplace_back(8, 8, 1, 128.0f / 255.0f);
    out.labels.push_back(0);
  }
  save_packed(in, dir / "in.pack");
  save_packed(out, dir / "out.pack");
}

TEST(Cli, TrainWritesArtifactsAndRerunsReproduce) {
  const auto dir = scratch_dir("train");
  std::string checksum;
  for (const char* sub : {"a", "b"}) {
    const auto out = dir / sub;
    const auto r = lorot("train --config " + kTiny + " --training.epochs 2 --output_dir " + out.string(), dir);
    ASSERT_EQ(r.code, 0) << r.output;
    for (const char* f : {"checkpoint.bin", "history.jsonl", "metrics.json", "config.cfg", "manifest.json"})
      EXPECT_TRUE(fs::exists(out / f)) << f;
    const auto m = read_json(out / "metrics.json");
    if (checksum.empty()) checksum = m.at("history_checksum");
    else EXPECT_EQ(m.at("history_checksum"), checksum);
    EXPECT_FALSE(fs::exists(out / ".lock"));
  }
}

TEST(Cli, InvalidLambdaIsAUsageError) {
  const auto dir = scratch_dir("lambda");
  const auto r = lorot("train --config " + kTiny + " --training.lambda -1 --output_dir " + (dir / "o").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("training.lambda"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(dir / "o" / "checkpoint.bin"));
}

TEST(Cli, OracleFixtureScoresPerfectAuroc) {
  const auto dir = scratch_dir("oracle");
  write_oracle_fixture(dir);
  const auto r = lorot("eval ood --checkpoint " + (dir / "oracle.bin").string() + " --data packed:" +
                           (dir / "in.pack").string() + " --ood packed:" + (dir / "out.pack").string() +
                           " --score kl --out " + (dir / "e").string(),
                       dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = read_json(dir / "e" / "eval_ood.json");
  EXPECT_EQ(j.at("auroc").get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(dir / "e" / "scores.csv"));

  const auto acc = lorot("eval accuracy --checkpoint " + (dir / "oracle.bin").string() + " --data packed:" +
                             (dir / "in.pack").string() + " --out " + (dir / "e").string(),
                         dir);
  ASSERT_EQ(acc.code, 0) << acc.output;
  EXPECT_EQ(read_json(dir / "e" / "eval_accuracy.json").at("top1").get<double>(), 100.0);

  const auto conf = lorot("eval confidence --checkpoint " + (dir / "oracle.bin").string() + " --data packed:" +
                              (dir / "in.pack").string() + " --ood packed:" + (dir / "out.pack").string() +
                              " --out " + (dir / "e").string(),
                          dir);
  ASSERT_EQ(conf.code, 0) << conf.output;
  const auto cj = read_json(dir / "e" / "eval_confidence.json");
  EXPECT_NEAR(cj.at("out_means")[0].get<double>(), 0.5, 1e-6);
  EXPECT_TRUE(fs::exists(dir / "e" / "confidence.svg"));
}

TEST(Cli, AffinityAndAdversarialReports) {
  const auto dir = scratch_dir("eval");
  const auto out = dir / "run";
  ASSERT_EQ(lorot("train --config " + kTiny + " --training.epochs 2 --output_dir " + out.string(), dir).code, 0);
  const auto ckpt = (out / "checkpoint.bin").string();
  const auto a = lorot("eval affinity --checkpoint " + ckpt + " --config " + kTiny + " --transform identity --out " +
                           (dir / "e").string(),
                       dir);
  ASSERT_EQ(a.code, 0) << a.output;
  EXPECT_EQ(read_json(dir / "e" / "eval_affinity.json").at("affinity").get<double>(), 100.0);

  const auto adv = lorot("eval adversarial --checkpoint " + ckpt + " --config " + kTiny +
                             " --data synthetic:glyphs,per_class=3,seed=2 --steps 20 --out " + (dir / "e").string(),
                         dir);
  ASSERT_EQ(adv.code, 0) << adv.output;
  const auto j = read_json(dir / "e" / "eval_adversarial.json");
  EXPECT_LE(j.at("robust_accuracy").get<double>(), j.at("clean_accuracy").get<double>());
  EXPECT_LE(j.at("max_linf").get<double>(), 8.0 / 255.0 + 1e-8);
  EXPECT_TRUE(j.contains("report_checksum"));

  // A config asking for a different pretext head must be refused.
  const auto bad = lorot("eval accuracy --checkpoint " + ckpt + " --config " + kTiny +
                             " --training.variant lorot-e --out " + (dir / "e").string(),
                         dir);
  EXPECT_EQ(bad.code, 3) << bad.output;
  EXPECT_EQ(lorot("eval accuracy --checkpoint " + (dir / "nope.bin").string() +
                      " --data synthetic:glyphs,per_class=1,seed=1",
                  dir)
                .code,
            3);
}

TEST(Cli, UnknownRecipeListsTheAvailableOnes) {
  const auto dir = scratch_dir("recipe");
  const auto r = lorot("repro no-such-recipe --output_dir " + (dir / "o").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("strategy-table1-desk"), std::string::npos) << r.output;
  const auto list = lorot("repro --list", dir);
  EXPECT_EQ(list.code, 0);
  EXPECT_NE(list.output.find("ood-table1-desk"), std::string::npos);
}

TEST(Cli, LockedOutputDirectoryIsRefused) {
  const auto dir = scratch_dir("lock");
  fs::create_directories(dir / "o" / ".lock");
  const auto r = lorot("train --config " + kTiny + " --output_dir " + (dir / "o").string(), dir);
  EXPECT_EQ(r.code, 4) << r.output;
}

TEST(Cli, BuildImbalancedWritesALoadablePack) {
  const auto dir = scratch_dir("imbalanced");
  const auto pack = dir / "lt.pack";
  const auto r = lorot("build-imbalanced --data synthetic:glyphs,per_class=100,seed=1 --mu 0.1 --seed 3 --out " +
                           pack.string(),
                       dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto ds = load_packed(pack);
  EXPECT_EQ(ds.class_counts().front(), 100);
  EXPECT_EQ(ds.class_counts().back(), 10);
  EXPECT_EQ(lorot("build-imbalanced --data synthetic:glyphs,per_class=10,seed=1 --mu 0 --out " + pack.string(), dir).code,
            2);
}

TEST(Cli, PreviewWritesBothImages) {
  const auto dir = scratch_dir("preview");
  const auto r = lorot("preview --data synthetic:glyphs,per_class=1,seed=1 --index 3 --variant lorot-e --seed 5 --out " +
                           (dir / "p").string(),
                       dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "p" / "before.png"));
  EXPECT_TRUE(fs::exists(dir / "p" / "after.png"));
  EXPECT_TRUE(read_json(dir / "p" / "preview.json").contains("pretext_label"));
}

}  // namespace
}  // namespace lorot
