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

// lorot: train, evaluate and reproduce LoRot experiments.
//
// Exit codes:
//   0  success
//   1  runtime failure (I/O, corrupt data, numeric error)
//   2  invalid usage or configuration (the diagnostic names the field)
//   3  checkpoint does not match the configuration
//   4  output directory locked by another run

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "lorot/checkpoint.hpp"
#include "lorot/config.hpp"
#include "lorot/evaluation.hpp"
#include "lorot/png_io.hpp"
#include "lorot/recipes.hpp"
#include "lorot/report.hpp"

namespace fs = std::filesystem;
using namespace lorot;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2, kMismatch = 3, kLocked = 4 };

class LockedError : public Error {
 public:
  using Error::Error;
};

/// Config-key flags (`--training.lambda 0.3`) plus generic `--set key=value`.
struct Overrides {
  std::map<std::string, std::string> by_flag;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    for (const auto& key : config_keys()) {
      app->add_option("--" + key, by_flag[key], "config key " + key)->group("Config keys");
    }
    app->add_option("--set", sets, "override a config key (key=value), repeatable");
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& [k, v] : by_flag)
      if (!v.empty()) c.set(k, v);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(kv, "--set expects key=value");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
  }
};

ExperimentConfig load_config(const std::string& path, const Overrides& o) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(path);
  o.apply(c);
  c.apply_environment();
  return c;
}

std::unique_ptr<DirectoryLock> lock_dir(const fs::path& dir) {
  try {
    return std::make_unique<DirectoryLock>(dir);
  } catch (const Error& e) {
    throw LockedError(e.what());
  }
}

ModelSpec spec_for(const ExperimentConfig& c, const LabeledDataset& train, std::uint64_t seed) {
  ModelSpec s = c.model;
  const auto& im = train.images.front();
  s.input = {im.height(), im.width(), im.channels()};
  s.num_classes = train.num_classes;
  s.variant = c.training.strategy == Strategy::Baseline ? Variant::I : c.training.variant;
  s.init_seed = seed;
  return s;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const std::string& config_path, const Overrides& o, std::optional<std::uint64_t> seed_flag) {
  const auto c = load_config(config_path, o);
  const std::uint64_t seed = seed_flag.value_or(c.seeds.front());
  const fs::path dir = c.output_dir;
  auto lock = lock_dir(dir);
  RunManifest m;
  m.started_at = utc_timestamp();
  m.config_hash = c.hash();
  m.seeds = {seed};

  auto train = c.load(c.data.train, Split::Train);
  if (c.data.train_limit > 0 && static_cast<std::size_t>(c.data.train_limit) < train.size()) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(c.data.train_limit));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    train = train.subset(idx);
  }
  std::optional<LabeledDataset> val;
  if (!c.data.val.empty()) val = c.load(c.data.val, Split::Val);
  TrainingConfig t = c.training;
  t.seed = seed;
  const auto spec = spec_for(c, train, seed);
  std::cerr << "training " << to_string(t.strategy) << " (" << to_string(t.variant) << ") on " << train.size()
            << " images for " << t.epochs << " epochs, seed " << seed << "\n";
  auto result = run_training<float>(t, spec, train, val ? &*val : nullptr);

  Json extra = {{"strategy", std::string(to_string(t.strategy))}, {"lambda", t.lambda}, {"seed", seed}};
  save_checkpoint(dir / "checkpoint.bin", result.model, c.hash(), extra);
  write_history(dir / "history.jsonl", result.history);
  const auto test = c.load(c.data.test, Split::Test);
  Json metrics = {{"config_hash", c.hash()},
                  {"seed", seed},
                  {"test_accuracy", accuracy(result.model, test).top1},
                  {"history_checksum", result.history.checksum()},
                  {"forwarded_samples", result.model.forwarded_samples()}};
  write_json(dir / "metrics.json", metrics);
  write_atomic(dir / "config.cfg", c.canonical() + "output_dir = " + c.output_dir + "\n");
  m.artifacts = {"checkpoint.bin", "history.jsonl", "metrics.json", "config.cfg"};
  m.checksums["history.jsonl"] = result.history.checksum();
  m.finish(dir);
  std::cout << "test accuracy " << metrics["test_accuracy"].get<double>() << "\n"
            << "history checksum " << result.history.checksum() << "\n"
            << "wrote " << (dir / "checkpoint.bin").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string kind;
  std::string checkpoint;
  std::string config;
  std::string data;
  std::string ood;
  std::string score = "kl";
  std::string transform = "identity";
  bool exclude_identity = false;
  int steps = 20;
  double epsilon = 8.0 / 255.0;
  std::uint64_t seed = 0;
  std::string out = "eval_out";
  bool resize = false;
};

int cmd_eval(const EvalArgs& a, const Overrides& o) {
  CheckpointInfo info;
  std::optional<ExperimentConfig> cfg;
  if (!a.config.empty()) cfg = load_config(a.config, o);
  DualHeadModel<float> model = [&] {
    if (!cfg) return load_checkpoint<float>(a.checkpoint, &info);
    auto m = load_checkpoint<float>(a.checkpoint, &info);
    ModelSpec expected = cfg->model;
    expected.input = info.spec.input;
    expected.num_classes = info.spec.num_classes;
    expected.variant = info.spec.variant;
    if (cfg->training.strategy != Strategy::Baseline) expected.variant = cfg->training.variant;
    return load_checkpoint<float>(a.checkpoint, &info, &expected);
  }();
  const std::string data_ref = !a.data.empty() ? a.data : cfg ? cfg->data.test : "";
  if (data_ref.empty()) throw ConfigError("--data", "an evaluation dataset is required");
  auto load = [&](const std::string& ref) { return cfg ? cfg->load(ref, Split::Test) : load_dataset(ref); };
  const auto ds = load(data_ref);
  if (ds.num_classes != model.num_classes()) {
    throw CheckpointError("checkpoint has " + std::to_string(model.num_classes()) + " classes but the dataset has " +
                          std::to_string(ds.num_classes));
  }
  const fs::path dir = a.out;
  fs::create_directories(dir);
  Json report = {{"kind", a.kind},
                 {"checkpoint", a.checkpoint},
                 {"config_hash", info.config_hash},
                 {"seed", a.seed},
                 {"dataset", ds.name},
                 {"dataset_checksum", ds.checksum()}};

  if (a.kind == "accuracy") {
    const auto r = accuracy(model, ds, true);
    report["top1"] = r.top1;
    if (r.top5) report["top5"] = *r.top5;
    std::cout << "top-1 accuracy " << r.top1 << "\n";
  } else if (a.kind == "affinity") {
    const auto t = parse_shift_transform(a.transform);
    const auto r = affinity(model, ds, t, {a.seed, !a.exclude_identity});
    report["transform"] = std::string(to_string(t));
    report["include_identity"] = !a.exclude_identity;
    report["clean_accuracy"] = r.clean_accuracy;
    report["shifted_accuracy"] = r.shifted_accuracy;
    report["affinity"] = r.affinity;
    std::cout << "affinity " << r.affinity << "\n";
  } else if (a.kind == "ood" || a.kind == "confidence") {
    const std::string ood_ref = !a.ood.empty() ? a.ood : cfg ? cfg->data.ood : "";
    if (ood_ref.empty()) throw ConfigError("--ood", "an out-of-distribution dataset is required");
    const auto pair = make_ood_pair(ds, load(ood_ref), a.resize ? ResizeRule::Nearest : ResizeRule::None);
    if (a.kind == "ood") {
      const auto r = ood_evaluate(model, pair, parse_score_kind(a.score));
      report["score"] = std::string(to_string(r.score_kind));
      report["auroc"] = r.auroc;
      report["in_scores"] = r.in_scores;
      report["out_scores"] = r.out_scores;
      CsvTable scores({"side", "index", "score"});
      for (std::size_t i = 0; i < r.in_scores.size(); ++i)
        scores.add({"in", std::to_string(i), CsvTable::num(r.in_scores[i], 9)});
      for (std::size_t i = 0; i < r.out_scores.size(); ++i)
        scores.add({"out", std::to_string(i), CsvTable::num(r.out_scores[i], 9)});
      scores.write(dir / "scores.csv");
      std::cout << "auroc " << r.auroc << "\n";
    } else {
      const auto r = classwise_confidence(model, pair);
      report["in_groups"] = r.in_groups;
      report["in_means"] = r.in_means;
      report["out_groups"] = r.out_groups;
      report["out_means"] = r.out_means;
      report["in_confidence"] = r.in_confidence;
      report["out_confidence"] = r.out_confidence;
      CsvTable t({"side", "group", "mean_confidence"});
      for (std::size_t g = 0; g < r.in_groups.size(); ++g) t.add({"in", r.in_groups[g], CsvTable::num(r.in_means[g], 6)});
      for (std::size_t g = 0; g < r.out_groups.size(); ++g)
        t.add({"out", r.out_groups[g], CsvTable::num(r.out_means[g], 6)});
      t.write(dir / "confidence.csv");
      std::vector<std::string> ticks;
      for (std::size_t g = 0; g < std::max(r.in_groups.size(), r.out_groups.size()); ++g)
        ticks.push_back(std::to_string(g));
      write_atomic(dir / "confidence.svg",
                   render_svg({"Mean confidence per class", "class index", "mean max-softmax", ticks, 0, 1},
                              {{"in-distribution", {}, r.in_means, true}, {"out-of-distribution", {}, r.out_means, false}}));
      std::cout << "confidence report written\n";
    }
  } else if (a.kind == "adversarial") {
    AdversarialConfig adv = cfg ? cfg->training.adversarial : AdversarialConfig{};
    adv.epsilon = a.epsilon;
    adv.validate();
    const auto r = eval_adversarial(model, ds, adv, a.steps, a.seed);
    report["steps"] = r.steps;
    report["epsilon"] = r.epsilon;
    report["alpha"] = r.alpha;
    report["clean_accuracy"] = r.clean_accuracy;
    report["robust_accuracy"] = r.robust_accuracy;
    report["max_linf"] = r.max_linf;
    std::cout << "clean " << r.clean_accuracy << " robust " << r.robust_accuracy << "\n";
  } else {
    throw ConfigError("kind", "unknown eval kind '" + a.kind + "' (accuracy, affinity, ood, confidence, adversarial)");
  }
  report["report_checksum"] = report_checksum(report);
  write_json(dir / ("eval_" + a.kind + ".json"), report);
  return kOk;
}

// ---------------------------------------------------------------------------
// repro / sweep

int run_recipe(const Recipe& recipe, ExperimentConfig c) {
  const fs::path dir = c.output_dir;
  auto lock = lock_dir(dir);
  const auto started = utc_timestamp();
  std::cout << "recipe " << recipe.name << ": " << recipe.description << "\n"
            << "config hash " << c.hash() << ", seeds";
  for (auto s : c.seeds) std::cout << " " << s;
  std::cout << "\n";
  RecipeContext ctx;
  ctx.log = &std::cerr;
  const auto result = recipe.run(c, ctx);
  write_recipe_outputs(dir, c, result, started);
  for (const auto& row : result.comparison) std::cout << format_comparison(row) << "\n";
  std::cout << "report checksum " << result.checksum() << "\n"
            << "wrote " << (dir / "report.json").string() << "\n";
  return kOk;
}

int cmd_repro(const std::string& name, const std::string& config_path, const Overrides& o, bool list) {
  if (list || name.empty()) {
    for (const auto& r : recipes()) std::cout << r.name << "  " << r.description << "\n";
    return name.empty() && !list ? kUsage : kOk;
  }
  const auto& recipe = find_recipe(name);
  ExperimentConfig c = config_path.empty() ? recipe.defaults() : ExperimentConfig::from_file(config_path);
  o.apply(c);
  c.apply_environment();
  return run_recipe(recipe, c);
}

int cmd_sweep(const std::string& config_path, const Overrides& o) {
  ExperimentConfig c = config_path.empty() ? find_recipe("lambda-sweep-desk").defaults()
                                           : ExperimentConfig::from_file(config_path);
  o.apply(c);
  c.apply_environment();
  return run_recipe(find_recipe("lambda-sweep-desk"), c);
}

// ---------------------------------------------------------------------------
// preview

int cmd_preview(const std::string& image_path, const std::string& data, std::size_t index, const std::string& variant,
                std::uint64_t seed, const std::string& out) {
  ImageF image;
  int label = 0;
  if (!image_path.empty()) {
    image = io::read_image(image_path);
  } else {
    const auto ds = load_dataset(data);
    if (index >= ds.size()) throw ConfigError("--index", "index out of range (dataset has " + std::to_string(ds.size()) + " images)");
    image = ds.images[index];
    label = ds.labels[index];
  }
  Rng rng(seed);
  const auto s = transform_one(image, label, parse_variant(variant), rng);
  const fs::path dir = out;
  fs::create_directories(dir);
  io::write_png(dir / "before.png", image);
  io::write_png(dir / "after.png", s.image);
  Json j = {{"variant", variant},
            {"seed", seed},
            {"pretext_label", s.pretext_label.value()},
            {"rotation_degrees", s.pretext_label.rotation().degrees()},
            {"patch", {{"top_x", s.patch.top_x}, {"top_y", s.patch.top_y}, {"side", s.patch.side}}}};
  if (s.patch.cell_index) j["patch"]["cell_index"] = *s.patch.cell_index;
  write_json(dir / "preview.json", j);
  std::cout << "label " << s.pretext_label.value() << " rotation " << s.pretext_label.rotation().degrees()
            << " patch (" << s.patch.top_x << "," << s.patch.top_y << ") side " << s.patch.side << "\n"
            << "wrote " << (dir / "before.png").string() << " and " << (dir / "after.png").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// build-imbalanced

int cmd_build_imbalanced(const std::string& data, double mu, const std::string& profile, std::uint64_t seed,
                         const std::string& out) {
  const auto ds = load_dataset(data);
  ImbalanceSpec spec;
  spec.mu = mu;
  if (profile == "exponential") spec.profile = ImbalanceProfile::Exponential;
  else if (profile == "step") spec.profile = ImbalanceProfile::Step;
  else throw ConfigError("--profile", "unknown profile '" + profile + "'");
  Rng rng(seed);
  const auto lt = build_imbalanced(ds, spec, rng);
  save_packed(lt, out);
  const auto before = ds.class_counts(), after = lt.class_counts();
  for (std::size_t k = 0; k < after.size(); ++k)
    std::cout << "class " << k << " " << before[k] << " -> " << after[k] << "\n";
  std::cout << "total " << lt.size() << ", checksum " << lt.checksum() << "\nwrote " << out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LoRot: localizable rotation as an auxiliary self-supervised task"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;

  auto* train = app.add_subcommand("train", "train one model from a config file");
  Overrides train_o;
  train->add_option("--config", config_path, "experiment config file")->required();
  train->add_option("--seed", seed_flag, "seed (default: first entry of seeds)");
  train_o.attach(train);

  EvalArgs ea;
  Overrides eval_o;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("kind", ea.kind, "accuracy | affinity | ood | confidence | adversarial")->required();
  eval->add_option("--checkpoint", ea.checkpoint, "checkpoint file")->required();
  eval->add_option("--config", ea.config, "config the checkpoint must match");
  eval->add_option("--data", ea.data, "evaluation dataset (descriptor or registry name)");
  eval->add_option("--ood", ea.ood, "out-of-distribution dataset");
  eval->add_option("--score", ea.score, "kl | max-softmax");
  eval->add_option("--transform", ea.transform, "identity | rotation | lorot-i | lorot-e");
  eval->add_flag("--exclude-identity", ea.exclude_identity, "sample only non-identity transform labels");
  eval->add_option("--steps", ea.steps, "PGD steps");
  eval->add_option("--epsilon", ea.epsilon, "PGD radius");
  eval->add_option("--seed", ea.seed, "evaluation seed");
  eval->add_option("--out", ea.out, "output directory");
  eval->add_flag("--resize", ea.resize, "resize OOD images to the in-distribution shape (nearest)");
  eval_o.attach(eval);

  std::string recipe_name;
  bool list = false;
  Overrides repro_o;
  auto* repro = app.add_subcommand("repro", "run a named desk-scale recipe");
  repro->add_option("recipe", recipe_name, "recipe name");
  repro->add_option("--config", config_path, "start from this config instead of the recipe defaults");
  repro->add_flag("--list", list, "list recipes");
  repro_o.attach(repro);

  Overrides sweep_o;
  auto* sweep = app.add_subcommand("sweep", "lambda sweep (accuracy and AUROC per lambda)");
  sweep->add_option("--config", config_path, "experiment config file");
  sweep_o.attach(sweep);

  std::string image_path, data, variant = "lorot-i", out = "preview";
  std::size_t index = 0;
  std::uint64_t seed = 0;
  auto* preview = app.add_subcommand("preview", "write before/after PNGs of one transform draw");
  preview->add_option("--image", image_path, "PNG/PPM/PGM file");
  preview->add_option("--data", data, "dataset descriptor (with --index)");
  preview->add_option("--index", index, "image index in --data");
  preview->add_option("--variant", variant, "lorot-i | lorot-e | rotation");
  preview->add_option("--seed", seed, "seed");
  preview->add_option("--out", out, "output directory");

  double mu = 0.01;
  std::string profile = "exponential", packed_out;
  auto* build = app.add_subcommand("build-imbalanced", "write a long-tailed subset as a packed dataset");
  build->add_option("--data", data, "source dataset descriptor")->required();
  build->add_option("--mu", mu, "imbalance ratio in (0, 1]");
  build->add_option("--profile", profile, "exponential | step");
  build->add_option("--seed", seed, "subsampling seed");
  build->add_option("--out", packed_out, "output packed file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(config_path, train_o, seed_flag);
    if (*eval) return cmd_eval(ea, eval_o);
    if (*repro) return cmd_repro(recipe_name, config_path, repro_o, list);
    if (*sweep) return cmd_sweep(config_path, sweep_o);
    if (*preview) {
      if (image_path.empty() == data.empty()) throw ConfigError("--image", "give exactly one of --image or --data");
      return cmd_preview(image_path, data, index, variant, seed, out);
    }
    if (*build) return cmd_build_imbalanced(data, mu, profile, seed, packed_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid configuration: " << e.what() << "\n";
    return kUsage;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const LockedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kLocked;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
