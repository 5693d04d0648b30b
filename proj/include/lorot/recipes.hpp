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

// Named desk-scale recipes. Each recipe is an ExperimentConfig with desk
// defaults plus a runner that trains, evaluates and returns a JSON report,
// CSV tables and comparison rows against full-scale reference values.
// Reference values are printed for orientation only; nothing checks against
// them.

#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "lorot/config.hpp"
#include "lorot/evaluation.hpp"
#include "lorot/report.hpp"

namespace lorot {

inline constexpr const char* kReferenceMarker = "reference only, not a target";

/// Trained models keyed by (training setup, model spec, training data). Lets
/// one process reuse a model across several recipes.
class TrainCache {
 public:
  const TrainingResult<float>& get(const TrainingConfig& cfg, const ModelSpec& spec, const LabeledDataset& train) {
    const std::string key = make_key(cfg, spec, train);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      ++hits_;
      return *it->second;
    }
    auto result = std::make_unique<TrainingResult<float>>(run_training<float>(cfg, spec, train));
    ++trained_;
    return *entries_.emplace(key, std::move(result)).first->second;
  }

  std::size_t trained() const noexcept { return trained_; }
  std::size_t hits() const noexcept { return hits_; }

  static std::string make_key(const TrainingConfig& cfg, const ModelSpec& spec, const LabeledDataset& train) {
    ExperimentConfig c;
    c.training = cfg;
    c.model = spec;
    c.seeds = {cfg.seed};
    Fnv1a h;
    h.text(c.canonical()).value(spec.init_seed).value(spec.num_classes).value(spec.input.h).value(spec.input.w);
    h.value(spec.input.c).text(train.checksum());
    return h.hex();
  }

 private:
  std::map<std::string, std::unique_ptr<TrainingResult<float>>> entries_;
  std::size_t trained_ = 0;
  std::size_t hits_ = 0;
};

struct RecipeContext {
  TrainCache* cache = nullptr;  // optional; a private cache is used otherwise
  std::ostream* log = nullptr;  // progress lines
};

struct ComparisonRow {
  std::string label;
  double desk = 0;
  std::optional<double> reference;
};

struct RecipeResult {
  Json report = Json::object();
  std::map<std::string, CsvTable> tables;  // file stem -> table
  std::map<std::string, std::string> plots;  // file stem -> SVG text
  std::vector<ComparisonRow> comparison;
  std::map<std::string, TrainingHistory> histories;  // run label -> history

  /// Deterministic fingerprint of the report (volatile fields removed).
  std::string checksum() const { return report_checksum(report); }
};

struct Recipe {
  std::string name;
  std::string description;
  std::function<ExperimentConfig()> defaults;
  std::function<RecipeResult(const ExperimentConfig&, RecipeContext&)> run;
};

// ---------------------------------------------------------------------------
// Shared helpers

namespace recipe_detail {

inline double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline void say(RecipeContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << std::endl;
}

/// Desk defaults shared by every recipe: 10k training scenes, 2k test scenes,
/// the small reference CNN and SGD with step decay.
inline ExperimentConfig desk_base(std::string name, ExperimentKind kind) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.kind = kind;
  c.seeds = {0, 1, 2};
  c.output_dir = "runs/" + c.name;
  c.data.train = "synthetic:textures,per_class=1000,seed=1,min_scale=2,max_scale=3";
  c.data.test = "synthetic:textures,per_class=200,seed=2,min_scale=2,max_scale=3";
  c.data.ood = "synthetic:shapes-ood,count=2000,seed=3,min_scale=2,max_scale=3";
  c.model.channels = {8, 16, 32};
  c.training.epochs = 8;
  c.training.batch_size = 64;
  c.training.optimizer.lr = 0.05;
  c.training.optimizer.schedule = Schedule::Step;
  c.training.optimizer.milestones = {4, 6};
  c.training.lambda = 0.1;
  return c;
}

struct Arm {
  std::string label;
  Strategy strategy;
  Variant variant;
};

inline Json arm_json(const Arm& a) {
  return {{"label", a.label}, {"strategy", std::string(to_string(a.strategy))},
          {"variant", std::string(to_string(a.variant))}};
}

struct Data {
  LabeledDataset train, test;
  std::optional<LabeledDataset> ood;
};

inline Data load_data(const ExperimentConfig& c, bool with_ood) {
  Data d{c.load(c.data.train, Split::Train), c.load(c.data.test, Split::Test), std::nullopt};
  if (c.data.train_limit > 0 && static_cast<std::size_t>(c.data.train_limit) < d.train.size()) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(c.data.train_limit));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    d.train = d.train.subset(idx);
  }
  if (with_ood && !c.data.ood.empty()) d.ood = c.load(c.data.ood, Split::Test);
  return d;
}

inline ModelSpec model_for(const ExperimentConfig& c, const LabeledDataset& train, std::uint64_t seed) {
  ModelSpec s = c.model;
  const auto& im = train.images.front();
  s.input = {im.height(), im.width(), im.channels()};
  s.num_classes = train.num_classes;
  s.init_seed = seed;
  return s;
}

inline TrainingConfig training_for(const ExperimentConfig& c, const Arm& arm, std::uint64_t seed) {
  TrainingConfig t = c.training;
  t.strategy = arm.strategy;
  t.variant = arm.variant;
  t.seed = seed;
  return t;
}

inline const TrainingResult<float>& train(RecipeContext& ctx, TrainCache& own, const ExperimentConfig& c,
                                          const Arm& arm, std::uint64_t seed, const LabeledDataset& data,
                                          RecipeResult& out) {
  TrainCache& cache = ctx.cache ? *ctx.cache : own;
  say(ctx, "  training " + arm.label + " seed " + std::to_string(seed) + " on " + std::to_string(data.size()) +
               " images");
  const auto& r = cache.get(training_for(c, arm, seed), model_for(c, data, seed), data);
  out.histories[arm.label + "/seed" + std::to_string(seed)] = r.history;
  return r;
}

inline Json header(const ExperimentConfig& c, const std::string& recipe) {
  return {{"recipe", recipe},
          {"config_hash", c.hash()},
          {"seeds", c.seeds},
          {"code_version", kVersion},
          {"reference_note", kReferenceMarker}};
}

inline Json histories_json(const RecipeResult& r) {
  Json j = Json::object();
  for (const auto& [k, h] : r.histories) j[k] = h.checksum();
  return j;
}

}  // namespace recipe_detail

// ---------------------------------------------------------------------------
// Recipes

/// Affinity of global rotation, LoRot-I and LoRot-E (plus identity) on a model
/// trained on clean data only.
inline RecipeResult run_affinity_recipe(const ExperimentConfig& c, RecipeContext& ctx) {
  using namespace recipe_detail;
  TrainCache own;
  RecipeResult out;
  const auto data = load_data(c, false);
  const Arm base{"baseline", Strategy::Baseline, Variant::I};
  std::map<ShiftTransform, std::vector<double>> per;
  Json runs = Json::array();
  CsvTable table({"seed", "transform", "clean_accuracy", "shifted_accuracy", "affinity"});
  for (auto seed : c.seeds) {
    const auto& r = train(ctx, own, c, base, seed, data.train, out);
    for (auto t : c.eval.transforms) {
      AffinityOptions opt{derive_seed({seed, 0x414646ULL}), c.eval.include_identity};
      const auto a = affinity(r.model, data.test, t, opt);
      per[t].push_back(a.affinity);
      runs.push_back({{"seed", seed},
                      {"transform", std::string(to_string(t))},
                      {"clean_accuracy", a.clean_accuracy},
                      {"shifted_accuracy", a.shifted_accuracy},
                      {"clean_correct", a.clean_correct},
                      {"shifted_correct", a.shifted_correct},
                      {"affinity", a.affinity}});
      table.add({std::to_string(seed), std::string(to_string(t)), CsvTable::num(a.clean_accuracy),
                 CsvTable::num(a.shifted_accuracy), CsvTable::num(a.affinity)});
    }
  }
  const std::map<ShiftTransform, double> ref{
      {ShiftTransform::GlobalRotation, 58.06}, {ShiftTransform::LoRotI, 93.78}, {ShiftTransform::LoRotE, 90.15}};
  Json means = Json::object();
  for (auto t : c.eval.transforms) {
    means[std::string(to_string(t))] = mean(per[t]);
    ComparisonRow row{"affinity " + std::string(to_string(t)), mean(per[t]), std::nullopt};
    if (ref.count(t)) row.reference = ref.at(t);
    out.comparison.push_back(row);
  }
  out.report = header(c, "affinity-table2-desk");
  out.report["runs"] = runs;
  out.report["mean_affinity"] = means;
  out.report["history_checksums"] = histories_json(out);
  out.tables["affinity"] = table;
  return out;
}

/// Accuracy of Baseline, Rot (DA), Rot (MT), LoRot-I (MT) and LoRot-E (MT).
inline RecipeResult run_strategy_recipe(const ExperimentConfig& c, RecipeContext& ctx) {
  using namespace recipe_detail;
  TrainCache own;
  RecipeResult out;
  const auto data = load_data(c, false);
  const std::vector<std::pair<Arm, std::optional<double>>> arms{
      {{"baseline", Strategy::Baseline, Variant::I}, 95.01},
      {{"rot-da", Strategy::DA, Variant::GlobalRot}, 92.76},
      {{"rot-mt", Strategy::MT, Variant::GlobalRot}, 93.38},
      {{"lorot-i-mt", Strategy::MT, Variant::I}, 95.92},
      {{"lorot-e-mt", Strategy::MT, Variant::E}, 95.77},
  };
  CsvTable table({"arm", "seed", "accuracy"});
  Json arms_json = Json::array();
  for (const auto& [arm, ref] : arms) {
    std::vector<double> accs;
    for (auto seed : c.seeds) {
      const auto& r = train(ctx, own, c, arm, seed, data.train, out);
      accs.push_back(accuracy(r.model, data.test).top1);
      table.add({arm.label, std::to_string(seed), CsvTable::num(accs.back())});
    }
    Json a = arm_json(arm);
    a["per_seed_accuracy"] = accs;
    a["mean_accuracy"] = mean(accs);
    arms_json.push_back(a);
    out.comparison.push_back({"accuracy " + arm.label, mean(accs), ref});
  }
  out.report = header(c, "strategy-table1-desk");
  out.report["arms"] = arms_json;
  out.report["history_checksums"] = histories_json(out);
  out.tables["accuracy"] = table;
  return out;
}

/// OOD detection AUROC for Baseline, LoRot-I (MT) and LoRot-E (MT), plus the
/// class-wise confidence report and plot.
inline RecipeResult run_ood_recipe(const ExperimentConfig& c, RecipeContext& ctx) {
  using namespace recipe_detail;
  TrainCache own;
  RecipeResult out;
  const auto data = load_data(c, true);
  if (!data.ood) throw ConfigError("data.ood", "the OOD recipe needs an out-of-distribution set");
  const auto pair = make_ood_pair(data.test, *data.ood);
  const std::vector<std::pair<Arm, std::optional<double>>> arms{
      {{"baseline", Strategy::Baseline, Variant::I}, 90.9},
      {{"lorot-i-mt", Strategy::MT, Variant::I}, 98.6},
      {{"lorot-e-mt", Strategy::MT, Variant::E}, 98.7},
  };
  CsvTable table({"arm", "seed", "score", "auroc", "accuracy"});
  CsvTable conf({"arm", "group", "side", "mean_confidence"});
  Json arms_json = Json::array();
  std::vector<PlotSeries> series;
  for (const auto& [arm, ref] : arms) {
    std::vector<double> aurocs, msp_aurocs, accs;
    Json seeds_json = Json::array();
    std::optional<ConfidenceReport> first_conf;
    for (auto seed : c.seeds) {
      const auto& r = train(ctx, own, c, arm, seed, data.train, out);
      const auto rep = ood_evaluate(r.model, pair, c.eval.score);
      const auto msp = ood_evaluate(r.model, pair, ScoreKind::MaxSoftmax);
      const double acc = accuracy(r.model, data.test).top1;
      aurocs.push_back(100.0 * rep.auroc);
      msp_aurocs.push_back(100.0 * msp.auroc);
      accs.push_back(acc);
      table.add({arm.label, std::to_string(seed), std::string(to_string(c.eval.score)), CsvTable::num(aurocs.back()),
                 CsvTable::num(acc)});
      table.add({arm.label, std::to_string(seed), "max-softmax", CsvTable::num(msp_aurocs.back()), CsvTable::num(acc)});
      seeds_json.push_back({{"seed", seed},
                            {"auroc", rep.auroc},
                            {"auroc_max_softmax", msp.auroc},
                            {"accuracy", acc},
                            {"in_scores_checksum", Fnv1a().values<double>(rep.in_scores).hex()},
                            {"out_scores_checksum", Fnv1a().values<double>(rep.out_scores).hex()}});
      if (!first_conf) first_conf = classwise_confidence(r.model, pair);
    }
    Json a = arm_json(arm);
    a["score"] = std::string(to_string(c.eval.score));
    a["per_seed"] = seeds_json;
    a["mean_auroc"] = mean(aurocs);
    a["mean_auroc_max_softmax"] = mean(msp_aurocs);
    a["mean_accuracy"] = mean(accs);
    const auto& cr = *first_conf;
    a["confidence"] = {{"in_groups", cr.in_groups}, {"in_means", cr.in_means},
                       {"out_groups", cr.out_groups}, {"out_means", cr.out_means}};
    for (std::size_t g = 0; g < cr.in_groups.size(); ++g)
      conf.add({arm.label, cr.in_groups[g], "in", CsvTable::num(cr.in_means[g], 6)});
    for (std::size_t g = 0; g < cr.out_groups.size(); ++g)
      conf.add({arm.label, cr.out_groups[g], "out", CsvTable::num(cr.out_means[g], 6)});
    PlotSeries in_s{arm.label + " in", {}, cr.in_means, true}, out_s{arm.label + " out", {}, cr.out_means, false};
    series.push_back(in_s);
    series.push_back(out_s);
    arms_json.push_back(a);
    out.comparison.push_back({"auroc " + arm.label, mean(aurocs), ref});
  }
  out.report = header(c, "ood-table1-desk");
  out.report["in_dist"] = pair.in_dist.name;
  out.report["out_dist"] = pair.out_dist.name;
  out.report["arms"] = arms_json;
  out.report["history_checksums"] = histories_json(out);
  out.tables["auroc"] = table;
  out.tables["confidence"] = conf;
  std::vector<std::string> ticks;
  const std::size_t groups = std::max(pair.in_dist.num_classes, pair.out_dist.num_classes);
  for (std::size_t g = 0; g < groups; ++g) ticks.push_back(std::to_string(g));
  out.plots["confidence"] = render_svg({"Mean confidence per class (dashed: in-distribution)", "class index",
                                        "mean max-softmax", ticks, 0.0, 1.0},
                                       series);
  return out;
}

/// Long-tailed training sets built with the exponential profile; Baseline and
/// LoRot-E (MT) accuracy on the balanced test set for each imbalance ratio.
inline RecipeResult run_imbalance_recipe(const ExperimentConfig& c, RecipeContext& ctx) {
  using namespace recipe_detail;
  TrainCache own;
  RecipeResult out;
  const auto data = load_data(c, false);
  const std::vector<Arm> arms{{"baseline", Strategy::Baseline, Variant::I}, {"lorot-e-mt", Strategy::MT, Variant::E}};
  const std::map<double, std::pair<double, double>> ref{{0.01, {77.03, 81.82}}, {0.02, {80.94, 84.41}},
                                                        {0.05, {85.46, 86.67}}};
  CsvTable table({"mu", "arm", "seed", "train_size", "accuracy"});
  Json rows = Json::array();
  for (double mu : c.eval.imbalance_mus) {
    ImbalanceSpec spec = c.imbalance;
    spec.mu = mu;
    Json row = {{"mu", mu}};
    for (std::size_t ai = 0; ai < arms.size(); ++ai) {
      const auto& arm = arms[ai];
      std::vector<double> accs;
      std::vector<std::size_t> sizes;
      for (auto seed : c.seeds) {
        // The subset depends on the seed only, so every arm sees the same data.
        Rng rng(derive_seed({seed, 0x494d42ULL}));
        const auto lt = build_imbalanced(data.train, spec, rng);
        const auto& r = train(ctx, own, c, {arm.label + "@mu=" + CsvTable::num(mu, 3), arm.strategy, arm.variant},
                              seed, lt, out);
        accs.push_back(accuracy(r.model, data.test).top1);
        sizes.push_back(lt.size());
        table.add({CsvTable::num(mu, 3), arm.label, std::to_string(seed), std::to_string(lt.size()),
                   CsvTable::num(accs.back())});
      }
      row[arm.label] = {{"per_seed_accuracy", accs}, {"mean_accuracy", mean(accs)}, {"train_sizes", sizes}};
      std::optional<double> rv;
      if (ref.count(mu)) rv = ai == 0 ? ref.at(mu).first : ref.at(mu).second;
      out.comparison.push_back({"accuracy " + arm.label + " mu=" + CsvTable::num(mu, 2), mean(accs), rv});
    }
    rows.push_back(row);
  }
  out.report = header(c, "imbalance-mu001-desk");
  out.report["profile"] = c.imbalance.profile == ImbalanceProfile::Exponential ? "exponential" : "step";
  out.report["rows"] = rows;
  out.report["history_checksums"] = histories_json(out);
  out.tables["imbalance"] = table;
  return out;
}

/// Standard training, PGD adversarial training, and adversarial training with
/// LoRot-E (MT); clean and PGD accuracy for each configured step count.
inline RecipeResult run_adversarial_recipe(const ExperimentConfig& c, RecipeContext& ctx) {
  using namespace recipe_detail;
  TrainCache own;
  RecipeResult out;
  const auto data = load_data(c, false);
  struct AdvArm {
    Arm arm;
    bool adversarial;
    std::vector<double> ref;  // clean, 20-step, 100-step
  };
  const std::vector<AdvArm> arms{
      {{"standard", Strategy::Baseline, Variant::I}, false, {95.3, 0.0, 0.0}},
      {{"adv-training", Strategy::Baseline, Variant::I}, true, {83.4, 46.5, 46.5}},
      {{"adv-training+lorot-e", Strategy::MT, Variant::E}, true, {82.6, 52.8, 52.8}},
  };
  CsvTable table({"arm", "seed", "steps", "clean_accuracy", "robust_accuracy", "max_linf"});
  Json arms_json = Json::array();
  for (const auto& a : arms) {
    ExperimentConfig ca = c;
    ca.training.adversarial.enabled = a.adversarial;
    std::vector<double> clean;
    std::map<int, std::vector<double>> robust;
    for (auto seed : c.seeds) {
      const auto& r = train(ctx, own, ca, a.arm, seed, data.train, out);
      auto model = r.model;
      bool first = true;
      for (int steps : c.eval.adversarial_steps) {
        const auto e = eval_adversarial(model, data.test, c.training.adversarial, steps, derive_seed({seed, 0x45564cULL}));
        if (first) clean.push_back(e.clean_accuracy);
        first = false;
        robust[steps].push_back(e.robust_accuracy);
        table.add({a.arm.label, std::to_string(seed), std::to_string(steps), CsvTable::num(e.clean_accuracy),
                   CsvTable::num(e.robust_accuracy), CsvTable::num(e.max_linf, 8)});
      }
    }
    Json j = arm_json(a.arm);
    j["adversarial_training"] = a.adversarial;
    j["mean_clean_accuracy"] = mean(clean);
    Json rj = Json::object();
    for (const auto& [steps, v] : robust) rj[std::to_string(steps)] = mean(v);
    j["mean_robust_accuracy"] = rj;
    arms_json.push_back(j);
    out.comparison.push_back({"clean " + a.arm.label, mean(clean), a.ref[0]});
    for (const auto& [steps, v] : robust) {
      std::optional<double> rv;
      if (steps == 20) rv = a.ref[1];
      if (steps == 100) rv = a.ref[2];
      out.comparison.push_back({"pgd-" + std::to_string(steps) + " " + a.arm.label, mean(v), rv});
    }
  }
  out.report = header(c, "adversarial-desk");
  out.report["epsilon"] = c.training.adversarial.epsilon;
  out.report["arms"] = arms_json;
  out.report["history_checksums"] = histories_json(out);
  out.tables["adversarial"] = table;
  return out;
}

/// LoRot-I (MT) accuracy (and AUROC when an OOD set is configured) across lambda.
inline RecipeResult run_lambda_recipe(const ExperimentConfig& c, RecipeContext& ctx) {
  using namespace recipe_detail;
  TrainCache own;
  RecipeResult out;
  const auto data = load_data(c, true);
  const Arm arm{"lorot-i-mt", Strategy::MT, Variant::I};
  const std::map<double, double> ref{{0.1, 95.92}, {0.2, 96.16}, {0.3, 95.72}, {0.4, 95.92}, {0.5, 95.84}};
  auto trainer = [&](const TrainingConfig& t, const ModelSpec& s) -> DualHeadModel<float> {
    ExperimentConfig cl = c;
    cl.training.lambda = t.lambda;
    return train(ctx, own, cl, {arm.label + "@lambda=" + CsvTable::num(t.lambda, 2), arm.strategy, arm.variant},
                 t.seed, data.train, out)
        .model;
  };
  TrainingConfig base = training_for(c, arm, 0);
  const auto rows = lambda_sweep(base, model_for(c, data.train, 0), c.eval.lambdas, c.seeds, data.train, data.test,
                                 data.ood ? &*data.ood : nullptr, trainer);
  CsvTable table({"lambda", "mean_accuracy", "mean_auroc"});
  Json rj = Json::array();
  double lo = 1e9, hi = -1e9;
  for (const auto& r : rows) {
    table.add({CsvTable::num(r.lambda, 3), CsvTable::num(r.accuracy), r.auroc ? CsvTable::num(*r.auroc) : ""});
    Json j = {{"lambda", r.lambda}, {"per_seed_accuracy", r.per_seed_accuracy}, {"mean_accuracy", r.accuracy}};
    if (r.auroc) j["mean_auroc"] = *r.auroc;
    rj.push_back(j);
    lo = std::min(lo, r.accuracy);
    hi = std::max(hi, r.accuracy);
    std::optional<double> rv;
    for (const auto& [l, v] : ref)
      if (std::abs(l - r.lambda) < 1e-9) rv = v;
    out.comparison.push_back({"accuracy lambda=" + CsvTable::num(r.lambda, 2), r.accuracy, rv});
  }
  out.report = header(c, "lambda-sweep-desk");
  out.report["rows"] = rj;
  out.report["accuracy_spread"] = hi - lo;
  out.report["history_checksums"] = histories_json(out);
  out.tables["lambda_sweep"] = table;
  PlotSeries s{"accuracy", {}, {}, false};
  for (const auto& r : rows) {
    s.x.push_back(r.lambda);
    s.y.push_back(r.accuracy);
  }
  out.plots["lambda_sweep"] = render_svg({"Accuracy across lambda", "lambda", "accuracy (%)", {}, std::max(0.0, lo - 5),
                                          std::min(100.0, hi + 5)},
                                         {s});
  return out;
}

// ---------------------------------------------------------------------------
// Registry

inline const std::vector<Recipe>& recipes() {
  using recipe_detail::desk_base;
  static const std::vector<Recipe> all = {
      {"affinity-table2-desk", "affinity of rotation, LoRot-I and LoRot-E on a clean-trained model",
       [] {
         auto c = desk_base("affinity-table2-desk", ExperimentKind::Affinity);
         c.seeds = {0};
         return c;
       },
       run_affinity_recipe},
      {"strategy-table1-desk", "accuracy of Baseline, Rot (DA/MT) and LoRot-I/E (MT)",
       [] { return desk_base("strategy-table1-desk", ExperimentKind::Classify); }, run_strategy_recipe},
      {"ood-table1-desk", "KL-to-uniform AUROC of Baseline and LoRot-I/E (MT) against amorphous-shape scenes",
       [] {
         auto c = desk_base("ood-table1-desk", ExperimentKind::OOD);
         c.training.optimizer.kind = OptimizerKind::Adam;
         c.training.optimizer.lr = 1e-3;
         c.training.optimizer.weight_decay = 0.0;
         c.training.optimizer.milestones = {c.training.epochs / 2};
         return c;
       },
       run_ood_recipe},
      {"imbalance-mu001-desk", "long-tailed accuracy of Baseline and LoRot-E (MT) for mu in {0.01, 0.02, 0.05}",
       [] {
         auto c = desk_base("imbalance-mu001-desk", ExperimentKind::Imbalance);
         c.eval.imbalance_mus = {0.01, 0.02, 0.05};
         c.training.epochs = 30;
         c.training.optimizer.milestones = {20, 25};
         return c;
       },
       run_imbalance_recipe},
      {"adversarial-desk", "clean and PGD-20/100 accuracy of standard, adversarial and adversarial+LoRot-E training",
       [] {
         auto c = desk_base("adversarial-desk", ExperimentKind::Adversarial);
         c.seeds = {0};
         c.data.train_limit = 2000;
         c.data.test = "synthetic:textures,per_class=50,seed=2,min_scale=2,max_scale=3";
         c.training.epochs = 6;
         c.training.optimizer.milestones = {4};
         return c;
       },
       run_adversarial_recipe},
      {"lambda-sweep-desk", "LoRot-I (MT) accuracy for lambda in {0.1, 0.3, 0.5}",
       [] {
         auto c = desk_base("lambda-sweep-desk", ExperimentKind::LambdaSweep);
         c.data.ood.clear();
         return c;
       },
       run_lambda_recipe},
  };
  return all;
}

inline std::vector<std::string> recipe_names() {
  std::vector<std::string> n;
  for (const auto& r : recipes()) n.push_back(r.name);
  return n;
}

inline const Recipe& find_recipe(const std::string& name) {
  for (const auto& r : recipes())
    if (r.name == name) return r;
  std::string list;
  for (const auto& n : recipe_names()) list += "\n  " + n;
  throw ConfigError("recipe", "unknown recipe '" + name + "'; available recipes:" + list);
}

/// Runs a recipe selected by the experiment kind of a config file.
inline const Recipe& recipe_for_kind(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Affinity: return find_recipe("affinity-table2-desk");
    case ExperimentKind::Classify: return find_recipe("strategy-table1-desk");
    case ExperimentKind::OOD: return find_recipe("ood-table1-desk");
    case ExperimentKind::Imbalance: return find_recipe("imbalance-mu001-desk");
    case ExperimentKind::Adversarial: return find_recipe("adversarial-desk");
    case ExperimentKind::LambdaSweep: return find_recipe("lambda-sweep-desk");
  }
  throw ConfigError("experiment", "no recipe for this kind");
}

/// Writes report.json, CSV tables, SVG plots, histories and the manifest into
/// `dir`, holding the directory lock for the duration.
inline RunManifest write_recipe_outputs(const std::filesystem::path& dir, const ExperimentConfig& c,
                                        const RecipeResult& r, const std::string& started_at) {
  RunManifest m;
  m.config_hash = c.hash();
  m.seeds = c.seeds;
  m.started_at = started_at;
  Json report = r.report;
  report["report_checksum"] = r.checksum();
  write_json(dir / "report.json", report);
  m.artifacts.push_back("report.json");
  m.checksums["report.json"] = r.checksum();
  for (const auto& [stem, t] : r.tables) {
    t.write(dir / (stem + ".csv"));
    m.artifacts.push_back(stem + ".csv");
  }
  for (const auto& [stem, svg] : r.plots) {
    write_atomic(dir / (stem + ".svg"), svg);
    m.artifacts.push_back(stem + ".svg");
  }
  for (const auto& [label, h] : r.histories) {
    std::string file = "history_" + label + ".jsonl";
    for (auto& ch : file)
      if (ch == '/' || ch == '@' || ch == '=') ch = '_';
    write_history(dir / file, h);
    m.artifacts.push_back(file);
    m.checksums[file] = h.checksum();
  }
  write_atomic(dir / "config.cfg", c.canonical() + "output_dir = " + c.output_dir + "\n");
  m.artifacts.push_back("config.cfg");
  m.finish(dir);
  return m;
}

inline std::string format_comparison(const ComparisonRow& row) {
  std::ostringstream s;
  s << std::left << std::setw(40) << row.label << " desk " << std::right << std::setw(8) << std::fixed
    << std::setprecision(2) << row.desk;
  if (row.reference) s << "   full-scale " << std::setw(6) << *row.reference << "  (" << kReferenceMarker << ")";
  return s.str();
}

}  // namespace lorot
