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

// Experiment configuration files.
//
// One `key = value` per line, `#` comments, no duplicates, unknown keys
// rejected. Lists are comma-separated. Data sources are descriptors
// (`synthetic:glyphs,per_class=100,seed=1`, `packed:/path`, `dir:/path,split=test`)
// or registry names when `data.registry` is set. See docs/config.md for the
// full key table.
//
// The config hash covers the canonical dump of every key except `output_dir`.
// The LOROT_OUTPUT_DIR environment variable overrides `output_dir` and
// nothing else.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lorot/evaluation.hpp"
#include "lorot/hash.hpp"
#include "lorot/model.hpp"
#include "lorot/registry.hpp"
#include "lorot/training.hpp"

namespace lorot {

enum class ExperimentKind { Classify, OOD, Imbalance, Adversarial, Affinity, LambdaSweep };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Classify: return "classify";
    case ExperimentKind::OOD: return "ood";
    case ExperimentKind::Imbalance: return "imbalance";
    case ExperimentKind::Adversarial: return "adversarial";
    case ExperimentKind::Affinity: return "affinity";
    case ExperimentKind::LambdaSweep: return "lambda-sweep";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  for (auto k : {ExperimentKind::Classify, ExperimentKind::OOD, ExperimentKind::Imbalance, ExperimentKind::Adversarial,
                 ExperimentKind::Affinity, ExperimentKind::LambdaSweep})
    if (s == to_string(k)) return k;
  throw ConfigError("experiment", "unknown experiment kind '" + std::string(s) + "'");
}

struct DataRefs {
  std::string train = "synthetic:glyphs,per_class=100,seed=1";
  std::string val;  // optional
  std::string test = "synthetic:glyphs,per_class=50,seed=2";
  std::string ood;  // optional
  std::string registry;
  int train_limit = 0;  // 0 keeps every training image
};

struct EvalSettings {
  ScoreKind score = ScoreKind::KLToUniform;
  std::vector<ShiftTransform> transforms{ShiftTransform::Identity, ShiftTransform::GlobalRotation,
                                         ShiftTransform::LoRotI, ShiftTransform::LoRotE};
  bool include_identity = true;
  std::vector<double> lambdas{0.1, 0.3, 0.5};
  std::vector<int> adversarial_steps{20, 100};
  std::vector<double> imbalance_mus{0.01};
};

struct ExperimentConfig {
  std::string name = "experiment";
  ExperimentKind kind = ExperimentKind::Classify;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs/experiment";
  DataRefs data;
  ModelSpec model;
  TrainingConfig training;
  ImbalanceSpec imbalance;
  EvalSettings eval;

  void validate() const;
  std::string canonical() const;
  std::string hash() const { return hash_text(canonical()); }

  /// Resolves a data reference through the registry when one is configured.
  LabeledDataset load(const std::string& ref, Split split) const;

  static ExperimentConfig parse(std::string_view text, const std::string& origin = "<config>");
  static ExperimentConfig from_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  void apply_environment();
};

namespace cfgdetail {

inline std::string trim(std::string_view s) { return detail::trim(s); }

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double to_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError(key, "expected a number, got '" + v + "'");
  return d;
}

inline long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
inline std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
  return out;
}

struct Key {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define LOROT_KEY(name, setter, getter)                                                             \
  {                                                                                                 \
    name, Key {                                                                                     \
      [](ExperimentConfig& c, const std::string& k, const std::string& v) { (void)k; setter; },     \
          [](const ExperimentConfig& c) -> std::string { return getter; }                           \
    }                                                                                               \
  }

inline const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = {
      LOROT_KEY("name", c.name = v, c.name),
      LOROT_KEY("experiment", c.kind = parse_experiment_kind(v), std::string(to_string(c.kind))),
      LOROT_KEY("seeds",
                {
                  c.seeds.clear();
                  for (const auto& s : split_list(v)) c.seeds.push_back(static_cast<std::uint64_t>(to_int(k, s)));
                },
                join(c.seeds, [](auto s) { return std::to_string(s); })),
      LOROT_KEY("output_dir", c.output_dir = v, c.output_dir),
      LOROT_KEY("data.train", c.data.train = v, c.data.train),
      LOROT_KEY("data.val", c.data.val = v, c.data.val),
      LOROT_KEY("data.test", c.data.test = v, c.data.test),
      LOROT_KEY("data.ood", c.data.ood = v, c.data.ood),
      LOROT_KEY("data.registry", c.data.registry = v, c.data.registry),
      LOROT_KEY("data.train_limit", c.data.train_limit = static_cast<int>(to_int(k, v)),
                std::to_string(c.data.train_limit)),
      LOROT_KEY("model.backbone", c.model.backbone = v, c.model.backbone),
      LOROT_KEY("model.channels",
                {
                  c.model.channels.clear();
                  for (const auto& s : split_list(v)) c.model.channels.push_back(static_cast<int>(to_int(k, s)));
                },
                join(c.model.channels, [](int x) { return std::to_string(x); })),
      LOROT_KEY("model.pooling", c.model.pooling = parse_pooling(v), std::string(to_string(c.model.pooling))),
      LOROT_KEY("model.input_mean", c.model.input_mean = static_cast<float>(to_real(k, v)), fmt(c.model.input_mean)),
      LOROT_KEY("model.input_std", c.model.input_std = static_cast<float>(to_real(k, v)), fmt(c.model.input_std)),
      LOROT_KEY("training.strategy", c.training.strategy = parse_strategy(v),
                std::string(to_string(c.training.strategy))),
      LOROT_KEY("training.variant", c.training.variant = parse_variant(v), std::string(to_string(c.training.variant))),
      LOROT_KEY("training.lambda", c.training.lambda = to_real(k, v), fmt(c.training.lambda)),
      LOROT_KEY("training.batch_size", c.training.batch_size = static_cast<int>(to_int(k, v)),
                std::to_string(c.training.batch_size)),
      LOROT_KEY("training.epochs", c.training.epochs = static_cast<int>(to_int(k, v)),
                std::to_string(c.training.epochs)),
      LOROT_KEY("training.workers", c.training.workers = static_cast<int>(to_int(k, v)),
                std::to_string(c.training.workers)),
      LOROT_KEY("optimizer.kind", c.training.optimizer.kind = parse_optimizer_kind(v),
                c.training.optimizer.kind == OptimizerKind::SGD ? "sgd" : "adam"),
      LOROT_KEY("optimizer.lr", c.training.optimizer.lr = to_real(k, v), fmt(c.training.optimizer.lr)),
      LOROT_KEY("optimizer.momentum", c.training.optimizer.momentum = to_real(k, v),
                fmt(c.training.optimizer.momentum)),
      LOROT_KEY("optimizer.weight_decay", c.training.optimizer.weight_decay = to_real(k, v),
                fmt(c.training.optimizer.weight_decay)),
      LOROT_KEY("optimizer.nesterov", c.training.optimizer.nesterov = to_bool(k, v),
                c.training.optimizer.nesterov ? "true" : "false"),
      LOROT_KEY("optimizer.beta1", c.training.optimizer.beta1 = to_real(k, v), fmt(c.training.optimizer.beta1)),
      LOROT_KEY("optimizer.beta2", c.training.optimizer.beta2 = to_real(k, v), fmt(c.training.optimizer.beta2)),
      LOROT_KEY("optimizer.eps", c.training.optimizer.eps = to_real(k, v), fmt(c.training.optimizer.eps)),
      LOROT_KEY("optimizer.schedule", c.training.optimizer.schedule = parse_schedule(v),
                c.training.optimizer.schedule == Schedule::Constant ? "constant"
                : c.training.optimizer.schedule == Schedule::Step   ? "step"
                                                                    : "cosine"),
      LOROT_KEY("optimizer.milestones",
                {
                  c.training.optimizer.milestones.clear();
                  for (const auto& s : split_list(v))
                    c.training.optimizer.milestones.push_back(static_cast<int>(to_int(k, s)));
                },
                join(c.training.optimizer.milestones, [](int x) { return std::to_string(x); })),
      LOROT_KEY("optimizer.gamma", c.training.optimizer.gamma = to_real(k, v), fmt(c.training.optimizer.gamma)),
      LOROT_KEY("augment.crop_padding", c.training.augment.crop_padding = static_cast<int>(to_int(k, v)),
                std::to_string(c.training.augment.crop_padding)),
      LOROT_KEY("augment.horizontal_flip", c.training.augment.horizontal_flip = to_bool(k, v),
                c.training.augment.horizontal_flip ? "true" : "false"),
      LOROT_KEY("adversarial.enabled", c.training.adversarial.enabled = to_bool(k, v),
                c.training.adversarial.enabled ? "true" : "false"),
      LOROT_KEY("adversarial.epsilon", c.training.adversarial.epsilon = to_real(k, v),
                fmt(c.training.adversarial.epsilon)),
      LOROT_KEY("adversarial.alpha", c.training.adversarial.alpha = to_real(k, v), fmt(c.training.adversarial.alpha)),
      LOROT_KEY("adversarial.train_steps", c.training.adversarial.train_steps = static_cast<int>(to_int(k, v)),
                std::to_string(c.training.adversarial.train_steps)),
      LOROT_KEY("adversarial.eval_steps", c.training.adversarial.eval_steps = static_cast<int>(to_int(k, v)),
                std::to_string(c.training.adversarial.eval_steps)),
      LOROT_KEY("adversarial.random_start", c.training.adversarial.random_start = to_bool(k, v),
                c.training.adversarial.random_start ? "true" : "false"),
      LOROT_KEY("adversarial.transform_first", c.training.adversarial.transform_first = to_bool(k, v),
                c.training.adversarial.transform_first ? "true" : "false"),
      LOROT_KEY("imbalance.mu", c.imbalance.mu = to_real(k, v), fmt(c.imbalance.mu)),
      LOROT_KEY("imbalance.profile",
                {
                  if (v == "exponential") c.imbalance.profile = ImbalanceProfile::Exponential;
                  else if (v == "step") c.imbalance.profile = ImbalanceProfile::Step;
                  else throw ConfigError(k, "unknown profile '" + v + "'");
                },
                c.imbalance.profile == ImbalanceProfile::Exponential ? "exponential" : "step"),
      LOROT_KEY("eval.score", c.eval.score = parse_score_kind(v), std::string(to_string(c.eval.score))),
      LOROT_KEY("eval.transforms",
                {
                  c.eval.transforms.clear();
                  for (const auto& s : split_list(v)) c.eval.transforms.push_back(parse_shift_transform(s));
                },
                join(c.eval.transforms, [](ShiftTransform t) { return std::string(to_string(t)); })),
      LOROT_KEY("eval.include_identity", c.eval.include_identity = to_bool(k, v),
                c.eval.include_identity ? "true" : "false"),
      LOROT_KEY("eval.lambdas",
                {
                  c.eval.lambdas.clear();
                  for (const auto& s : split_list(v)) c.eval.lambdas.push_back(to_real(k, s));
                },
                join(c.eval.lambdas, [](double x) { return fmt(x); })),
      LOROT_KEY("eval.adversarial_steps",
                {
                  c.eval.adversarial_steps.clear();
                  for (const auto& s : split_list(v)) c.eval.adversarial_steps.push_back(static_cast<int>(to_int(k, s)));
                },
                join(c.eval.adversarial_steps, [](int x) { return std::to_string(x); })),
      LOROT_KEY("eval.imbalance_mus",
                {
                  c.eval.imbalance_mus.clear();
                  for (const auto& s : split_list(v)) c.eval.imbalance_mus.push_back(to_real(k, s));
                },
                join(c.eval.imbalance_mus, [](double x) { return fmt(x); })),
  };
  return table;
}

#undef LOROT_KEY

}  // namespace cfgdetail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : cfgdetail::keys()) out.push_back(k);
  return out;
}

inline void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto& table = cfgdetail::keys();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, "unknown configuration key");
  it->second.set(*this, key, value);
}

inline ExperimentConfig ExperimentConfig::parse(std::string_view text, const std::string& origin) {
  ExperimentConfig c;
  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto t = cfgdetail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const auto key = cfgdetail::trim(std::string_view(t).substr(0, eq));
    const auto value = cfgdetail::trim(std::string_view(t).substr(eq + 1));
    if (seen.count(key)) {
      throw ConfigError(key, origin + ":" + std::to_string(lineno) + ": duplicate key (first set on line " +
                                 std::to_string(seen[key]) + ")");
    }
    seen[key] = lineno;
    c.set(key, value);
  }
  c.validate();
  return c;
}

inline ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto c = parse(ss.str(), path.string());
  c.apply_environment();
  return c;
}

inline void ExperimentConfig::apply_environment() {
  if (const char* dir = std::getenv("LOROT_OUTPUT_DIR"); dir && *dir) output_dir = dir;
}

inline void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("name", "must be non-empty");
  if (seeds.empty()) throw ConfigError("seeds", "must list at least one seed");
  if (output_dir.empty()) throw ConfigError("output_dir", "must be non-empty");
  if (data.train.empty()) throw ConfigError("data.train", "must be set");
  if (data.test.empty()) throw ConfigError("data.test", "must be set");
  if (data.train_limit < 0) throw ConfigError("data.train_limit", "must be non-negative");
  if (model.channels.empty() && model.backbone == "residual-cnn")
    throw ConfigError("model.channels", "residual-cnn needs at least one stage");
  for (int ch : model.channels)
    if (ch < 1) throw ConfigError("model.channels", "channel counts must be positive");
  if (model.backbone != "reference-cnn" && model.backbone != "residual-cnn")
    throw ConfigError("model.backbone", "unknown backbone '" + model.backbone + "'");
  if (!(model.input_std > 0)) throw ConfigError("model.input_std", "must be positive");
  training.validate();
  imbalance.validate();
  if (kind == ExperimentKind::OOD && data.ood.empty()) throw ConfigError("data.ood", "ood experiments need data.ood");
  if (kind == ExperimentKind::LambdaSweep && eval.lambdas.empty())
    throw ConfigError("eval.lambdas", "must list at least one lambda");
  for (double l : eval.lambdas)
    if (!(l >= 0)) throw ConfigError("eval.lambdas", "lambdas must be non-negative");
  for (int s : eval.adversarial_steps)
    if (s < 1) throw ConfigError("eval.adversarial_steps", "step counts must be positive");
  for (double m : eval.imbalance_mus)
    if (!(m > 0 && m <= 1)) throw ConfigError("eval.imbalance_mus", "must be in (0, 1]");
}

inline std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [key, k] : cfgdetail::keys()) {
    if (key == "output_dir") continue;
    out += key + " = " + k.get(*this) + "\n";
  }
  return out;
}

inline LabeledDataset ExperimentConfig::load(const std::string& ref, Split split) const {
  LabeledDataset ds;
  if (!data.registry.empty() && ref.find(':') == std::string::npos) {
    ds = DatasetRegistry::from_file(data.registry).load(ref);
  } else {
    ds = load_dataset(ref);
  }
  ds.split = split;
  return ds;
}

}  // namespace lorot
