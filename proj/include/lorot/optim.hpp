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
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "lorot/nn.hpp"

namespace lorot {

enum class OptimizerKind { SGD, Adam };
enum class Schedule { Constant, Step, Cosine };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::SGD;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool nesterov = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Schedule schedule = Schedule::Step;
  std::vector<int> milestones;  // epochs at which the step schedule multiplies lr by gamma
  double gamma = 0.1;
};

inline OptimizerKind parse_optimizer_kind(std::string_view s) {
  if (s == "sgd") return OptimizerKind::SGD;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("optimizer.kind", "unknown optimizer '" + std::string(s) + "'");
}

inline Schedule parse_schedule(std::string_view s) {
  if (s == "constant") return Schedule::Constant;
  if (s == "step") return Schedule::Step;
  if (s == "cosine") return Schedule::Cosine;
  throw ConfigError("optimizer.schedule", "unknown schedule '" + std::string(s) + "'");
}

/// Learning rate for a (fractional) epoch position.
inline double scheduled_lr(const OptimizerSpec& spec, double epoch, int total_epochs) {
  switch (spec.schedule) {
    case Schedule::Constant: return spec.lr;
    case Schedule::Step: {
      double lr = spec.lr;
      for (int m : spec.milestones)
        if (epoch >= m) lr *= spec.gamma;
      return lr;
    }
    case Schedule::Cosine: {
      if (total_epochs <= 0) return spec.lr;
      return 0.5 * spec.lr * (1.0 + std::cos(std::numbers::pi * std::min(1.0, epoch / total_epochs)));
    }
  }
  return spec.lr;
}

/// Which parameter groups an optimizer step may touch.
struct GroupMask {
  bool extractor = true;
  bool primary = true;
  bool pretext = true;

  bool allows(nn::ParamGroup g) const noexcept {
    switch (g) {
      case nn::ParamGroup::Extractor: return extractor;
      case nn::ParamGroup::PrimaryHead: return primary;
      case nn::ParamGroup::PretextHead: return pretext;
    }
    return false;
  }
};

/// SGD (optionally Nesterov) with L2 weight decay, or Adam. State is kept per
/// parameter in the order given by `parameters()`, which must stay stable.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerSpec spec) : spec_(std::move(spec)) {}

  const OptimizerSpec& spec() const noexcept { return spec_; }

  void step(const std::vector<nn::Parameter<T>*>& params, double lr, GroupMask mask = {}) {
    if (state_.empty()) {
      state_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        state_[i].m.assign(params[i]->size(), 0.0);
        if (spec_.kind == OptimizerKind::Adam) state_[i].v.assign(params[i]->size(), 0.0);
      }
    }
    if (state_.size() != params.size()) throw Error("optimizer: parameter list changed between steps");
    ++t_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      if (!mask.allows(p.group)) continue;
      auto& st = state_[i];
      if (spec_.kind == OptimizerKind::SGD) {
        for (std::size_t j = 0; j < p.size(); ++j) {
          const double g = static_cast<double>(p.grad[j]) + spec_.weight_decay * p.value[j];
          st.m[j] = spec_.momentum * st.m[j] + g;
          const double d = spec_.nesterov ? g + spec_.momentum * st.m[j] : st.m[j];
          p.value[j] = static_cast<T>(p.value[j] - lr * d);
        }
      } else {
        const double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t_));
        for (std::size_t j = 0; j < p.size(); ++j) {
          const double g = static_cast<double>(p.grad[j]) + spec_.weight_decay * p.value[j];
          st.m[j] = spec_.beta1 * st.m[j] + (1 - spec_.beta1) * g;
          st.v[j] = spec_.beta2 * st.v[j] + (1 - spec_.beta2) * g * g;
          const double mhat = st.m[j] / bc1, vhat = st.v[j] / bc2;
          p.value[j] = static_cast<T>(p.value[j] - lr * mhat / (std::sqrt(vhat) + spec_.eps));
        }
      }
    }
  }

 private:
  struct State {
    std::vector<double> m, v;
  };
  OptimizerSpec spec_;
  std::vector<State> state_;
  long long t_ = 0;
};

}  // namespace lorot
