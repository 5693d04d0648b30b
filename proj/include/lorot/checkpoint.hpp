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

// Checkpoint container.
//
//   bytes 0..7   magic "LROTCKP1"
//   u64 LE       length L of the metadata
//   L bytes      JSON metadata: model spec, pooling, label spaces, config hash,
//                and the name and shape of every parameter in storage order
//   then         every parameter's values as little-endian f32, in order
//
// Loading rebuilds the model from the stored spec and checks every parameter
// shape, including both head widths, before copying values.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lorot/model.hpp"

namespace lorot {

inline constexpr char kCheckpointMagic[8] = {'L', 'R', 'O', 'T', 'C', 'K', 'P', '1'};

inline nlohmann::json spec_to_json(const ModelSpec& s) {
  return {{"backbone", s.backbone},
          {"input", {s.input.h, s.input.w, s.input.c}},
          {"channels", s.channels},
          {"num_classes", s.num_classes},
          {"variant", std::string(to_string(s.variant))},
          {"pretext_classes", s.pretext_classes()},
          {"pooling", std::string(to_string(s.pooling))},
          {"input_mean", s.input_mean},
          {"input_std", s.input_std},
          {"init_seed", s.init_seed}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec s;
    s.backbone = j.at("backbone").get<std::string>();
    const auto in = j.at("input").get<std::vector<int>>();
    if (in.size() != 3) throw CheckpointError("checkpoint input shape must have 3 entries");
    s.input = {in[0], in[1], in[2]};
    s.channels = j.at("channels").get<std::vector<int>>();
    s.num_classes = j.at("num_classes").get<int>();
    s.variant = parse_variant(j.at("variant").get<std::string>());
    s.pooling = parse_pooling(j.at("pooling").get<std::string>());
    s.input_mean = j.at("input_mean").get<float>();
    s.input_std = j.at("input_std").get<float>();
    s.init_seed = j.at("init_seed").get<std::uint64_t>();
    if (j.at("pretext_classes").get<int>() != s.pretext_classes()) {
      throw CheckpointError("checkpoint pretext label space does not match its variant");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint metadata: ") + e.what());
  }
}

struct CheckpointInfo {
  ModelSpec spec;
  std::string config_hash;
  nlohmann::json extra;  // free-form, e.g. training config echo
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const DualHeadModel<T>& model, const std::string& config_hash,
                     const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json meta;
  meta["version"] = kVersion;
  meta["spec"] = spec_to_json(model.spec());
  meta["config_hash"] = config_hash;
  meta["extra"] = extra;
  auto& params = meta["parameters"] = nlohmann::json::array();
  for (const auto* p : model.parameters()) params.push_back({{"name", p->name}, {"shape", p->shape}});
  const std::string text = meta.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(kCheckpointMagic, 8);
    const std::uint64_t len = text.size();
    for (int b = 0; b < 8; ++b) out.put(static_cast<char>((len >> (8 * b)) & 0xff));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* p : model.parameters()) {
      for (T v : p->value) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        for (int b = 0; b < 4; ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xff));
      }
    }
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline CheckpointInfo read_checkpoint_info(std::istream& in, const std::string& name, nlohmann::json* meta_out = nullptr) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic): " + name);
  }
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b) {
    const int c = in.get();
    if (c == EOF) throw CheckpointError("truncated checkpoint: " + name);
    len |= static_cast<std::uint64_t>(c) << (8 * b);
  }
  if (len > (1u << 26)) throw CheckpointError("implausible metadata length in " + name);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated checkpoint: " + name);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint metadata in " + name + ": " + e.what());
  }
  CheckpointInfo info;
  info.spec = spec_from_json(meta.at("spec"));
  info.config_hash = meta.value("config_hash", "");
  info.extra = meta.value("extra", nlohmann::json::object());
  if (meta_out) *meta_out = std::move(meta);
  return info;
}

/// Loads a checkpoint. When `expected` is given, the stored spec must agree
/// with it on everything that fixes parameter shapes.
template <typename T = float>
DualHeadModel<T> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info_out = nullptr,
                                 const ModelSpec* expected = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("missing checkpoint: " + path.string());
  nlohmann::json meta;
  auto info = read_checkpoint_info(in, path.string(), &meta);
  const auto& s = info.spec;
  if (expected) {
    auto mismatch = [&](const std::string& what) {
      throw CheckpointError("checkpoint " + path.string() + " does not match the config: " + what);
    };
    if (expected->num_classes != s.num_classes) mismatch("primary head has " + std::to_string(s.num_classes) + " classes");
    if (expected->pretext_classes() != s.pretext_classes())
      mismatch("pretext head has " + std::to_string(s.pretext_classes()) + " classes");
    if (expected->pooling != s.pooling) mismatch("pooling mode differs");
    if (expected->channels != s.channels || expected->backbone != s.backbone) mismatch("backbone differs");
    if (expected->input.h != s.input.h || expected->input.w != s.input.w || expected->input.c != s.input.c)
      mismatch("input shape differs");
  }
  DualHeadModel<T> model(s);
  auto params = model.parameters();
  const auto& stored = meta.at("parameters");
  if (stored.size() != params.size()) throw CheckpointError("checkpoint parameter count mismatch in " + path.string());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto shape = stored[k].at("shape").get<std::vector<int>>();
    if (shape != params[k]->shape || stored[k].at("name").get<std::string>() != params[k]->name) {
      throw CheckpointError("checkpoint parameter '" + stored[k].at("name").get<std::string>() +
                            "' does not match the model layout");
    }
    for (auto& v : params[k]->value) {
      unsigned char b[4];
      if (!in.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("truncated checkpoint: " + path.string());
      const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
      float f;
      std::memcpy(&f, &bits, 4);
      v = static_cast<T>(f);
    }
  }
  if (in.peek() != EOF) throw CheckpointError("trailing bytes in checkpoint " + path.string());
  if (info_out) *info_out = std::move(info);
  return model;
}

}  // namespace lorot
