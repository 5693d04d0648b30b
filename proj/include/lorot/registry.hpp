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

// Source descriptors, the name -> source registry and OOD pairing.
//
// Registry files hold one `name = descriptor` per line; `#` starts a comment.
//
//   cifar-like = synthetic:textures,per_class=1000,seed=1
//   held-out   = synthetic:glyphs-ood,count=2000,seed=7
//   my-set     = dir:/data/my-set,split=test

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include "lorot/datasets.hpp"
#include "lorot/synthetic.hpp"

namespace lorot {

namespace detail {

inline synthetic::SceneOptions scene_options(const SourceDescriptor& d) {
  synthetic::SceneOptions o;
  o.size = static_cast<int>(d.int_option("size", o.size));
  o.pixel_noise = d.real_option("noise", o.pixel_noise);
  o.clutter_strokes = static_cast<int>(d.int_option("clutter", o.clutter_strokes));
  o.min_scale = static_cast<int>(d.int_option("min_scale", o.min_scale));
  o.max_scale = static_cast<int>(d.int_option("max_scale", o.max_scale));
  return o;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Loads a dataset from a source descriptor. Ordering is deterministic.
inline LabeledDataset load_dataset(std::string_view descriptor) {
  const auto d = SourceDescriptor::parse(descriptor);
  const Split split = parse_split(d.option("split", "train"));
  LabeledDataset ds;
  if (d.kind == "synthetic") {
    const auto seed = static_cast<std::uint64_t>(d.int_option("seed", 0));
    const auto opt = detail::scene_options(d);
    if (d.target == "glyphs") {
      ds = synthetic::glyphs(static_cast<int>(d.int_option("per_class", 100)), seed, opt,
                             static_cast<int>(d.int_option("classes", 10)));
    } else if (d.target == "textures") {
      ds = synthetic::textures(static_cast<int>(d.int_option("per_class", 100)), seed, opt,
                               static_cast<int>(d.int_option("classes", 10)));
    } else if (d.target == "textures-ood") {
      ds = synthetic::textures_ood(static_cast<int>(d.int_option("count", 1000)), seed, opt);
    } else if (d.target == "glyphs-ood") {
      ds = synthetic::glyphs_ood(static_cast<int>(d.int_option("count", 1000)), seed, opt);
    } else if (d.target == "shapes-ood") {
      ds = synthetic::shapes_ood(static_cast<int>(d.int_option("count", 1000)), seed, opt);
    } else if (d.target == "noise") {
      ds = synthetic::noise(static_cast<int>(d.int_option("count", 1000)), seed, opt);
    } else if (d.target == "two-gaussian-blobs" || d.target == "blobs") {
      ds = synthetic::blobs(static_cast<int>(d.int_option("n", 200)), seed, static_cast<int>(d.int_option("size", 8)),
                            static_cast<int>(d.int_option("channels", 3)));
    } else if (d.target == "one-pixel") {
      ds = synthetic::one_pixel(static_cast<int>(d.int_option("n", 200)), seed,
                                static_cast<int>(d.int_option("size", 8)));
    } else {
      throw SourceError("unknown synthetic generator '" + d.target + "'");
    }
  } else if (d.kind == "packed") {
    ds = load_packed(d.target, split);
  } else if (d.kind == "dir") {
    ds = load_directory(d.target, split);
  } else {
    throw SourceError("unknown dataset source kind '" + d.kind + "'");
  }
  ds.split = split;
  ds.validate();
  return ds;
}

/// Name -> descriptor map.
class DatasetRegistry {
 public:
  void add(std::string name, std::string descriptor) { entries_[std::move(name)] = std::move(descriptor); }

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  const std::string& descriptor(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw SourceError("dataset '" + name + "' is not registered");
    return it->second;
  }

  LabeledDataset load(const std::string& name) const {
    auto ds = load_dataset(descriptor(name));
    ds.name = name;
    return ds;
  }

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

  static DatasetRegistry from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SourceError("missing registry file: " + path.string());
    DatasetRegistry r;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      const auto t = detail::trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw SourceError(path.string() + ":" + std::to_string(lineno) + ": expected 'name = descriptor'");
      }
      r.add(detail::trim(std::string_view(t).substr(0, eq)), detail::trim(std::string_view(t).substr(eq + 1)));
    }
    return r;
  }

 private:
  std::map<std::string, std::string> entries_;
};

enum class ResizeRule { None, Nearest };

/// Nearest-neighbour resize.
inline ImageF resize_nearest(const ImageF& im, int height, int width) {
  ImageF out(height, width, im.channels());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int sy = y * im.height() / height, sx = x * im.width() / width;
      std::copy(im.pixel(sy, sx), im.pixel(sy, sx) + im.channels(), out.pixel(y, x));
    }
  return out;
}

/// In-distribution test set plus an out-of-distribution set whose labels only
/// group samples for reporting.
struct OODEvalPair {
  LabeledDataset in_dist;
  LabeledDataset out_dist;
};

inline OODEvalPair make_ood_pair(LabeledDataset in, LabeledDataset out, ResizeRule rule = ResizeRule::None) {
  if (in.images.empty() || out.images.empty()) throw EmptyInputError("OOD pair needs two non-empty datasets");
  const auto& ref = in.images.front();
  for (auto& im : out.images) {
    if (im.same_shape(ref)) continue;
    if (rule == ResizeRule::None || im.channels() != ref.channels()) {
      throw DimensionError("out-of-distribution images are " + std::to_string(im.height()) + "x" +
                           std::to_string(im.width()) + "x" + std::to_string(im.channels()) + " but in-distribution images are " +
                           std::to_string(ref.height()) + "x" + std::to_string(ref.width()) + "x" +
                           std::to_string(ref.channels()) + " and no resize rule is set");
    }
    im = resize_nearest(im, ref.height(), ref.width());
  }
  in.split = Split::Test;
  out.split = Split::Test;
  return {std::move(in), std::move(out)};
}

inline OODEvalPair pair_ood(const std::string& in_name, const std::string& out_name, const DatasetRegistry& registry,
                            ResizeRule rule = ResizeRule::None) {
  return make_ood_pair(registry.load(in_name), registry.load(out_name), rule);
}

}  // namespace lorot
