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

// Labeled image datasets and the operations on them: loading, long-tailed
// subsampling and in/out-of-distribution pairing.
//
// Sources are named by descriptors:
//   synthetic:<generator>[,key=value...]   built-in generator (see synthetic.hpp)
//   packed:<file>                          packed binary file
//   dir:<root>[,split=train]               <root>/<split>/<class_name>/<image files>
//
// Packed binary layout, all integers little-endian uint32:
//   "LRDSET01" (8 bytes) | height | width | channels | count | num_classes
//   then `count` records of: label | height*width*channels bytes (HWC, 0..255)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lorot/common.hpp"
#include "lorot/hash.hpp"
#include "lorot/image.hpp"
#include "lorot/png_io.hpp"
#include "lorot/random.hpp"

namespace lorot {

enum class Split { Train, Val, Test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("split", "unknown split '" + std::string(s) + "'");
}

struct LabeledDataset {
  std::string name;
  Split split = Split::Train;
  int num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<ImageF> images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return images.size(); }

  std::vector<int> class_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
    for (int l : labels)
      if (l >= 0 && l < num_classes) ++counts[l];
    return counts;
  }

  /// Fingerprint over labels and pixel values, in order.
  std::string checksum() const {
    Fnv1a h;
    h.value(num_classes).value(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
      h.value(labels[i]).value(images[i].height()).value(images[i].width()).value(images[i].channels());
      h.values<float>(images[i].values());
    }
    return h.hex();
  }

  void validate() const {
    if (images.size() != labels.size()) throw SourceError(name + ": image/label count mismatch");
    for (int l : labels)
      if (l < 0 || l >= num_classes) throw SourceError(name + ": label " + std::to_string(l) + " out of range");
    for (const auto& im : images)
      if (!im.same_shape(images.front())) throw SourceError(name + ": images differ in shape");
  }

  /// The subset at `indices`, in the given order.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const {
    LabeledDataset out;
    out.name = name;
    out.split = split;
    out.num_classes = num_classes;
    out.class_names = class_names;
    out.images.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (auto i : indices) {
      out.images.push_back(images.at(i));
      out.labels.push_back(labels.at(i));
    }
    return out;
  }
};

/// Parsed "kind:path,key=value,..." descriptor.
struct SourceDescriptor {
  std::string kind;
  std::string target;
  std::map<std::string, std::string> options;

  static SourceDescriptor parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
      throw SourceError("dataset source '" + std::string(text) + "' must look like kind:target[,key=value...]");
    }
    SourceDescriptor d;
    d.kind = std::string(text.substr(0, colon));
    std::string rest(text.substr(colon + 1));
    std::stringstream ss(rest);
    std::string part;
    bool first = true;
    while (std::getline(ss, part, ',')) {
      if (first) {
        d.target = part;
        first = false;
        continue;
      }
      const auto eq = part.find('=');
      if (eq == std::string::npos) throw SourceError("malformed option '" + part + "' in source '" + std::string(text) + "'");
      d.options[part.substr(0, eq)] = part.substr(eq + 1);
    }
    return d;
  }

  std::string option(const std::string& key, const std::string& fallback) const {
    auto it = options.find(key);
    return it == options.end() ? fallback : it->second;
  }

  long long int_option(const std::string& key, long long fallback) const {
    auto it = options.find(key);
    if (it == options.end()) return fallback;
    try {
      return std::stoll(it->second);
    } catch (const std::exception&) {
      throw SourceError("option " + key + " must be an integer, got '" + it->second + "'");
    }
  }

  double real_option(const std::string& key, double fallback) const {
    auto it = options.find(key);
    if (it == options.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw SourceError("option " + key + " must be a number, got '" + it->second + "'");
    }
  }
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& file) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw SourceError("corrupt packed dataset (truncated header): " + file);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline constexpr char kPackedMagic[8] = {'L', 'R', 'D', 'S', 'E', 'T', '0', '1'};

/// Writes the packed binary format. Pixels are quantized to 8 bits.
inline void save_packed(const LabeledDataset& ds, const std::filesystem::path& path) {
  ds.validate();
  if (ds.images.empty()) throw EmptyInputError("save_packed: empty dataset");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SourceError("cannot write " + path.string());
  out.write(kPackedMagic, 8);
  const auto& f = ds.images.front();
  for (auto v : {f.height(), f.width(), f.channels(), static_cast<int>(ds.size()), ds.num_classes})
    detail::put_u32(out, static_cast<std::uint32_t>(v));
  std::vector<char> buf(f.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    detail::put_u32(out, static_cast<std::uint32_t>(ds.labels[i]));
    auto v = ds.images[i].values();
    for (std::size_t j = 0; j < v.size(); ++j) buf[j] = static_cast<char>(io::to_byte(v[j]));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

inline LabeledDataset load_packed(const std::filesystem::path& path, Split split = Split::Train) {
  const std::string file = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceError("missing dataset source: " + file);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || !std::equal(magic, magic + 8, kPackedMagic)) {
    throw SourceError("corrupt packed dataset (bad magic): " + file);
  }
  const auto h = detail::get_u32(in, file), w = detail::get_u32(in, file), c = detail::get_u32(in, file);
  const auto count = detail::get_u32(in, file), classes = detail::get_u32(in, file);
  if (h < 4 || w < 4 || c < 1 || h > 4096 || w > 4096 || c > 16 || classes < 1) {
    throw SourceError("corrupt packed dataset (bad header values): " + file);
  }
  LabeledDataset ds;
  ds.name = path.stem().string();
  ds.split = split;
  ds.num_classes = static_cast<int>(classes);
  for (std::uint32_t k = 0; k < classes; ++k) ds.class_names.push_back("class" + std::to_string(k));
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * c);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto label = detail::get_u32(in, file);
    if (label >= classes) throw SourceError("corrupt packed dataset (label out of range) in record " + std::to_string(i) + ": " + file);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw SourceError("corrupt packed dataset (truncated record " + std::to_string(i) + "): " + file);
    }
    ImageF im(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    auto v = im.values();
    for (std::size_t j = 0; j < buf.size(); ++j) v[j] = buf[j] / 255.0f;
    ds.images.push_back(std::move(im));
    ds.labels.push_back(static_cast<int>(label));
  }
  return ds;
}

/// Loads <root>/<split>/<class_name>/<files>. Classes and files are sorted by name.
inline LabeledDataset load_directory(const std::filesystem::path& root, Split split) {
  namespace fs = std::filesystem;
  const fs::path dir = root / std::string(to_string(split));
  if (!fs::is_directory(dir)) throw SourceError("missing dataset source: " + dir.string());
  LabeledDataset ds;
  ds.name = root.filename().string();
  ds.split = split;
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw SourceError("no class directories under " + dir.string());
  for (std::size_t k = 0; k < class_dirs.size(); ++k) {
    ds.class_names.push_back(class_dirs[k].filename().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[k]))
      if (e.is_regular_file() && io::is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      ImageF im = io::read_image(f);
      if (!ds.images.empty() && !im.same_shape(ds.images.front())) {
        throw SourceError("corrupt dataset: image shape differs from the first image in " + f.string());
      }
      ds.images.push_back(std::move(im));
      ds.labels.push_back(static_cast<int>(k));
    }
  }
  ds.num_classes = static_cast<int>(class_dirs.size());
  if (ds.images.empty()) throw SourceError("no images under " + dir.string());
  return ds;
}

/// Writes a dataset in the directory layout as PNG files.
inline void save_directory(const LabeledDataset& ds, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const fs::path dir = root / std::string(to_string(ds.split));
  for (int k = 0; k < ds.num_classes; ++k) {
    const std::string cname = k < static_cast<int>(ds.class_names.size()) ? ds.class_names[k] : "class" + std::to_string(k);
    fs::create_directories(dir / cname);
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int k = ds.labels[i];
    const std::string cname = k < static_cast<int>(ds.class_names.size()) ? ds.class_names[k] : "class" + std::to_string(k);
    char fname[32];
    std::snprintf(fname, sizeof(fname), "%06zu.png", i);
    io::write_png(dir / cname / fname, ds.images[i]);
  }
}

/// Class-count profile for long-tailed subsampling.
enum class ImbalanceProfile { Exponential, Step };

struct ImbalanceSpec {
  double mu = 0.01;  // rarest / most frequent
  ImbalanceProfile profile = ImbalanceProfile::Exponential;

  void validate() const {
    if (!(mu > 0.0 && mu <= 1.0)) throw ConfigError("imbalance.mu", "must be in (0, 1]");
  }

  /// Retention factor for class i of k: mu^(i/(k-1)) (exponential) or
  /// 1 for the first half and mu for the second half (step).
  double factor(int i, int k) const {
    if (k <= 1) return 1.0;
    if (profile == ImbalanceProfile::Step) return i < k / 2 ? 1.0 : mu;
    return std::pow(mu, static_cast<double>(i) / (k - 1));
  }

  /// floor(n * factor) with at least one sample. The 1e-9 guard keeps products
  /// that are mathematically integral (e.g. 5000 * 0.01) from flooring down.
  int target_count(int n, int i, int k) const {
    const int c = static_cast<int>(std::floor(n * factor(i, k) + 1e-9));
    return std::max(1, std::min(n, c));
  }
};

/// Long-tailed subset: class i keeps floor(n_i * factor(i)) of its n_i
/// samples, chosen by seeded subsampling; survivors keep their original order.
inline LabeledDataset build_imbalanced(const LabeledDataset& ds, const ImbalanceSpec& spec, Rng& rng) {
  spec.validate();
  if (ds.split == Split::Test) throw ConfigError("split", "test splits are never subsampled");
  const auto counts = ds.class_counts();
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  std::vector<std::size_t> keep;
  for (int k = 0; k < ds.num_classes; ++k) {
    auto idx = by_class[k];
    if (idx.empty()) continue;
    rng.shuffle(idx.begin(), idx.end());
    idx.resize(static_cast<std::size_t>(spec.target_count(counts[k], k, ds.num_classes)));
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  LabeledDataset out = ds.subset(keep);
  out.name = ds.name + "-lt" + std::to_string(spec.mu);
  return out;
}

}  // namespace lorot
