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

// Report emission: JSON metrics, CSV tables, line-delimited history, SVG line
// plots, the run manifest and the per-directory lockfile.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lorot/common.hpp"
#include "lorot/hash.hpp"
#include "lorot/training.hpp"

namespace lorot {

using Json = nlohmann::ordered_json;

/// Writes `text` to `path` through a temporary file and a rename, so readers
/// never see a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_atomic(path, j.dump(2) + "\n"); }

/// Plain CSV with a header row. Cells containing commas or quotes are quoted.
class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw Error("csv row width does not match the header");
    rows_.push_back(std::move(row));
  }

  static std::string num(double v, int precision = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
  }

  std::string str() const {
    std::string out = line(header_);
    for (const auto& r : rows_) out += line(r);
    return out;
  }

  void write(const std::filesystem::path& path) const { write_atomic(path, str()); }

  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

 private:
  static std::string cell(const std::string& c) {
    if (c.find_first_of(",\"\n") == std::string::npos) return c;
    std::string q = "\"";
    for (char ch : c) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  static std::string line(const std::vector<std::string>& r) {
    std::string out;
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + cell(r[i]);
    return out + "\n";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline Json to_json(const EpochRecord& e) {
  return {{"epoch", e.epoch},
          {"primary_loss", e.primary_loss},
          {"pretext_loss", e.pretext_loss},
          {"train_accuracy", e.train_accuracy},
          {"val_accuracy", e.val_accuracy},
          {"learning_rate", e.learning_rate},
          {"forwarded_samples", e.forwarded_samples},
          {"seed", e.seed},
          {"wall_time_s", e.wall_time_s}};
}

/// History file: one JSON object per epoch, one per line.
inline void write_history(const std::filesystem::path& path, const TrainingHistory& h) {
  std::string text;
  for (const auto& e : h.epochs) text += to_json(e).dump() + "\n";
  write_atomic(path, text);
}

inline TrainingHistory read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing history file " + path.string());
  TrainingHistory h;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = Json::parse(line);
    EpochRecord e;
    e.epoch = j.at("epoch");
    e.primary_loss = j.at("primary_loss");
    e.pretext_loss = j.at("pretext_loss");
    e.train_accuracy = j.at("train_accuracy");
    e.val_accuracy = j.at("val_accuracy");
    e.learning_rate = j.at("learning_rate");
    e.forwarded_samples = j.at("forwarded_samples");
    e.seed = j.at("seed");
    e.wall_time_s = j.at("wall_time_s");
    h.epochs.push_back(e);
  }
  return h;
}

/// Checksum of a report with volatile fields (timestamps, wall times, paths)
/// removed, so reruns with the same seed compare equal.
inline std::string report_checksum(Json j) {
  std::vector<std::string> volatile_keys{"wall_time_s", "started_at", "finished_at", "output_dir", "artifacts"};
  std::function<void(Json&)> strip = [&](Json& node) {
    if (node.is_object()) {
      for (const auto& k : volatile_keys) node.erase(k);
      for (auto& [_, v] : node.items()) strip(v);
    } else if (node.is_array()) {
      for (auto& v : node) strip(v);
    }
  };
  strip(j);
  return hash_text(j.dump());
}

// ---------------------------------------------------------------------------
// SVG line plots

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_ticks;  // categorical labels at x = 0, 1, ...; numeric axis when empty
  double y_min = 0, y_max = 1;
};

inline std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  constexpr double W = 640, H = 400, L = 60, R = 150, T = 40, B = 60;
  double x_min = 0, x_max = 1;
  if (!spec.x_ticks.empty()) {
    x_max = std::max<double>(1, static_cast<double>(spec.x_ticks.size()) - 1);
  } else {
    bool first = true;
    for (const auto& s : series)
      for (double x : s.x) {
        x_min = first ? x : std::min(x_min, x);
        x_max = first ? x : std::max(x_max, x);
        first = false;
      }
    if (x_max == x_min) x_max = x_min + 1;
  }
  const double y_span = spec.y_max > spec.y_min ? spec.y_max - spec.y_min : 1.0;
  auto px = [&](double x) { return L + (x - x_min) / (x_max - x_min) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - spec.y_min) / y_span * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << spec.title << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = spec.y_min + y_span * k / 4;
    s << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << y << "</text>\n";
  }
  if (!spec.x_ticks.empty()) {
    for (std::size_t k = 0; k < spec.x_ticks.size(); ++k)
      s << "<text x=\"" << px(static_cast<double>(k)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
        << spec.x_ticks[k] << "</text>\n";
  } else {
    for (int k = 0; k <= 4; ++k) {
      const double x = x_min + (x_max - x_min) * k / 4;
      s << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << x << "</text>\n";
    }
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 20 << "\" text-anchor=\"middle\">" << spec.x_label << "</text>\n";
  s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << spec.y_label << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& ser = series[i];
    const char* col = colors[i % 7];
    s << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\""
      << (ser.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
    for (std::size_t k = 0; k < ser.y.size(); ++k) {
      const double x = k < ser.x.size() ? ser.x[k] : static_cast<double>(k);
      s << px(x) << "," << py(ser.y[k]) << " ";
    }
    s << "\"/>\n";
    const double ly = T + 16 * static_cast<double>(i);
    s << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << col << "\" stroke-width=\"2\"" << (ser.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    s << "<text x=\"" << W - R + 34 << "\" y=\"" << ly + 4 << "\">" << ser.label << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// ---------------------------------------------------------------------------
// Run manifest and lockfile

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

struct RunManifest {
  std::string config_hash;
  std::string code_version = kVersion;
  std::vector<std::uint64_t> seeds;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> artifacts;  // relative to the output directory
  Json checksums = Json::object();     // artifact -> checksum

  Json to_json() const {
    return {{"config_hash", config_hash}, {"code_version", code_version}, {"seeds", seeds},
            {"started_at", started_at},   {"finished_at", finished_at},   {"artifacts", artifacts},
            {"checksums", checksums}};
  }

  /// Stamps the finish time and writes manifest.json atomically.
  void finish(const std::filesystem::path& dir) {
    finished_at = utc_timestamp();
    write_json(dir / "manifest.json", to_json());
  }
};

/// Exclusive lock on an output directory, held for the object's lifetime.
/// A second experiment on the same directory fails fast instead of
/// interleaving artifacts.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
    std::filesystem::create_directories(dir);
    std::error_code ec;
    // create_directory is atomic: exactly one process can create the lock.
    if (!std::filesystem::create_directory(path_, ec) || ec) {
      throw Error("output directory " + dir.string() + " is locked by another run (remove " + path_.string() +
                  " if no run is active)");
    }
    std::ofstream(path_ / "pid") << ::getpid() << "\n";
  }
  ~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace lorot
