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

// 8-bit PNG and binary PPM/PGM reading and writing for float images in [0, 1].

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "lorot/common.hpp"
#include "lorot/image.hpp"

namespace lorot::io {

inline unsigned char to_byte(float v) {
  const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return static_cast<unsigned char>(std::lround(c * 255.0f));
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Writes a 1- or 3-channel image as 8-bit PNG.
inline void write_png(const std::filesystem::path& path, const ImageF& image) {
  if (image.channels() != 1 && image.channels() != 3) throw DimensionError("PNG export supports 1 or 3 channels");
  detail::FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw SourceError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw SourceError("libpng initialization failed");
  }
  std::vector<unsigned char> row(static_cast<std::size_t>(image.width()) * image.channels());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw SourceError("failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, image.width(), image.height(), 8,
               image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y) {
    const float* src = image.pixel(y, 0);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = to_byte(src[i]);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads an 8-bit gray, gray+alpha, RGB or RGBA PNG. Alpha is dropped.
inline ImageF read_png(const std::filesystem::path& path) {
  detail::FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw SourceError("cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw SourceError("corrupt image file (bad PNG signature): " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw SourceError("libpng initialization failed");
  }
  ImageF image;
  std::vector<unsigned char> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw SourceError("corrupt image file: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int c = png_get_channels(png, info);
  image = ImageF(h, w, c);
  row.resize(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    float* dst = image.pixel(y, 0);
    for (int i = 0; i < w * c; ++i) dst[i] = row[i] / 255.0f;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

/// Reads a binary PPM (P6) or PGM (P5) with maxval 255.
inline ImageF read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceError("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || (magic != "P6" && magic != "P5") || maxval != 255 || w <= 0 || h <= 0) {
    throw SourceError("corrupt image file (bad PNM header): " + path.string());
  }
  in.get();
  const int c = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * c);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw SourceError("corrupt image file (truncated pixel data): " + path.string());
  }
  ImageF image(h, w, c);
  auto v = image.values();
  for (std::size_t i = 0; i < buf.size(); ++i) v[i] = buf[i] / 255.0f;
  return image;
}

inline void write_pnm(const std::filesystem::path& path, const ImageF& image) {
  if (image.channels() != 1 && image.channels() != 3) throw DimensionError("PNM export supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SourceError("cannot open " + path.string() + " for writing");
  out << (image.channels() == 3 ? "P6" : "P5") << "\n" << image.width() << " " << image.height() << "\n255\n";
  for (float v : image.values()) out.put(static_cast<char>(to_byte(v)));
}

inline bool is_image_file(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

inline ImageF read_image(const std::filesystem::path& path) {
  return path.extension() == ".png" ? read_png(path) : read_pnm(path);
}

}  // namespace lorot::io
