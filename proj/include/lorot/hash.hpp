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

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

namespace lorot {

/// Incremental 64-bit FNV-1a. Used for dataset checksums, config hashes and
/// history/report fingerprints; not a cryptographic hash.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  Fnv1a& text(std::string_view s) { return bytes(s.data(), s.size()); }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  Fnv1a& value(const T& v) {
    return bytes(&v, sizeof(T));
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  Fnv1a& values(std::span<const T> vs) {
    return bytes(vs.data(), vs.size_bytes());
  }

  std::uint64_t digest() const noexcept { return state_; }

  std::string hex() const { return to_hex(state_); }

  static std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string hash_text(std::string_view s) { return Fnv1a{}.text(s).hex(); }

}  // namespace lorot
