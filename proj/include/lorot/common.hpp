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

#include <stdexcept>
#include <string>

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#endif

namespace lorot {

inline constexpr const char* kVersion = "0.3.1";

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Image or feature-map dimensions violate an operation's precondition.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A patch does not fit inside the image it is applied to.
class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

/// A class or pretext label lies outside its label space.
class LabelError : public Error {
 public:
  using Error::Error;
};

/// An input vector is not a valid probability distribution.
class ProbabilityError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Configuration failed validation. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A dataset source is missing or malformed.
class SourceError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Accuracy on the clean set is zero, so the affinity ratio is undefined.
class UndefinedAffinityError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Flushes denormal floats to zero on the calling thread. Converged training
/// runs otherwise slow down sharply once gradients underflow.
inline void enable_flush_to_zero() noexcept {
#if defined(__SSE__) || defined(_M_X64)
  _mm_setcsr(_mm_getcsr() | 0x8040);
#endif
}

}  // namespace lorot
