// Copyright 2026 The neoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace neoc {

/// Base class of every error raised by the library. Domain errors map to
/// exit code 1 in the command-line tool.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (architecture, training, split parameters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unknown class, path outside a taxonomy, orphan labels.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data. `kind()` distinguishes the failure so callers
/// can tell a bad magic number from a truncated file.
class FormatError : public Error {
 public:
  enum class Kind {
    kBadMagic,
    kUnsupported,
    kBadMaxval,
    kTruncated,
    kShapeMismatch,
    kMalformed,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace neoc
