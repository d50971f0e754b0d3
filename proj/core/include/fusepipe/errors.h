// Copyright 2026 The fusepipe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace fusepipe {

// Base for every error the pipeline raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file header or unsupported schema version.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input outside the mathematical domain of an operation (e.g. a positive
// log-probability, zero total steps).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A finite input produced a non-finite intermediate. `detail` names the
// offending quantity and its value.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::string detail)
      : Error(what + ": " + detail), detail_(std::move(detail)) {}
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
};

// The code executor binary could not be found or launched.
class ExecutorError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage ran without the artifact an earlier stage writes.
class MissingArtifactError : public Error {
 public:
  explicit MissingArtifactError(std::string path)
      : Error("missing prerequisite artifact: " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace fusepipe
