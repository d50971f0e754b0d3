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

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusepipe/errors.h"
#include "fusepipe/types.h"

namespace fusepipe {

inline constexpr std::string_view kSchemaVersion = "fusepipe/1";
inline constexpr std::string_view kSchemaPrefix = "#schema:";

void to_json(nlohmann::json& j, const TestCase& t);
void from_json(const nlohmann::json& j, TestCase& t);
void to_json(nlohmann::json& j, const Prompt& p);
void from_json(const nlohmann::json& j, Prompt& p);
void to_json(nlohmann::json& j, const ScoredResponse& r);
void from_json(const nlohmann::json& j, ScoredResponse& r);
void to_json(nlohmann::json& j, const PreferencePair& p);
void from_json(const nlohmann::json& j, PreferencePair& p);
void to_json(nlohmann::json& j, const SftExample& e);
void from_json(const nlohmann::json& j, SftExample& e);

// A line that could not be turned into a record.
struct LineIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename T>
struct JsonlReadResult {
  std::vector<T> records;
  std::vector<std::size_t> record_lines;  // 1-based source line per record
  std::vector<LineIssue> issues;
};

// Writes `contents` to a sibling temp file and renames it over `path`, so a
// reader never observes a partially written file under the final name.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents);

std::string ReadFile(const std::filesystem::path& path);

// Checks a "#schema:" header line. Throws FormatError on a version mismatch.
void CheckSchemaHeader(std::string_view line, std::size_t line_no);

std::string SchemaHeaderLine();

// Parses JSONL text. Blank lines and the schema header are skipped; lines
// that fail to parse are recorded in `issues` and skipped.
template <typename T>
JsonlReadResult<T> ParseJsonl(std::string_view text) {
  JsonlReadResult<T> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    if (line.starts_with(kSchemaPrefix)) {
      CheckSchemaHeader(line, line_no);
      continue;
    }
    try {
      out.records.push_back(nlohmann::json::parse(line).get<T>());
      out.record_lines.push_back(line_no);
    } catch (const nlohmann::json::exception& e) {
      out.issues.push_back({line_no, e.what()});
    }
    if (end == text.size()) break;
  }
  return out;
}

// Reads a JSONL file; throws IoError if it cannot be opened.
template <typename T>
JsonlReadResult<T> ReadJsonl(const std::filesystem::path& path) {
  return ParseJsonl<T>(ReadFile(path));
}

template <typename T>
std::string ToJsonl(std::span<const T> records) {
  std::string out = SchemaHeaderLine();
  out += '\n';
  for (const T& r : records) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  return out;
}

template <typename T>
void WriteJsonl(const std::filesystem::path& path, std::span<const T> records) {
  WriteFileAtomic(path, ToJsonl(records));
}

template <typename T>
void WriteJsonl(const std::filesystem::path& path, const std::vector<T>& records) {
  WriteJsonl(path, std::span<const T>(records));
}

struct CorpusViolation {
  std::size_t line = 0;
  std::string prompt_id;  // empty when the line did not parse
  std::string message;
};

struct ValidationReport {
  std::map<Domain, std::size_t> counts;  // every domain present, possibly 0
  std::vector<CorpusViolation> violations;
  std::size_t malformed_lines = 0;
};

// Validates a corpus file of Prompt records. Malformed lines are reported and
// counted, not fatal. Throws IoError if the file is unreadable.
ValidationReport ValidateCorpus(const std::filesystem::path& path);
ValidationReport ValidateCorpusText(std::string_view text);

nlohmann::json ToJson(const ValidationReport& report);

}  // namespace fusepipe
