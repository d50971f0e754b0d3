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

#include "fusepipe/jsonl.h"

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <set>
#include <sstream>

namespace fusepipe {

using nlohmann::json;

namespace {

template <typename E>
E EnumFrom(const json& j, std::optional<E> (*parse)(std::string_view), const char* what) {
  const auto s = j.get<std::string>();
  auto v = parse(s);
  if (!v) {
    throw json::type_error::create(302, std::string("unknown ") + what + " '" + s + "'", &j);
  }
  return *v;
}

}  // namespace

void to_json(json& j, const TestCase& t) {
  j = json{{"input", t.input}, {"expected_output", t.expected_output}, {"timeout_ms", t.timeout_ms}};
}

void from_json(const json& j, TestCase& t) {
  j.at("input").get_to(t.input);
  j.at("expected_output").get_to(t.expected_output);
  t.timeout_ms = j.value("timeout_ms", int64_t{1000});
}

void to_json(json& j, const Prompt& p) {
  j = json{{"id", p.id}, {"domain", ToString(p.domain)}, {"text", p.text}};
  if (p.gold_answer) j["gold_answer"] = *p.gold_answer;
  if (p.test_cases) j["test_cases"] = *p.test_cases;
  j["source_dataset"] = p.source_dataset;
}

void from_json(const json& j, Prompt& p) {
  j.at("id").get_to(p.id);
  p.domain = EnumFrom<Domain>(j.at("domain"), ParseDomain, "domain");
  j.at("text").get_to(p.text);
  p.gold_answer.reset();
  if (auto it = j.find("gold_answer"); it != j.end() && !it->is_null()) {
    p.gold_answer = it->get<std::string>();
  }
  p.test_cases.reset();
  if (auto it = j.find("test_cases"); it != j.end() && !it->is_null()) {
    p.test_cases = it->get<std::vector<TestCase>>();
  }
  p.source_dataset = j.value("source_dataset", std::string());
}

void to_json(json& j, const ScoredResponse& r) {
  j = json{{"prompt_id", r.prompt_id},
           {"source_model", r.source_model},
           {"seed", r.seed},
           {"text", r.text},
           {"rm_score", r.rm_score ? json(*r.rm_score) : json(nullptr)},
           {"correctness", ToString(r.correctness)},
           {"token_length", r.token_length}};
}

void from_json(const json& j, ScoredResponse& r) {
  j.at("prompt_id").get_to(r.prompt_id);
  j.at("source_model").get_to(r.source_model);
  j.at("seed").get_to(r.seed);
  j.at("text").get_to(r.text);
  r.rm_score.reset();
  if (auto it = j.find("rm_score"); it != j.end() && !it->is_null()) {
    r.rm_score = it->get<double>();
  }
  r.correctness = EnumFrom<Correctness>(j.at("correctness"), ParseCorrectness, "correctness");
  j.at("token_length").get_to(r.token_length);
}

void to_json(json& j, const PreferencePair& p) {
  j = json{{"prompt_id", p.prompt_id},
           {"source_model", p.source_model},
           {"chosen", p.chosen},
           {"rejected", p.rejected},
           {"gap", p.gap}};
}

void from_json(const json& j, PreferencePair& p) {
  j.at("prompt_id").get_to(p.prompt_id);
  j.at("source_model").get_to(p.source_model);
  j.at("chosen").get_to(p.chosen);
  j.at("rejected").get_to(p.rejected);
  j.at("gap").get_to(p.gap);
}

void to_json(json& j, const SftExample& e) {
  j = json{{"prompt_id", e.prompt_id},
           {"response", e.response},
           {"selection_reason", ToString(e.selection_reason)}};
}

void from_json(const json& j, SftExample& e) {
  j.at("prompt_id").get_to(e.prompt_id);
  j.at("response").get_to(e.response);
  e.selection_reason =
      EnumFrom<SelectionReason>(j.at("selection_reason"), ParseSelectionReason, "selection_reason");
}

std::string SchemaHeaderLine() { return std::string(kSchemaPrefix) + " " + std::string(kSchemaVersion); }

void CheckSchemaHeader(std::string_view line, std::size_t line_no) {
  std::string_view v = line.substr(kSchemaPrefix.size());
  while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
  while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
  if (v != kSchemaVersion) {
    throw FormatError("line " + std::to_string(line_no) + ": unsupported schema '" +
                      std::string(v) + "', expected " + std::string(kSchemaVersion));
  }
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return std::move(ss).str();
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents) {
  static std::atomic<uint64_t> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

ValidationReport ValidateCorpusText(std::string_view text) {
  ValidationReport report;
  for (Domain d : kAllDomains) report.counts[d] = 0;
  auto parsed = ParseJsonl<Prompt>(text);
  for (const auto& issue : parsed.issues) {
    ++report.malformed_lines;
    report.violations.push_back({issue.line, "", "malformed JSON: " + issue.message});
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < parsed.records.size(); ++i) {
    const Prompt& p = parsed.records[i];
    const std::size_t line = parsed.record_lines[i];
    ++report.counts[p.domain];
    for (auto& v : Validate(p)) report.violations.push_back({line, p.id, std::move(v)});
    if (!seen.insert(p.id).second) report.violations.push_back({line, p.id, "duplicate id"});
  }
  std::stable_sort(report.violations.begin(), report.violations.end(),
                   [](const CorpusViolation& a, const CorpusViolation& b) { return a.line < b.line; });
  return report;
}

ValidationReport ValidateCorpus(const std::filesystem::path& path) {
  return ValidateCorpusText(ReadFile(path));
}

json ToJson(const ValidationReport& report) {
  json counts = json::object();
  for (const auto& [d, n] : report.counts) counts[std::string(ToString(d))] = n;
  json violations = json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"line", v.line}, {"prompt_id", v.prompt_id}, {"message", v.message}});
  }
  return json{{"counts", counts},
              {"violations", violations},
              {"malformed_lines", report.malformed_lines}};
}

}  // namespace fusepipe
