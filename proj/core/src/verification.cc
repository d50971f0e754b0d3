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

#include "fusepipe/verification.h"

#include <stdlib.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "fusepipe/errors.h"
#include "fusepipe/jsonl.h"
#include "process.h"

namespace fusepipe {

namespace {

bool IsSpace(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view Trim(std::string_view s) {
  while (!s.empty() && IsSpace(s.front())) s.remove_prefix(1);
  while (!s.empty() && IsSpace(s.back())) s.remove_suffix(1);
  return s;
}

// Content of the \boxed{...} starting at `open` (index of '{'), or nullopt if
// its braces never balance.
std::optional<std::string_view> BalancedGroup(std::string_view text, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    else if (text[i] == '}' && --depth == 0) return text.substr(open + 1, i - open - 1);
  }
  return std::nullopt;
}

bool ParseDecimal(std::string_view s, double& out) {
  if (s.empty()) return false;
  std::size_t i = 0;
  if (s[0] == '+' || s[0] == '-') i = 1;
  bool digits = false;
  bool dot = false;
  for (std::size_t k = i; k < s.size(); ++k) {
    if (s[k] >= '0' && s[k] <= '9') digits = true;
    else if (s[k] == '.' && !dot) dot = true;
    else return false;
  }
  if (!digits) return false;
  // from_chars rejects a leading '+'.
  const std::size_t from = s[0] == '+' ? 1 : 0;
  auto [p, ec] = std::from_chars(s.data() + from, s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::filesystem::path& parent) {
    std::filesystem::create_directories(parent);
    std::string tmpl = (parent / "fusepipe-exec-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw ExecutorError("cannot create temp dir in " + parent.string());
    path = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

void WriteText(const std::filesystem::path& p, std::string_view s) {
  std::ofstream out(p, std::ios::binary);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw ExecutorError("cannot write " + p.string());
}

std::string Expand(std::string_view tmpl, const std::filesystem::path& src,
                   const std::filesystem::path& stdin_file) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.substr(i).starts_with("{src}")) {
      out += detail::ShellQuote(src.string());
      i += 5;
    } else if (tmpl.substr(i).starts_with("{stdin_file}")) {
      out += detail::ShellQuote(stdin_file.string());
      i += 12;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

// Wraps an expanded template so stdin/stdout/stderr go to files in `dir`.
std::string Redirected(std::string_view tmpl, const std::filesystem::path& dir,
                       const std::filesystem::path& src, bool feed_stdin) {
  const auto in = dir / "stdin.txt";
  std::string cmd = "{ " + Expand(tmpl, src, in) + "\n}";
  const bool explicit_stdin = tmpl.find("{stdin_file}") != std::string_view::npos;
  cmd += (feed_stdin && !explicit_stdin) ? " < " + detail::ShellQuote(in.string()) : " < /dev/null";
  cmd += " > " + detail::ShellQuote((dir / "stdout.txt").string());
  cmd += " 2> " + detail::ShellQuote((dir / "stderr.txt").string());
  return cmd;
}

std::filesystem::path ExecWorkdir(const ExecutorBinding& b) {
  return b.workdir.empty() ? std::filesystem::temp_directory_path() : b.workdir;
}

void RequireExecutor(const ExecutorBinding& b) {
  if (auto v = Validate(b); !v.empty()) throw ConfigError("executor: " + v.front());
  if (!detail::CommandAvailable(b.command_template)) {
    throw ExecutorError("executor binary not found for template: " + b.command_template);
  }
  if (b.check_template && !detail::CommandAvailable(*b.check_template)) {
    throw ExecutorError("executor binary not found for template: " + *b.check_template);
  }
}

// Runs the check step on `code`; true when it exits 0 within the sandbox timeout.
bool PassesCheck(std::string_view code, const ExecutorBinding& b) {
  TempDir dir(ExecWorkdir(b));
  const auto src = dir.path / b.source_filename;
  WriteText(src, code);
  WriteText(dir.path / "stdin.txt", "");
  auto r = detail::RunShell(Redirected(*b.check_template, dir.path, src, false),
                            std::chrono::milliseconds(b.sandbox_timeout_ms), dir.path);
  return r.kind == detail::ProcessResult::Kind::kExited && r.exit_code == 0;
}

}  // namespace

std::string CanonicalizeAnswer(std::string_view answer) {
  std::string out;
  bool pending_space = false;
  for (char c : Trim(answer)) {
    if (c == '$' || c == '%' || c == ',') continue;
    if (IsSpace(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

std::optional<std::string> ExtractFinalAnswer(std::string_view text) {
  static constexpr std::string_view kBoxed = "\\boxed{";
  std::optional<std::string_view> boxed;
  for (std::size_t pos = text.find(kBoxed); pos != std::string_view::npos;
       pos = text.find(kBoxed, pos + 1)) {
    if (auto g = BalancedGroup(text, pos + kBoxed.size() - 1)) boxed = g;
  }
  if (boxed) {
    auto c = CanonicalizeAnswer(*boxed);
    if (!c.empty()) return c;
  }
  if (const auto hash = text.rfind("####"); hash != std::string_view::npos) {
    std::string_view rest = text.substr(hash + 4);
    rest = rest.substr(0, rest.find('\n'));
    auto c = CanonicalizeAnswer(rest);
    if (!c.empty()) return c;
  }
  return std::nullopt;
}

std::optional<double> ParseRational(std::string_view s) {
  std::string compact;
  for (char c : s) {
    if (!IsSpace(c)) compact += c;
  }
  std::string_view v = compact;
  double value = 0;
  if (const auto slash = v.find('/'); slash != std::string_view::npos) {
    double num = 0, den = 0;
    if (!ParseDecimal(v.substr(0, slash), num) || !ParseDecimal(v.substr(slash + 1), den) || den == 0) {
      return std::nullopt;
    }
    return num / den;
  }
  if (!ParseDecimal(v, value)) return std::nullopt;
  return value;
}

bool AnswersEquivalent(std::string_view a, std::string_view b) {
  const auto ca = CanonicalizeAnswer(a);
  const auto cb = CanonicalizeAnswer(b);
  const auto x = ParseRational(ca);
  const auto y = ParseRational(cb);
  if (x && y) {
    if (*x == *y) return true;
    return std::abs(*x - *y) <= 1e-9 * std::max(std::abs(*x), std::abs(*y));
  }
  return ca == cb;
}

Correctness CheckMath(std::string_view response_text, std::string_view gold) {
  if (CanonicalizeAnswer(gold).empty()) throw std::invalid_argument("check_math: empty gold answer");
  const auto extracted = ExtractFinalAnswer(response_text);
  if (!extracted) return Correctness::kIncorrect;
  return AnswersEquivalent(*extracted, gold) ? Correctness::kCorrect : Correctness::kIncorrect;
}

std::string_view ToString(TestOutcome t) {
  switch (t) {
    case TestOutcome::kPass: return "Pass";
    case TestOutcome::kFail: return "Fail";
    case TestOutcome::kTimeout: return "Timeout";
    case TestOutcome::kCrash: return "Crash";
  }
  return "?";
}

std::vector<std::string> Validate(const ExecutorBinding& b) {
  std::vector<std::string> out;
  if (b.command_template.find("{src}") == std::string::npos) {
    out.push_back("command_template must contain {src}");
  }
  if (b.sandbox_timeout_ms <= 0) out.push_back("sandbox_timeout_ms must be positive");
  if (b.source_filename.empty() || b.source_filename.find('/') != std::string::npos) {
    out.push_back("source_filename must be a plain file name");
  }
  return out;
}

std::optional<std::string> LastFencedBlock(std::string_view response) {
  std::optional<std::string> last;
  std::size_t pos = 0;
  for (;;) {
    const auto open = response.find("```", pos);
    if (open == std::string_view::npos) break;
    const auto body = response.find('\n', open);
    if (body == std::string_view::npos) break;
    const auto close = response.find("```", body + 1);
    if (close == std::string_view::npos) break;
    last = std::string(response.substr(body + 1, close - body - 1));
    pos = close + 3;
  }
  return last;
}

std::string ExtractProgram(std::string_view response, const ExecutorBinding& executor) {
  if (auto block = LastFencedBlock(response)) {
    return Trim(*block).empty() ? std::string() : *block;
  }
  if (Trim(response).empty() || !executor.check_template) return {};
  RequireExecutor(executor);
  return PassesCheck(response, executor) ? std::string(response) : std::string();
}

std::string NormalizeOutput(std::string_view s) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto end = s.find('\n', pos);
    if (end == std::string_view::npos) end = s.size();
    std::string_view line = s.substr(pos, end - pos);
    while (!line.empty() && IsSpace(line.back())) line.remove_suffix(1);
    out.append(line);
    out += '\n';
    pos = end + 1;
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

CodeVerdict RunCodeTests(std::string_view code, std::span<const TestCase> tests,
                         const ExecutorBinding& executor) {
  if (tests.empty()) throw std::invalid_argument("run_code_tests: no test cases");
  RequireExecutor(executor);
  CodeVerdict verdict;
  if (Trim(code).empty()) return verdict;
  verdict.static_ok = !executor.check_template || PassesCheck(code, executor);
  if (!verdict.static_ok) return verdict;

  for (const TestCase& t : tests) {
    TempDir dir(ExecWorkdir(executor));
    const auto src = dir.path / executor.source_filename;
    WriteText(src, code);
    WriteText(dir.path / "stdin.txt", t.input);
    const auto timeout = std::chrono::milliseconds(std::min(t.timeout_ms, executor.sandbox_timeout_ms));
    auto r = detail::RunShell(Redirected(executor.command_template, dir.path, src, true), timeout, dir.path);
    TestOutcome outcome;
    if (r.kind == detail::ProcessResult::Kind::kTimedOut) {
      outcome = TestOutcome::kTimeout;
    } else if (r.kind == detail::ProcessResult::Kind::kSignaled || r.exit_code != 0) {
      outcome = TestOutcome::kCrash;
    } else {
      std::string actual;
      try {
        actual = ReadFile(dir.path / "stdout.txt");
      } catch (const IoError&) {
      }
      outcome = NormalizeOutput(actual) == NormalizeOutput(t.expected_output) ? TestOutcome::kPass
                                                                               : TestOutcome::kFail;
    }
    verdict.per_test.push_back(outcome);
  }
  verdict.pass_all = std::all_of(verdict.per_test.begin(), verdict.per_test.end(),
                                 [](TestOutcome o) { return o == TestOutcome::kPass; });
  return verdict;
}

std::vector<ScoredResponse> AnnotateCorrectness(std::span<const ScoredResponse> pool,
                                                std::span<const Prompt> corpus,
                                                const ExecutorBinding& executor, int parallelism) {
  if (parallelism < 1) throw ConfigError("parallelism must be positive");
  std::unordered_map<std::string, const Prompt*> by_id;
  bool any_coding = false;
  for (const auto& p : corpus) {
    by_id.emplace(p.id, &p);
    any_coding |= p.domain == Domain::kCoding;
  }
  if (any_coding) RequireExecutor(executor);

  std::vector<ScoredResponse> out(pool.begin(), pool.end());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto annotate = [&](ScoredResponse& r) {
    auto it = by_id.find(r.prompt_id);
    if (it == by_id.end()) return;
    const Prompt& p = *it->second;
    switch (p.domain) {
      case Domain::kMathematics:
        // Invalid prompts (no gold answer, no tests) cannot certify anything.
        r.correctness = p.gold_answer && !CanonicalizeAnswer(*p.gold_answer).empty()
                            ? CheckMath(r.text, *p.gold_answer)
                            : Correctness::kIncorrect;
        break;
      case Domain::kCoding: {
        if (!p.test_cases || p.test_cases->empty()) {
          r.correctness = Correctness::kIncorrect;
          break;
        }
        const auto program = ExtractProgram(r.text, executor);
        const auto verdict = RunCodeTests(program, *p.test_cases, executor);
        r.correctness = verdict.pass_all ? Correctness::kCorrect : Correctness::kIncorrect;
        break;
      }
      default:
        r.correctness = Correctness::kUnknown;
        break;
    }
  };
  auto worker = [&] {
    for (std::size_t i = next++; i < out.size(); i = next++) {
      try {
        annotate(out[i]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = out.size();
      }
    }
  };
  {
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(parallelism), out.size());
    std::vector<std::jthread> threads;
    for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace fusepipe
