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

#include "process.h"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <thread>
#include <vector>

#include "fusepipe/errors.h"

namespace fusepipe::detail {

ProcessResult RunShell(const std::string& command, std::chrono::milliseconds timeout,
                       const std::filesystem::path& cwd) {
  const std::string cwd_str = cwd.string();
  const pid_t pid = ::fork();
  if (pid < 0) throw ExecutorError("fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    if (::chdir(cwd_str.c_str()) != 0) ::_exit(126);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  auto sleep = std::chrono::microseconds(200);
  int status = 0;
  for (;;) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) throw ExecutorError("waitpid failed");
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
      return {ProcessResult::Kind::kTimedOut, 0, SIGKILL};
    }
    std::this_thread::sleep_for(sleep);
    if (sleep < std::chrono::milliseconds(5)) sleep *= 2;
  }
  // Reap anything the program left behind in its group.
  ::kill(-pid, SIGKILL);
  if (WIFSIGNALED(status)) return {ProcessResult::Kind::kSignaled, 0, WTERMSIG(status)};
  return {ProcessResult::Kind::kExited, WEXITSTATUS(status), 0};
}

std::string ShellQuote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  out += '\'';
  return out;
}

bool CommandAvailable(std::string_view command_template) {
  const auto start = command_template.find_first_not_of(" \t");
  if (start == std::string_view::npos) return false;
  const auto end = command_template.find_first_of(" \t", start);
  const std::string word(command_template.substr(start, end - start));
  if (word.front() == '{') return true;
  static const char* kBuiltins[] = {"cd", "exec", "test", "[", "echo", "true", "false", "env", "."};
  for (const char* b : kBuiltins) {
    if (word == b) return true;
  }
  if (word.find('/') != std::string::npos) return ::access(word.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  if (path == nullptr) return false;
  std::string_view dirs(path);
  while (!dirs.empty()) {
    const auto colon = dirs.find(':');
    std::filesystem::path dir(std::string(dirs.substr(0, colon)));
    if (::access((dir / word).c_str(), X_OK) == 0) return true;
    if (colon == std::string_view::npos) break;
    dirs.remove_prefix(colon + 1);
  }
  return false;
}

}  // namespace fusepipe::detail
