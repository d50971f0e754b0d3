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

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>

namespace fusepipe::detail {

struct ProcessResult {
  enum class Kind { kExited, kSignaled, kTimedOut };
  Kind kind = Kind::kExited;
  int exit_code = 0;
  int signal = 0;
};

// Runs `command` with /bin/sh -c in its own process group, working directory
// `cwd`. The whole group is killed when `timeout` elapses.
ProcessResult RunShell(const std::string& command, std::chrono::milliseconds timeout,
                       const std::filesystem::path& cwd);

std::string ShellQuote(std::string_view s);

// Whether the program a command template starts with can be found: an
// existing executable path, or a name found on PATH. Templates that start
// with a placeholder or a shell builtin are accepted.
bool CommandAvailable(std::string_view command_template);

}  // namespace fusepipe::detail
