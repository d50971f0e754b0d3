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

// Interpreter for a line-oriented toy language:
//
//   # comment     ignored
//   cat           copy stdin to stdout
//   print TEXT    write TEXT and a newline
//   sum           write the sum of the integers on stdin
//   exit N        stop with status N
//   crash         abort
//   loop          never return
//
// Usage: fixture_exec run FILE | fixture_exec check FILE

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool Known(const std::string& line) {
  if (line.empty() || line[0] == '#') return true;
  if (line == "cat" || line == "sum" || line == "crash" || line == "loop") return true;
  if (line == "print" || line.rfind("print ", 0) == 0) return true;
  if (line.rfind("exit ", 0) == 0) {
    const auto code = line.substr(5);
    return !code.empty() && code.find_first_not_of("0123456789") == std::string::npos;
  }
  return false;
}

class Input {
 public:
  const std::string& text() {
    if (!text_) text_ = std::string(std::istreambuf_iterator<char>(std::cin), {});
    return *text_;
  }

 private:
  std::optional<std::string> text_;
};

int Run(const std::vector<std::string>& lines) {
  Input in;
  for (const auto& line : lines) {
    if (line.empty() || line[0] == '#') continue;
    if (line == "cat") {
      std::cout << in.text();
    } else if (line == "print") {
      std::cout << '\n';
    } else if (line.rfind("print ", 0) == 0) {
      std::cout << line.substr(6) << '\n';
    } else if (line == "sum") {
      std::istringstream is(in.text());
      long long total = 0, v = 0;
      while (is >> v) total += v;
      std::cout << total << '\n';
    } else if (line.rfind("exit ", 0) == 0 && Known(line)) {
      std::cout.flush();
      return std::atoi(line.c_str() + 5);
    } else if (line == "crash") {
      std::cout.flush();
      std::abort();
    } else if (line == "loop") {
      for (;;) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    } else {
      std::cerr << "unknown statement: " << line << '\n';
      return 2;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: fixture_exec run|check FILE\n";
    return 64;
  }
  const std::string mode = argv[1];
  std::ifstream f(argv[2]);
  if (!f) {
    std::cerr << "cannot open " << argv[2] << '\n';
    return 66;
  }
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) lines.push_back(Trim(line));
  if (mode == "check") {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (!Known(lines[i])) {
        std::cerr << argv[2] << ':' << i + 1 << ": unknown statement\n";
        return 1;
      }
    }
    return 0;
  }
  if (mode == "run") return Run(lines);
  std::cerr << "unknown mode " << mode << '\n';
  return 64;
}
