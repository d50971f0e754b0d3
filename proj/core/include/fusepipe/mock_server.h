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

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

namespace fusepipe {

// Deterministic reply the mock server produces for (model, prompt, seed).
// Every reply mentions the seed. Arithmetic prompts ("Compute 17 + 55.") get
// a worked answer that is right for most seeds; prompts asking for a program
// that echoes or sums its input get a fenced fixture-language program that is
// sometimes wrong; anything else gets seed-dependent prose.
std::string MockReply(std::string_view model, std::string_view prompt, int64_t seed);

// Score served by the mock /score endpoint.
double MockScore(std::string_view prompt, std::string_view response);

// In-process OpenAI-compatible chat server plus a /score endpoint, for tests
// and offline pipeline runs. Model ids starting with "reject" are answered
// with HTTP 400; ids starting with "flaky" fail with HTTP 503 on every first
// attempt of a (model, prompt, seed) request.
class MockServer {
 public:
  MockServer();
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds to 127.0.0.1 (port 0 = any free port) and serves in the background.
  void Start(int port = 0);
  void Stop();
  // Serves on the calling thread until Stop().
  void Run(const std::string& host, int port);

  int port() const { return port_; }
  std::string base_url() const;
  int64_t chat_requests() const;
  int64_t score_requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace fusepipe
