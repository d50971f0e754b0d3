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

#include "fusepipe/mock_server.h"

#include <mutex>
#include <regex>
#include <set>
#include <stdexcept>
#include <tuple>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fusepipe/scoring.h"

namespace fusepipe {

namespace {

constexpr const char* kWords[] = {"clear",   "answer", "detail", "careful", "useful", "example",
                                  "context", "simple", "note",   "step",    "reason", "summary"};

uint64_t ReplyHash(std::string_view model, std::string_view prompt, int64_t seed) {
  std::string key(model);
  key += '|';
  key += prompt;
  key += '|';
  key += std::to_string(seed);
  return Fnv1a64(key);
}

std::string Filler(uint64_t h, int words) {
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (i) out += ' ';
    out += kWords[(h >> (3 * (i % 20))) % std::size(kWords)];
  }
  return out;
}

std::string ArithmeticReply(const std::smatch& m, uint64_t h, int64_t seed) {
  const long long a = std::stoll(m[1].str());
  const long long b = std::stoll(m[3].str());
  const char op = m[2].str()[0];
  long long value = op == '+' ? a + b : op == '-' ? a - b : a * b;
  if (h % 4 == 0) {
    return "Attempt " + std::to_string(seed) + ": the answer is \\boxed{" + std::to_string(value + 1) + "}.";
  }
  return "Attempt " + std::to_string(seed) + ": we compute " + m[1].str() + " " + op + " " + m[3].str() + " " +
         Filler(h >> 8, 4 + static_cast<int>(h % 5)) + ".\nThe result is \\boxed{" + std::to_string(value) + "}.";
}

std::string ProgramReply(std::string_view prompt, uint64_t h, int64_t seed) {
  std::string body;
  bool wrong = h % 3 == 0;
  if (prompt.find("impossible") != std::string_view::npos) {
    body = "crash";
    wrong = false;
  } else if (prompt.find("sum") != std::string_view::npos) {
    body = "sum";
  } else {
    body = "cat";
  }
  const std::string tag = "# attempt " + std::to_string(seed) + "\n";
  if (wrong) return "Try this:\n```fixture\n" + tag + "print wrong\n```\n";
  return "Here is a " + Filler(h >> 8, 3 + static_cast<int>(h % 4)) + " program.\n```fixture\n" + tag + body +
         "\n```\n";
}

}  // namespace

std::string MockReply(std::string_view model, std::string_view prompt, int64_t seed) {
  const uint64_t h = ReplyHash(model, prompt, seed);
  static const std::regex arithmetic(R"(Compute (-?\d+) ([-+*]) (-?\d+))");
  const std::string text(prompt);
  std::smatch m;
  if (std::regex_search(text, m, arithmetic)) return ArithmeticReply(m, h, seed);
  if (text.find("program") != std::string::npos) return ProgramReply(prompt, h, seed);
  return "Seed " + std::to_string(seed) + " reply: " + Filler(h >> 4, 6 + static_cast<int>(h % 13)) + ".";
}

double MockScore(std::string_view prompt, std::string_view response) {
  std::string key(prompt);
  key += '\n';
  key += response;
  return 0.6 + static_cast<double>(Fnv1a64(key) % 1000) / 10000.0;
}

struct MockServer::Impl {
  httplib::Server server;
  std::mutex mu;
  std::set<std::tuple<std::string, std::string, int64_t>> seen;
  std::atomic<int64_t> chat{0};
  std::atomic<int64_t> score{0};

  Impl() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++chat;
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
        const auto model = body.at("model").get<std::string>();
        const auto content = body.at("messages").back().at("content").get<std::string>();
        const auto seed = body.value("seed", int64_t{0});
        if (model.rfind("reject", 0) == 0) {
          res.status = 400;
          res.set_content(R"({"error":"model rejected"})", "application/json");
          return;
        }
        if (model.rfind("flaky", 0) == 0) {
          std::lock_guard lock(mu);
          if (seen.emplace(model, content, seed).second) {
            res.status = 503;
            res.set_content(R"({"error":"try again"})", "application/json");
            return;
          }
        }
        nlohmann::json reply = {
            {"object", "chat.completion"},
            {"model", model},
            {"choices", nlohmann::json::array({{{"index", 0},
                                                {"finish_reason", "stop"},
                                                {"message", {{"role", "assistant"},
                                                             {"content", MockReply(model, content, seed)}}}}})}};
        res.set_content(reply.dump(), "application/json");
      } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    });
    server.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      ++score;
      try {
        const auto body = nlohmann::json::parse(req.body);
        const double s = MockScore(body.at("prompt").get<std::string>(), body.at("response").get<std::string>());
        res.set_content(nlohmann::json{{"score", s}}.dump(), "application/json");
      } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    });
  }
};

MockServer::MockServer() : impl_(std::make_unique<Impl>()) {}

MockServer::~MockServer() { Stop(); }

void MockServer::Start(int port) {
  if (thread_.joinable()) throw std::logic_error("mock server already running");
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
  } else {
    port_ = impl_->server.bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ < 0) throw std::runtime_error("mock server could not bind a port");
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void MockServer::Stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

void MockServer::Run(const std::string& host, int port) {
  port_ = port;
  if (!impl_->server.listen(host, port)) throw std::runtime_error("mock server could not listen on " + host);
}

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

int64_t MockServer::chat_requests() const { return impl_->chat.load(); }
int64_t MockServer::score_requests() const { return impl_->score.load(); }

}  // namespace fusepipe
