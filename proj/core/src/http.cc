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

// HTTP transports for the chat-completions and reward-scoring contracts.

#include <cmath>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fusepipe/sampling.h"
#include "fusepipe/scoring.h"

namespace fusepipe {

namespace {

std::unique_ptr<httplib::Client> MakeClient(const ParsedUrl& url, std::chrono::milliseconds timeout) {
  auto client = std::make_unique<httplib::Client>(url.SchemeHostPort());
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client->set_connection_timeout(secs, usecs);
  client->set_read_timeout(secs, usecs);
  client->set_write_timeout(secs, usecs);
  return client;
}

class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  ChatResult Complete(const ModelEndpoint& endpoint, const ChatRequest& req) override {
    ChatResult out;
    auto url = ParseBaseUrl(endpoint.base_url);
    if (!url) {
      out.status = ChatResult::Status::kTransportError;
      out.error = "malformed base_url " + endpoint.base_url;
      return out;
    }
    // httplib clients are not thread safe; one per call keeps this reentrant.
    auto client = MakeClient(*url, timeout_);
    httplib::Headers headers;
    if (endpoint.auth_token && !endpoint.auth_token->empty()) {
      headers.emplace("Authorization", "Bearer " + *endpoint.auth_token);
    }
    auto res = client->Post(url->path_prefix + "/v1/chat/completions", headers,
                            ChatRequestBody(req).dump(), "application/json");
    if (!res) {
      out.status = ChatResult::Status::kTransportError;
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.http_status = res->status;
    if (res->status < 200 || res->status >= 300) {
      out.status = ChatResult::Status::kHttpError;
      out.error = "HTTP " + std::to_string(res->status);
      return out;
    }
    try {
      auto body = nlohmann::json::parse(res->body);
      out.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      out.status = ChatResult::Status::kBadResponse;
      out.error = std::string("bad completion body: ") + e.what();
    }
    return out;
  }

 private:
  std::chrono::milliseconds timeout_;
};

class HttpRewardClient final : public RewardClient {
 public:
  HttpRewardClient(std::string base_url, std::chrono::milliseconds timeout)
      : base_url_(std::move(base_url)), timeout_(timeout) {}

  RewardResult Score(std::string_view prompt, std::string_view response) override {
    RewardResult out;
    auto url = ParseBaseUrl(base_url_);
    if (!url) {
      out.error = "malformed scorer base_url " + base_url_;
      return out;
    }
    auto client = MakeClient(*url, timeout_);
    nlohmann::json body = {{"prompt", prompt}, {"response", response}};
    auto res = client->Post(url->path_prefix + "/score", body.dump(), "application/json");
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    if (res->status != 200) {
      out.error = "HTTP " + std::to_string(res->status);
      return out;
    }
    try {
      auto j = nlohmann::json::parse(res->body);
      const auto& s = j.at("score");
      if (!s.is_number()) {
        out.error = "non-numeric score";
        return out;
      }
      out.score = s.get<double>();
    } catch (const nlohmann::json::exception& e) {
      out.error = std::string("bad score body: ") + e.what();
    }
    return out;
  }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

}  // namespace

std::unique_ptr<ChatClient> MakeHttpChatClient(std::chrono::milliseconds timeout) {
  return std::make_unique<HttpChatClient>(timeout);
}

std::unique_ptr<RewardClient> MakeHttpRewardClient(std::string base_url,
                                                   std::chrono::milliseconds timeout) {
  return std::make_unique<HttpRewardClient>(std::move(base_url), timeout);
}

}  // namespace fusepipe
