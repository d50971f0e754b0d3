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
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusepipe/errors.h"
#include "fusepipe/types.h"

namespace fusepipe {

enum class ModelFamily { kGemmaLike, kMistralLike, kLlamaLike, kQwenLike, kOther };

std::string_view ToString(ModelFamily f);
std::optional<ModelFamily> ParseModelFamily(std::string_view s);

struct SamplingProfile {
  double temperature = 0.8;
  double top_p = 0.95;
  double repetition_penalty = 1.0;  // 1.0 = not applied
  int n_samples = 5;

  bool operator==(const SamplingProfile&) const = default;
};

std::vector<std::string> Validate(const SamplingProfile& p);

struct ModelEndpoint {
  std::string model_id;
  std::string base_url;
  ModelFamily family = ModelFamily::kOther;
  std::optional<std::string> auth_token;
  // Chinese prompts go only to the (single) specialist endpoint.
  bool chinese_specialist = false;
  // Extra solution sources that only see Mathematics prompts.
  bool math_only = false;
};

std::vector<std::string> Validate(const ModelEndpoint& e);

class UnknownFamilyError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Per-family sampling profile for a domain. Throws UnknownFamilyError for
// ModelFamily::kOther, which needs an explicit override.
SamplingProfile DefaultProfile(ModelFamily family, Domain domain);

// Explicit profiles keyed by (model_id, domain); they win over defaults.
using ProfileOverrides = std::map<std::pair<std::string, Domain>, SamplingProfile>;

// Split form of an http(s) base URL.
struct ParsedUrl {
  std::string scheme;  // "http" or "https"
  std::string host;
  int port = 0;
  std::string path_prefix;  // without trailing '/', may be empty

  std::string SchemeHostPort() const;
};

// Returns nullopt when the URL is not a well-formed http(s) URL.
std::optional<ParsedUrl> ParseBaseUrl(std::string_view url);

struct ChatRequest {
  std::string model;
  std::string user_content;
  double temperature = 1.0;
  double top_p = 1.0;
  double repetition_penalty = 1.0;
  int64_t seed = 0;
  std::optional<int> max_tokens;
};

// OpenAI-compatible chat-completions request body.
nlohmann::json ChatRequestBody(const ChatRequest& req);

struct ChatResult {
  enum class Status { kOk, kTransportError, kHttpError, kBadResponse };
  Status status = Status::kOk;
  std::string text;
  int http_status = 0;
  std::string error;
};

// Transport for one chat-completion call. Implementations must be safe to
// call concurrently.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResult Complete(const ModelEndpoint& endpoint,
                              const ChatRequest& req) = 0;
};

// POSTs to {base_url}/v1/chat/completions.
std::unique_ptr<ChatClient> MakeHttpChatClient(
    std::chrono::milliseconds timeout = std::chrono::seconds(120));

struct SamplingOptions {
  int parallelism = 1;
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  std::optional<int> max_tokens;
};

struct SampleFailure {
  std::string prompt_id;
  std::string model_id;
  int64_t seed = 0;
  int attempts = 0;
  int http_status = 0;  // 0 for transport errors
  std::string message;

  bool operator==(const SampleFailure&) const = default;
};

void to_json(nlohmann::json& j, const SampleFailure& f);
void from_json(const nlohmann::json& j, SampleFailure& f);

struct ResponsePool {
  std::vector<ScoredResponse> responses;  // sorted by (prompt_id, model, seed)
  std::vector<SampleFailure> failures;
};

// Endpoints that receive a prompt of the given domain.
std::vector<const ModelEndpoint*> EndpointsInScope(
    Domain domain, std::span<const ModelEndpoint> endpoints);

// Samples n_samples responses (seeds 0..n-1) from every endpoint in scope for
// every prompt. A (prompt, endpoint) pair either contributes all of its
// samples or appears in the failure report. Transport and 5xx errors are
// retried with exponential backoff; 4xx errors are not.
ResponsePool SamplePool(std::span<const Prompt> prompts,
                        std::span<const ModelEndpoint> endpoints,
                        ChatClient& client, const ProfileOverrides& overrides = {},
                        const SamplingOptions& options = {},
                        const TokenCounter& count_tokens = WhitespaceTokenCount);

}  // namespace fusepipe
