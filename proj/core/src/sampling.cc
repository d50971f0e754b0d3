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

#include "fusepipe/sampling.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <thread>
#include <tuple>

#include <spdlog/spdlog.h>

namespace fusepipe {

std::string_view ToString(ModelFamily f) {
  switch (f) {
    case ModelFamily::kGemmaLike: return "GemmaLike";
    case ModelFamily::kMistralLike: return "MistralLike";
    case ModelFamily::kLlamaLike: return "LlamaLike";
    case ModelFamily::kQwenLike: return "QwenLike";
    case ModelFamily::kOther: return "Other";
  }
  return "?";
}

std::optional<ModelFamily> ParseModelFamily(std::string_view s) {
  for (ModelFamily f : {ModelFamily::kGemmaLike, ModelFamily::kMistralLike,
                        ModelFamily::kLlamaLike, ModelFamily::kQwenLike, ModelFamily::kOther}) {
    if (ToString(f) == s) return f;
  }
  return std::nullopt;
}

std::vector<std::string> Validate(const SamplingProfile& p) {
  std::vector<std::string> out;
  if (!std::isfinite(p.temperature) || p.temperature <= 0) out.push_back("temperature must be > 0");
  if (!std::isfinite(p.top_p) || p.top_p <= 0 || p.top_p > 1) out.push_back("top_p must be in (0,1]");
  if (!std::isfinite(p.repetition_penalty) || p.repetition_penalty < 1) {
    out.push_back("repetition_penalty must be >= 1");
  }
  if (p.n_samples < 1 || p.n_samples > 64) out.push_back("n_samples must be in 1..64");
  return out;
}

std::vector<std::string> Validate(const ModelEndpoint& e) {
  std::vector<std::string> out;
  if (e.model_id.empty()) out.push_back("empty model_id");
  if (!ParseBaseUrl(e.base_url)) out.push_back("malformed base_url '" + e.base_url + "'");
  return out;
}

SamplingProfile DefaultProfile(ModelFamily family, Domain domain) {
  SamplingProfile p;
  switch (family) {
    case ModelFamily::kGemmaLike:
    case ModelFamily::kMistralLike:
    case ModelFamily::kLlamaLike:
      p.temperature = 0.8;
      p.top_p = 0.95;
      p.repetition_penalty = 1.0;
      break;
    case ModelFamily::kQwenLike:
      p.temperature = 0.7;
      p.top_p = 0.8;
      p.repetition_penalty = 1.05;
      break;
    case ModelFamily::kOther:
      throw UnknownFamilyError("no default sampling profile for family Other");
  }
  p.n_samples = domain == Domain::kCoding ? 8 : 5;
  return p;
}

std::string ParsedUrl::SchemeHostPort() const {
  return scheme + "://" + host + ":" + std::to_string(port);
}

std::optional<ParsedUrl> ParseBaseUrl(std::string_view url) {
  ParsedUrl out;
  const auto sep = url.find("://");
  if (sep == std::string_view::npos) return std::nullopt;
  out.scheme = std::string(url.substr(0, sep));
  if (out.scheme != "http" && out.scheme != "https") return std::nullopt;
  std::string_view rest = url.substr(sep + 3);
  const auto slash = rest.find('/');
  std::string_view authority = rest.substr(0, slash);
  if (slash != std::string_view::npos) {
    std::string_view path = rest.substr(slash);
    while (!path.empty() && path.back() == '/') path.remove_suffix(1);
    out.path_prefix = std::string(path);
  }
  if (authority.empty() || authority.find_first_of(" \t@?#") != std::string_view::npos) {
    return std::nullopt;
  }
  out.port = out.scheme == "https" ? 443 : 80;
  std::string_view host = authority;
  if (authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    host = authority.substr(1, close - 1);
    authority.remove_prefix(close + 1);
    if (!authority.empty()) {
      if (authority.front() != ':') return std::nullopt;
      authority.remove_prefix(1);
    } else {
      authority = {};
    }
  } else if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    authority = authority.substr(colon + 1);
  } else {
    authority = {};
  }
  if (!authority.empty()) {
    int port = 0;
    auto [p, ec] = std::from_chars(authority.data(), authority.data() + authority.size(), port);
    if (ec != std::errc() || p != authority.data() + authority.size() || port <= 0 || port > 65535) {
      return std::nullopt;
    }
    out.port = port;
  }
  if (host.empty()) return std::nullopt;
  out.host = std::string(host);
  return out;
}

nlohmann::json ChatRequestBody(const ChatRequest& req) {
  nlohmann::json body = {
      {"model", req.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.user_content}}})},
      {"temperature", req.temperature},
      {"top_p", req.top_p},
      {"seed", req.seed},
  };
  if (req.repetition_penalty != 1.0) body["repetition_penalty"] = req.repetition_penalty;
  if (req.max_tokens) body["max_tokens"] = *req.max_tokens;
  return body;
}

void to_json(nlohmann::json& j, const SampleFailure& f) {
  j = nlohmann::json{{"prompt_id", f.prompt_id}, {"model_id", f.model_id},
                     {"seed", f.seed},           {"attempts", f.attempts},
                     {"http_status", f.http_status}, {"message", f.message}};
}

void from_json(const nlohmann::json& j, SampleFailure& f) {
  j.at("prompt_id").get_to(f.prompt_id);
  j.at("model_id").get_to(f.model_id);
  j.at("seed").get_to(f.seed);
  j.at("attempts").get_to(f.attempts);
  j.at("http_status").get_to(f.http_status);
  j.at("message").get_to(f.message);
}

std::vector<const ModelEndpoint*> EndpointsInScope(Domain domain,
                                                   std::span<const ModelEndpoint> endpoints) {
  std::vector<const ModelEndpoint*> out;
  for (const auto& e : endpoints) {
    if (domain == Domain::kChinese) {
      if (e.chinese_specialist) out.push_back(&e);
    } else if (e.math_only) {
      if (domain == Domain::kMathematics) out.push_back(&e);
    } else {
      out.push_back(&e);
    }
  }
  return out;
}

namespace {

struct Job {
  const Prompt* prompt;
  const ModelEndpoint* endpoint;
  SamplingProfile profile;
};

struct JobOutcome {
  std::vector<ScoredResponse> responses;
  std::vector<SampleFailure> failures;
};

bool Retryable(const ChatResult& r) {
  return r.status == ChatResult::Status::kTransportError ||
         (r.status == ChatResult::Status::kHttpError && r.http_status >= 500);
}

JobOutcome RunJob(const Job& job, ChatClient& client, const SamplingOptions& options,
                  const TokenCounter& count_tokens) {
  JobOutcome out;
  for (int seed = 0; seed < job.profile.n_samples; ++seed) {
    ChatRequest req{job.endpoint->model_id,  job.prompt->text,
                    job.profile.temperature, job.profile.top_p,
                    job.profile.repetition_penalty, seed, options.max_tokens};
    ChatResult result;
    int attempt = 0;
    for (;;) {
      ++attempt;
      result = client.Complete(*job.endpoint, req);
      if (result.status == ChatResult::Status::kOk) break;
      if (!Retryable(result) || attempt >= options.max_attempts) break;
      const auto delay = options.backoff_base * (1LL << (attempt - 1));
      spdlog::warn("{} seed {} on {}: {}; retrying in {} ms", job.prompt->id, seed,
                   job.endpoint->model_id, result.error, delay.count());
      std::this_thread::sleep_for(delay);
    }
    if (result.status != ChatResult::Status::kOk) {
      out.failures.push_back({job.prompt->id, job.endpoint->model_id, seed, attempt,
                              result.http_status, result.error});
      continue;
    }
    ScoredResponse r;
    r.prompt_id = job.prompt->id;
    r.source_model = job.endpoint->model_id;
    r.seed = seed;
    r.text = std::move(result.text);
    r.token_length = count_tokens(r.text);
    out.responses.push_back(std::move(r));
  }
  // All or nothing per (prompt, endpoint).
  if (!out.failures.empty()) out.responses.clear();
  return out;
}

}  // namespace

ResponsePool SamplePool(std::span<const Prompt> prompts, std::span<const ModelEndpoint> endpoints,
                        ChatClient& client, const ProfileOverrides& overrides,
                        const SamplingOptions& options, const TokenCounter& count_tokens) {
  ResponsePool pool;
  if (prompts.empty()) return pool;
  if (endpoints.empty()) throw ConfigError("sample_pool needs at least one endpoint");
  if (options.parallelism < 1) throw ConfigError("parallelism must be positive");
  if (options.max_attempts < 1) throw ConfigError("max_attempts must be positive");
  for (const auto& e : endpoints) {
    if (auto v = Validate(e); !v.empty()) throw ConfigError(e.model_id + ": " + v.front());
  }

  std::vector<Job> jobs;
  for (const auto& p : prompts) {
    auto scope = EndpointsInScope(p.domain, endpoints);
    if (p.domain == Domain::kChinese && scope.size() != 1) {
      throw ConfigError("Chinese prompts need exactly one chinese_specialist endpoint, found " +
                        std::to_string(scope.size()));
    }
    for (const ModelEndpoint* e : scope) {
      SamplingProfile profile;
      if (auto it = overrides.find({e->model_id, p.domain}); it != overrides.end()) {
        profile = it->second;
      } else {
        profile = DefaultProfile(e->family, p.domain);
      }
      if (auto v = Validate(profile); !v.empty()) {
        throw ConfigError(e->model_id + " profile: " + v.front());
      }
      jobs.push_back({&p, e, profile});
    }
  }

  std::vector<JobOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      outcomes[i] = RunJob(jobs[i], client, options, count_tokens);
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(options.parallelism), jobs.size());
  std::vector<std::jthread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  threads.clear();

  for (auto& o : outcomes) {
    std::move(o.responses.begin(), o.responses.end(), std::back_inserter(pool.responses));
    std::move(o.failures.begin(), o.failures.end(), std::back_inserter(pool.failures));
  }
  auto key = [](const auto& x) { return std::tie(x.prompt_id, x.model_id, x.seed); };
  std::sort(pool.responses.begin(), pool.responses.end(), [](const ScoredResponse& a, const ScoredResponse& b) {
    return std::tie(a.prompt_id, a.source_model, a.seed) < std::tie(b.prompt_id, b.source_model, b.seed);
  });
  std::sort(pool.failures.begin(), pool.failures.end(),
            [&](const SampleFailure& a, const SampleFailure& b) { return key(a) < key(b); });
  return pool;
}

}  // namespace fusepipe
