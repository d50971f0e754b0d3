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

#include "fusepipe/scoring.h"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "fusepipe/sampling.h"

namespace fusepipe {

std::string_view ToString(ScorerKind k) {
  return k == ScorerKind::kHttpScorer ? "HttpScorer" : "StubScorer";
}

std::string_view ToString(StubFormula f) {
  return f == StubFormula::kLengthLogistic ? "LengthLogistic" : "HashUniform";
}

std::optional<ScorerKind> ParseScorerKind(std::string_view s) {
  if (s == "HttpScorer") return ScorerKind::kHttpScorer;
  if (s == "StubScorer") return ScorerKind::kStubScorer;
  return std::nullopt;
}

std::optional<StubFormula> ParseStubFormula(std::string_view s) {
  if (s == "LengthLogistic") return StubFormula::kLengthLogistic;
  if (s == "HashUniform") return StubFormula::kHashUniform;
  return std::nullopt;
}

std::vector<std::string> Validate(const ScorerBinding& b) {
  std::vector<std::string> out;
  if (b.kind == ScorerKind::kHttpScorer && (!b.base_url || b.base_url->empty())) {
    out.push_back("HttpScorer requires base_url");
  }
  if (b.kind == ScorerKind::kStubScorer && b.stub_formula == StubFormula::kLengthLogistic &&
      !(std::isfinite(b.logistic_scale) && b.logistic_scale > 0 && std::isfinite(b.logistic_midpoint))) {
    out.push_back("LengthLogistic needs a finite midpoint and a positive scale");
  }
  return out;
}

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double HashUniformScore(std::string_view prompt_id, std::string_view model_id, int64_t seed) {
  std::string key;
  key.reserve(prompt_id.size() + model_id.size() + 24);
  key.append(prompt_id).append("|").append(model_id).append("|").append(std::to_string(seed));
  return static_cast<double>(Fnv1a64(key) % 1000000ULL) / 1e6;
}

double LengthLogisticScore(int64_t token_length, double midpoint, double scale) {
  const double z = (static_cast<double>(token_length) - midpoint) / scale;
  // Both branches avoid overflow in exp.
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void to_json(nlohmann::json& j, const ScoreFailure& f) {
  j = nlohmann::json{{"prompt_id", f.prompt_id}, {"model_id", f.model_id},
                     {"seed", f.seed}, {"message", f.message}};
}

void from_json(const nlohmann::json& j, ScoreFailure& f) {
  j.at("prompt_id").get_to(f.prompt_id);
  j.at("model_id").get_to(f.model_id);
  j.at("seed").get_to(f.seed);
  j.at("message").get_to(f.message);
}

ScoredPool ScorePool(std::span<const ScoredResponse> pool, const ScorerBinding& binding,
                     int parallelism, const PromptTextLookup& prompt_text, RewardClient* client) {
  if (auto v = Validate(binding); !v.empty()) throw ConfigError(v.front());
  if (parallelism < 1) throw ConfigError("parallelism must be positive");
  for (const auto& r : pool) {
    if (r.rm_score) {
      throw std::invalid_argument("score_pool: response " + r.prompt_id + "/" + r.source_model +
                                  "/" + std::to_string(r.seed) + " is already scored");
    }
  }

  std::unique_ptr<RewardClient> owned;
  if (binding.kind == ScorerKind::kHttpScorer && client == nullptr) {
    owned = MakeHttpRewardClient(*binding.base_url);
    client = owned.get();
  }

  std::vector<RewardResult> results(pool.size());
  auto score_one = [&](std::size_t i) {
    const ScoredResponse& r = pool[i];
    RewardResult out;
    if (binding.kind == ScorerKind::kStubScorer) {
      out.score = binding.stub_formula == StubFormula::kHashUniform
                      ? HashUniformScore(r.prompt_id, r.source_model, r.seed)
                      : LengthLogisticScore(r.token_length, binding.logistic_midpoint,
                                            binding.logistic_scale);
      return out;
    }
    std::optional<std::string> text = prompt_text ? prompt_text(r.prompt_id) : std::nullopt;
    if (!text) {
      out.error = "unknown prompt id";
      return out;
    }
    return client->Score(*text, r.text);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pool.size(); i = next++) results[i] = score_one(i);
  };
  const std::size_t n_threads =
      binding.kind == ScorerKind::kStubScorer
          ? 1
          : std::min<std::size_t>(static_cast<std::size_t>(parallelism), pool.size());
  {
    std::vector<std::jthread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
  }

  ScoredPool out;
  out.responses.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const ScoredResponse& r = pool[i];
    const RewardResult& res = results[i];
    std::string problem = res.error;
    if (res.score) {
      const double s = *res.score;
      if (!std::isfinite(s)) problem = "non-finite score";
      else if (s < 0.0 || s > 1.0) problem = "score " + std::to_string(s) + " outside [0,1]";
    } else if (problem.empty()) {
      problem = "no score";
    }
    if (res.score && problem.empty()) {
      ScoredResponse scored = r;
      scored.rm_score = *res.score;
      out.responses.push_back(std::move(scored));
    } else {
      out.failures.push_back({r.prompt_id, r.source_model, r.seed, problem});
    }
  }
  return out;
}

}  // namespace fusepipe
