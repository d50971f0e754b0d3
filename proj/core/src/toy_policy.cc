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

#include "fusepipe/toy_policy.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "fusepipe/errors.h"

namespace fusepipe {

namespace {

double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double Gaussian(std::mt19937_64& rng) {
  // Box-Muller; avoids log(0).
  const double u1 = 1.0 - Uniform01(rng);
  const double u2 = Uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

ToyPolicy::ToyPolicy(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
  if (vocab_.size() < 3 || vocab_.size() > kMaxVocab) {
    throw DomainError("toy vocabulary size must be in [3, 64], got " + std::to_string(vocab_.size()));
  }
  logits_.assign(vocab_.size() * vocab_.size(), 0.0);
}

std::vector<double> ToyPolicy::NextLogProbs(int prev) const {
  const std::size_t v = vocab_.size();
  std::vector<double> out(v, -std::numeric_limits<double>::infinity());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, logits_[Index(prev, static_cast<int>(j))]);
  double z = 0.0;
  for (std::size_t j = 1; j < v; ++j) z += std::exp(logits_[Index(prev, static_cast<int>(j))] - mx);
  const double lse = mx + std::log(z);
  for (std::size_t j = 1; j < v; ++j) out[j] = logits_[Index(prev, static_cast<int>(j))] - lse;
  return out;
}

double ToyPolicy::LogProb(int prev, int next) const { return NextLogProbs(prev)[static_cast<std::size_t>(next)]; }

void ToyPolicy::CheckSequence(std::span<const int> seq) const {
  if (seq.empty()) throw DomainError("empty symbol sequence");
  for (int s : seq) {
    if (s <= kBegin || static_cast<std::size_t>(s) >= vocab_.size()) {
      throw DomainError("symbol " + std::to_string(s) + " outside [1, " + std::to_string(vocab_.size()) + ")");
    }
  }
}

std::vector<double> ToyPolicy::TokenLogProbs(std::span<const int> seq) const {
  CheckSequence(seq);
  std::vector<double> out;
  out.reserve(seq.size());
  int prev = kBegin;
  for (int s : seq) {
    out.push_back(LogProb(prev, s));
    prev = s;
  }
  return out;
}

double ToyPolicy::SequenceLogProb(std::span<const int> seq) const {
  double sum = 0.0;
  for (double lp : TokenLogProbs(seq)) sum += lp;
  return sum;
}

void ToyPolicy::AccumulateSequenceGrad(std::span<const int> seq, double weight, std::span<double> grad) const {
  CheckSequence(seq);
  if (grad.size() != logits_.size()) throw DomainError("gradient buffer has the wrong size");
  const std::size_t v = vocab_.size();
  int prev = kBegin;
  for (int s : seq) {
    const auto lp = NextLogProbs(prev);
    for (std::size_t j = 1; j < v; ++j) {
      const double target = static_cast<int>(j) == s ? 1.0 : 0.0;
      grad[Index(prev, static_cast<int>(j))] += weight * (target - std::exp(lp[j]));
    }
    prev = s;
  }
}

SymbolSequence ToyPolicy::Sample(std::mt19937_64& rng, std::size_t max_len) const {
  SymbolSequence out;
  int prev = kBegin;
  while (out.size() < max_len) {
    const auto lp = NextLogProbs(prev);
    const double u = Uniform01(rng);
    double acc = 0.0;
    int next = static_cast<int>(vocab_.size()) - 1;
    for (std::size_t j = 1; j < vocab_.size(); ++j) {
      acc += std::exp(lp[j]);
      if (u < acc) {
        next = static_cast<int>(j);
        break;
      }
    }
    out.push_back(next);
    if (next == kEnd) break;
    prev = next;
  }
  return out;
}

void ToyPolicy::RandomizeLogits(std::mt19937_64& rng, double stddev) {
  for (double& l : logits_) l = stddev * Gaussian(rng);
}

nlohmann::json PolicyToJson(const ToyPolicy& p) {
  return nlohmann::json{{"format", "fusepipe-toy-policy/1"},
                        {"vocab", p.vocab()},
                        {"sft_trained", p.sft_trained()},
                        {"logits", std::vector<double>(p.logits().begin(), p.logits().end())}};
}

ToyPolicy PolicyFromJson(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "fusepipe-toy-policy/1") {
    throw FormatError("not a fusepipe toy policy");
  }
  ToyPolicy p(j.at("vocab").get<std::vector<std::string>>());
  const auto logits = j.at("logits").get<std::vector<double>>();
  if (logits.size() != p.logits().size()) throw FormatError("logit table has the wrong size");
  std::copy(logits.begin(), logits.end(), p.logits().begin());
  p.set_sft_trained(j.value("sft_trained", false));
  return p;
}

SymbolRenderer::SymbolRenderer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
  if (vocab_.size() < 3 || vocab_.size() > ToyPolicy::kMaxVocab) {
    throw DomainError("renderer vocabulary size must be in [3, 64]");
  }
  for (std::size_t i = 3; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i));
}

SymbolRenderer SymbolRenderer::FromTexts(std::span<const std::string> texts, std::size_t vocab_size) {
  if (vocab_size < 3 || vocab_size > ToyPolicy::kMaxVocab) {
    throw DomainError("renderer vocabulary size must be in [3, 64]");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    std::size_t pos = 0;
    while (pos < t.size()) {
      const auto start = t.find_first_not_of(" \t\r\n\v\f", pos);
      if (start == std::string::npos) break;
      auto end = t.find_first_of(" \t\r\n\v\f", start);
      if (end == std::string::npos) end = t.size();
      ++counts[t.substr(start, end - start)];
      pos = end;
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> vocab = {"<s>", "</s>", "<unk>"};
  for (const auto& [word, n] : ranked) {
    if (vocab.size() >= vocab_size) break;
    vocab.push_back(word);
  }
  return SymbolRenderer(std::move(vocab));
}

SymbolSequence SymbolRenderer::Render(std::string_view text, std::size_t max_len) const {
  if (max_len < 1) throw DomainError("max_len must be >= 1");
  SymbolSequence out;
  std::size_t pos = 0;
  while (pos < text.size() && out.size() + 1 < max_len) {
    const auto start = text.find_first_not_of(" \t\r\n\v\f", pos);
    if (start == std::string_view::npos) break;
    auto end = text.find_first_of(" \t\r\n\v\f", start);
    if (end == std::string_view::npos) end = text.size();
    auto it = index_.find(std::string(text.substr(start, end - start)));
    out.push_back(it == index_.end() ? kUnknown : it->second);
    pos = end;
  }
  out.push_back(ToyPolicy::kEnd);
  return out;
}

}  // namespace fusepipe
