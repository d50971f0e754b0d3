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

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace fusepipe {

using SymbolSequence = std::vector<int>;

// Tabular bigram policy over a small vocabulary. Symbol 0 is the begin
// context and is never emitted; symbol 1 ends a sequence. The next-symbol
// distribution after `prev` is softmax(logits[prev]) over symbols 1..V-1.
//
// A sequence passed to this class excludes the begin symbol; its log-prob is
// sum_t log p(y_t | y_{t-1}) with y_0 = begin.
class ToyPolicy {
 public:
  static constexpr int kBegin = 0;
  static constexpr int kEnd = 1;
  static constexpr std::size_t kMaxVocab = 64;

  ToyPolicy() = default;
  // `vocab` must start with the begin and end symbols; all logits start at 0.
  explicit ToyPolicy(std::vector<std::string> vocab);

  std::size_t vocab_size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }

  double logit(int prev, int next) const { return logits_[Index(prev, next)]; }
  void set_logit(int prev, int next, double v) { logits_[Index(prev, next)] = v; }
  std::span<double> logits() { return logits_; }
  std::span<const double> logits() const { return logits_; }

  // Whether this policy went through supervised fine-tuning.
  bool sft_trained() const { return sft_trained_; }
  void set_sft_trained(bool v) { sft_trained_ = v; }

  // log p(next | prev).
  double LogProb(int prev, int next) const;
  std::vector<double> NextLogProbs(int prev) const;

  double SequenceLogProb(std::span<const int> seq) const;
  std::vector<double> TokenLogProbs(std::span<const int> seq) const;

  // grad += weight * d SequenceLogProb(seq) / d logits.
  void AccumulateSequenceGrad(std::span<const int> seq, double weight,
                              std::span<double> grad) const;

  // Samples until the end symbol or max_len symbols.
  SymbolSequence Sample(std::mt19937_64& rng, std::size_t max_len) const;

  void RandomizeLogits(std::mt19937_64& rng, double stddev);

  // Throws DomainError if a symbol is out of range, the begin symbol appears,
  // or the sequence is empty.
  void CheckSequence(std::span<const int> seq) const;

  bool operator==(const ToyPolicy&) const = default;

 private:
  std::size_t Index(int prev, int next) const {
    return static_cast<std::size_t>(prev) * vocab_.size() + static_cast<std::size_t>(next);
  }

  std::vector<std::string> vocab_;
  std::vector<double> logits_;
  bool sft_trained_ = false;
};

nlohmann::json PolicyToJson(const ToyPolicy& p);
ToyPolicy PolicyFromJson(const nlohmann::json& j);

// Maps whitespace-delimited words to policy symbols. The vocabulary is the
// most frequent words (ties by lexicographic order) plus begin, end and an
// unknown symbol.
class SymbolRenderer {
 public:
  static constexpr int kUnknown = 2;

  explicit SymbolRenderer(std::vector<std::string> vocab);

  static SymbolRenderer FromTexts(std::span<const std::string> texts,
                                  std::size_t vocab_size = ToyPolicy::kMaxVocab);

  const std::vector<std::string>& vocab() const { return vocab_; }

  // Words mapped to symbols, truncated to max_len - 1 words, then the end
  // symbol. Empty text renders to just the end symbol.
  SymbolSequence Render(std::string_view text, std::size_t max_len) const;

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace fusepipe
