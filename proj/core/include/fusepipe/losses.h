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

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace fusepipe {

// Summed log-probabilities of one sequence under the trained policy and the
// frozen reference.
struct SequenceLogProbs {
  double policy_logp = 0.0;
  double ref_logp = 0.0;
  int64_t length = 1;
};

struct PairLogProbs {
  SequenceLogProbs chosen;
  SequenceLogProbs rejected;
  double beta = 0.1;
};

enum class LossType { kDpo, kLnDpo };
std::string_view ToString(LossType t);
std::optional<LossType> ParseLossType(std::string_view s);

enum class Reduction { kSum, kMean };

// Throws DomainError if the pair breaks its invariants (non-finite or
// positive log-probs, length < 1, beta <= 0).
void ValidatePair(const PairLogProbs& pair);

// -sum(logp) (or the mean). Throws DomainError for a positive or non-finite
// entry. Uses compensated summation.
double SftNll(std::span<const double> token_logps, Reduction reduction = Reduction::kSum);

// beta * (chosen log-ratio) - beta * (rejected log-ratio). The partition
// function cancels in this difference and is never computed.
double RewardMargin(const PairLogProbs& pair);

// (beta/|y_w|) * (chosen log-ratio) - (beta/|y_l|) * (rejected log-ratio).
double LengthNormalizedMargin(const PairLogProbs& pair);

double Margin(const PairLogProbs& pair, LossType type);

// Logistic sigmoid, overflow safe; Sigmoid(0) == 0.5 exactly.
double Sigmoid(double x);

// Bradley-Terry probability that the chosen response is preferred.
inline double PreferenceProb(double margin) { return Sigmoid(margin); }

// -log(sigmoid(x)) evaluated as softplus(-x).
double NegLogSigmoid(double x);

// d loss / d each log-prob input. Reference-side entries are reported for
// completeness; the reference is frozen during training.
struct LossGradient {
  double chosen_policy = 0.0;
  double rejected_policy = 0.0;
  double chosen_ref = 0.0;
  double rejected_ref = 0.0;
};

struct LossResult {
  double loss = 0.0;
  double margin = 0.0;
  LossGradient grad;
};

// -log sigmoid(RewardMargin). Throws NumericError on non-finite intermediates.
LossResult DpoLoss(const PairLogProbs& pair);

// -log sigmoid(LengthNormalizedMargin).
LossResult LnDpoLoss(const PairLogProbs& pair);

LossResult PreferenceLoss(const PairLogProbs& pair, LossType type);

}  // namespace fusepipe
