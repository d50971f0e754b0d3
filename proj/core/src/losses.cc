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

#include "fusepipe/losses.h"

#include <cmath>
#include <string>

#include "fusepipe/errors.h"

namespace fusepipe {

std::string_view ToString(LossType t) { return t == LossType::kDpo ? "DPO" : "LN_DPO"; }

std::optional<LossType> ParseLossType(std::string_view s) {
  if (s == "DPO") return LossType::kDpo;
  if (s == "LN_DPO" || s == "LN-DPO") return LossType::kLnDpo;
  return std::nullopt;
}

namespace {

void CheckSequence(const SequenceLogProbs& s, const char* side) {
  if (!std::isfinite(s.policy_logp) || !std::isfinite(s.ref_logp)) {
    throw DomainError(std::string(side) + ": non-finite log-probability");
  }
  if (s.policy_logp > 0 || s.ref_logp > 0) {
    throw DomainError(std::string(side) + ": log-probability must be <= 0");
  }
  if (s.length < 1) throw DomainError(std::string(side) + ": length must be >= 1");
}

// Shared by both objectives: c_w * chosen log-ratio - c_l * rejected log-ratio.
// With c_w == c_l == beta / L this is bit-identical to DPO with beta / L.
double WeightedMargin(const PairLogProbs& p, double chosen_coef, double rejected_coef) {
  const double chosen_ratio = p.chosen.policy_logp - p.chosen.ref_logp;
  const double rejected_ratio = p.rejected.policy_logp - p.rejected.ref_logp;
  return chosen_coef * chosen_ratio - rejected_coef * rejected_ratio;
}

LossResult WeightedLoss(const PairLogProbs& p, double chosen_coef, double rejected_coef) {
  LossResult r;
  r.margin = WeightedMargin(p, chosen_coef, rejected_coef);
  if (!std::isfinite(r.margin)) {
    throw NumericError("preference loss", "margin=" + std::to_string(r.margin));
  }
  r.loss = NegLogSigmoid(r.margin);
  // d loss / d margin = -sigmoid(-margin).
  const double s = Sigmoid(-r.margin);
  if (!std::isfinite(r.loss) || !std::isfinite(s)) {
    throw NumericError("preference loss", "loss=" + std::to_string(r.loss) + " margin=" + std::to_string(r.margin));
  }
  r.grad.chosen_policy = -chosen_coef * s;
  r.grad.rejected_policy = rejected_coef * s;
  r.grad.chosen_ref = chosen_coef * s;
  r.grad.rejected_ref = -rejected_coef * s;
  return r;
}

}  // namespace

void ValidatePair(const PairLogProbs& pair) {
  CheckSequence(pair.chosen, "chosen");
  CheckSequence(pair.rejected, "rejected");
  if (!std::isfinite(pair.beta) || pair.beta <= 0) throw DomainError("beta must be finite and > 0");
}

double SftNll(std::span<const double> token_logps, Reduction reduction) {
  // Neumaier summation.
  double sum = 0.0;
  double comp = 0.0;
  for (double v : token_logps) {
    if (!std::isfinite(v) || v > 0) {
      throw DomainError("token log-probability must be finite and <= 0, got " + std::to_string(v));
    }
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v;
    else comp += (v - t) + sum;
    sum = t;
  }
  double nll = -(sum + comp);
  if (nll == 0.0) nll = 0.0;  // no negative zero
  if (reduction == Reduction::kMean && !token_logps.empty()) nll /= static_cast<double>(token_logps.size());
  return nll;
}

double RewardMargin(const PairLogProbs& pair) {
  ValidatePair(pair);
  return WeightedMargin(pair, pair.beta, pair.beta);
}

double LengthNormalizedMargin(const PairLogProbs& pair) {
  ValidatePair(pair);
  return WeightedMargin(pair, pair.beta / static_cast<double>(pair.chosen.length),
                        pair.beta / static_cast<double>(pair.rejected.length));
}

double Margin(const PairLogProbs& pair, LossType type) {
  return type == LossType::kDpo ? RewardMargin(pair) : LengthNormalizedMargin(pair);
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double NegLogSigmoid(double x) {
  // softplus(-x) = log(1 + exp(-x)).
  if (x >= 0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

LossResult DpoLoss(const PairLogProbs& pair) {
  ValidatePair(pair);
  return WeightedLoss(pair, pair.beta, pair.beta);
}

LossResult LnDpoLoss(const PairLogProbs& pair) {
  ValidatePair(pair);
  return WeightedLoss(pair, pair.beta / static_cast<double>(pair.chosen.length),
                      pair.beta / static_cast<double>(pair.rejected.length));
}

LossResult PreferenceLoss(const PairLogProbs& pair, LossType type) {
  return type == LossType::kDpo ? DpoLoss(pair) : LnDpoLoss(pair);
}

}  // namespace fusepipe
