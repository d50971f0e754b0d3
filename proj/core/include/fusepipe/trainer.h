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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusepipe/losses.h"
#include "fusepipe/toy_policy.h"

namespace fusepipe {

enum class TrainStage { kSft, kDpo };
std::string_view ToString(TrainStage s);

struct TrainConfig {
  TrainStage stage = TrainStage::kSft;
  int epochs = 3;
  int batch_size = 128;
  double peak_lr = 1.0;
  double warmup_ratio = 0.1;
  double beta = 10.0;
  LossType loss_type = LossType::kLnDpo;
  int checkpoint_every = 100;
  std::size_t max_seq_len = 32;
  uint64_t seed = 0;

  // Recipe defaults per stage: SFT 3 epochs, DPO 1 epoch, batch 128, warmup
  // 0.1, checkpoints every 100 steps.
  static TrainConfig Defaults(TrainStage stage);
};

std::vector<std::string> Validate(const TrainConfig& c);
nlohmann::json ToJson(const TrainConfig& c);

// Warmup steps for a run: ceil(warmup_ratio * total_steps).
int64_t WarmupSteps(int64_t total_steps, double warmup_ratio);

// Linear ramp 0 -> peak over the warmup steps, then cosine decay to 0 at
// total_steps. Throws DomainError for total_steps <= 0 or step outside
// [0, total_steps].
double CosineLr(int64_t step, int64_t total_steps, double warmup_ratio, double peak_lr);

// epochs * ceil(n_examples / batch_size).
int64_t TotalSteps(std::size_t n_examples, const TrainConfig& config);

// Steps after which a checkpoint is written: every `every` steps plus the
// final step.
std::vector<int64_t> CheckpointSteps(int64_t total_steps, int every);

struct CurvePoint {
  int64_t step = 0;  // 1-based update index
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> mean_margin;  // DPO only
};

std::string CurveToCsv(std::span<const CurvePoint> curve);

struct Checkpoint {
  int64_t step = 0;
  ToyPolicy policy;
};

struct SftResult {
  ToyPolicy policy;
  std::vector<CurvePoint> curve;
  std::vector<Checkpoint> checkpoints;
  double initial_nll = 0.0;  // mean per-sequence NLL over the dataset
  double final_nll = 0.0;
};

// Mean per-sequence NLL of `data` under `policy`.
double MeanSequenceNll(const ToyPolicy& policy, std::span<const SymbolSequence> data);

// d MeanSequenceNll / d logits.
std::vector<double> SftGradient(const ToyPolicy& policy,
                                std::span<const SymbolSequence> data);

// Mini-batch gradient descent on the sequence NLL with the cosine schedule.
// Batch order is reshuffled every epoch from config.seed.
SftResult TrainSft(ToyPolicy policy, std::span<const SymbolSequence> data,
                   const TrainConfig& config);

struct SymbolPair {
  SymbolSequence chosen;
  SymbolSequence rejected;
};

PairLogProbs PairInputs(const ToyPolicy& policy, const ToyPolicy& reference,
                        const SymbolPair& pair, double beta);

// Mean preference loss over pairs and its gradient w.r.t. the policy logits.
double PreferenceBatchLoss(const ToyPolicy& policy, const ToyPolicy& reference,
                           std::span<const SymbolPair> pairs, double beta,
                           LossType type, std::vector<double>* grad = nullptr);

struct MarginStats {
  // Margins are those of the configured objective: length-normalized for
  // LN-DPO, plain otherwise.
  double mean_margin = 0.0;
  double fraction_positive = 0.0;     // margin > 0
  double mean_preference_prob = 0.0;  // sigmoid(margin)
  double mean_loss = 0.0;             // configured loss type
};

MarginStats EvaluatePairs(const ToyPolicy& policy, const ToyPolicy& reference,
                          std::span<const SymbolPair> pairs, double beta,
                          LossType type);

// Index into `checkpoints` of the selection: the lower validation loss of
// the last two (the later one on ties), or the only one.
std::size_t SelectCheckpoint(std::span<const double> validation_losses);

struct DpoOptions {
  // Permit a reference that never went through SFT.
  bool allow_unsft_reference = false;
  // Pairs used to choose between the last two checkpoints; the training
  // pairs when empty.
  std::span<const SymbolPair> validation_pairs;
};

struct DpoResult {
  ToyPolicy policy;  // the selected checkpoint
  ToyPolicy reference;
  std::vector<CurvePoint> curve;
  std::vector<Checkpoint> checkpoints;
  std::vector<double> validation_losses;  // one per checkpoint
  std::size_t selected = 0;
};

// Optimizes the DPO or length-normalized DPO loss starting from `policy_init`,
// with a frozen copy of it as reference.
DpoResult TrainDpo(const ToyPolicy& policy_init, std::span<const SymbolPair> pairs,
                   const TrainConfig& config, const DpoOptions& options = {});

// Mean length over `samples` sequences drawn with mt19937_64(seed).
double MeanSampledLength(const ToyPolicy& policy, std::size_t samples, uint64_t seed,
                         std::size_t max_len);

// Synthetic task with a length-biased preference signal: sequences are drawn
// from a random base policy, scored with the length-logistic stub scorer, and
// each group's best and worst become a pair.
struct SyntheticTask {
  ToyPolicy base;
  std::vector<SymbolSequence> sft_data;
  std::vector<SymbolPair> pairs;
};

struct SyntheticTaskOptions {
  std::size_t vocab_size = 12;
  std::size_t n_pairs = 200;
  std::size_t group_size = 4;
  std::size_t max_len = 32;
  double end_bias = -1.0;  // logit offset of the end symbol in the base policy
  double logistic_midpoint = 8.0;
  double logistic_scale = 4.0;
  uint64_t seed = 7;
};

SyntheticTask MakeSyntheticTask(const SyntheticTaskOptions& options = {});

}  // namespace fusepipe
