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

#include "fusepipe/trainer.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "fusepipe/errors.h"
#include "fusepipe/scoring.h"

namespace fusepipe {

namespace {

// Neumaier-compensated accumulator.
class Sum {
 public:
  void Add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

std::vector<std::size_t> Shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

void ThrowIfInvalid(const TrainConfig& c) {
  const auto problems = Validate(c);
  if (!problems.empty()) throw DomainError("invalid train config: " + problems.front());
}

void Descend(ToyPolicy& policy, std::span<const double> grad, double lr) {
  auto logits = policy.logits();
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] -= lr * grad[i];
  for (double l : logits) {
    if (!std::isfinite(l)) throw NumericError("non-finite logit after update", "lr=" + std::to_string(lr));
  }
}

}  // namespace

std::string_view ToString(TrainStage s) { return s == TrainStage::kSft ? "SFT" : "DPO"; }

TrainConfig TrainConfig::Defaults(TrainStage stage) {
  TrainConfig c;
  c.stage = stage;
  c.epochs = stage == TrainStage::kSft ? 3 : 1;
  return c;
}

std::vector<std::string> Validate(const TrainConfig& c) {
  std::vector<std::string> out;
  if (c.epochs <= 0) out.emplace_back("epochs must be positive");
  if (c.batch_size <= 0) out.emplace_back("batch_size must be positive");
  if (!(c.peak_lr > 0.0) || !std::isfinite(c.peak_lr)) out.emplace_back("peak_lr must be positive");
  if (!(c.warmup_ratio >= 0.0 && c.warmup_ratio < 1.0)) out.emplace_back("warmup_ratio must be in [0, 1)");
  if (!(c.beta > 0.0) || !std::isfinite(c.beta)) out.emplace_back("beta must be positive");
  if (c.checkpoint_every <= 0) out.emplace_back("checkpoint_every must be positive");
  if (c.max_seq_len == 0) out.emplace_back("max_seq_len must be positive");
  return out;
}

nlohmann::json ToJson(const TrainConfig& c) {
  return nlohmann::json{{"stage", ToString(c.stage)},
                        {"epochs", c.epochs},
                        {"batch_size", c.batch_size},
                        {"peak_lr", c.peak_lr},
                        {"warmup_ratio", c.warmup_ratio},
                        {"beta", c.beta},
                        {"loss_type", ToString(c.loss_type)},
                        {"checkpoint_every", c.checkpoint_every},
                        {"max_seq_len", c.max_seq_len},
                        {"seed", c.seed}};
}

int64_t WarmupSteps(int64_t total_steps, double warmup_ratio) {
  const double raw = warmup_ratio * static_cast<double>(total_steps);
  auto w = static_cast<int64_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  // Leave at least one step with a non-zero rate.
  return std::clamp<int64_t>(w, 0, std::max<int64_t>(total_steps - 1, 0));
}

double CosineLr(int64_t step, int64_t total_steps, double warmup_ratio, double peak_lr) {
  if (total_steps <= 0) throw DomainError("total_steps must be positive");
  if (step < 0 || step > total_steps) {
    throw DomainError("step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  }
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) throw DomainError("warmup_ratio must be in [0, 1)");
  if (!(peak_lr >= 0.0)) throw DomainError("peak_lr must be non-negative");
  if (step == total_steps) return 0.0;
  const int64_t warmup = WarmupSteps(total_steps, warmup_ratio);
  if (step < warmup) return peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return 0.5 * peak_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

int64_t TotalSteps(std::size_t n_examples, const TrainConfig& config) {
  ThrowIfInvalid(config);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  return static_cast<int64_t>(config.epochs) * static_cast<int64_t>((n_examples + batch - 1) / batch);
}

std::vector<int64_t> CheckpointSteps(int64_t total_steps, int every) {
  if (total_steps <= 0 || every <= 0) throw DomainError("checkpoint schedule needs positive arguments");
  std::vector<int64_t> out;
  for (int64_t s = every; s < total_steps; s += every) out.push_back(s);
  out.push_back(total_steps);
  return out;
}

std::string CurveToCsv(std::span<const CurvePoint> curve) {
  std::ostringstream os;
  os.precision(17);
  os << "step,lr,loss,mean_margin\n";
  for (const auto& p : curve) {
    os << p.step << ',' << p.lr << ',' << p.loss << ',';
    if (p.mean_margin) os << *p.mean_margin;
    os << '\n';
  }
  return os.str();
}

double MeanSequenceNll(const ToyPolicy& policy, std::span<const SymbolSequence> data) {
  if (data.empty()) throw DomainError("empty dataset");
  Sum total;
  for (const auto& seq : data) total.Add(SftNll(policy.TokenLogProbs(seq)));
  return total.value() / static_cast<double>(data.size());
}

std::vector<double> SftGradient(const ToyPolicy& policy, std::span<const SymbolSequence> data) {
  if (data.empty()) throw DomainError("empty dataset");
  std::vector<double> grad(policy.logits().size(), 0.0);
  const double w = -1.0 / static_cast<double>(data.size());
  for (const auto& seq : data) policy.AccumulateSequenceGrad(seq, w, grad);
  return grad;
}

SftResult TrainSft(ToyPolicy policy, std::span<const SymbolSequence> data, const TrainConfig& config) {
  ThrowIfInvalid(config);
  if (data.empty()) throw DomainError("SFT dataset is empty");
  for (const auto& seq : data) {
    policy.CheckSequence(seq);
    if (seq.size() > config.max_seq_len) throw DomainError("sequence longer than max_seq_len");
  }
  SftResult result;
  result.initial_nll = MeanSequenceNll(policy, data);
  const int64_t total = TotalSteps(data.size(), config);
  const auto ckpts = CheckpointSteps(total, config.checkpoint_every);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::mt19937_64 rng(config.seed);
  int64_t step = 0;
  std::vector<SymbolSequence> chunk;
  for (int e = 0; e < config.epochs; ++e) {
    const auto order = Shuffled(data.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      chunk.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) chunk.push_back(data[order[i]]);
      const double lr = CosineLr(step, total, config.warmup_ratio, config.peak_lr);
      const double loss = MeanSequenceNll(policy, chunk);
      Descend(policy, SftGradient(policy, chunk), lr);
      ++step;
      result.curve.push_back({step, lr, loss, std::nullopt});
      if (std::binary_search(ckpts.begin(), ckpts.end(), step)) {
        policy.set_sft_trained(true);
        result.checkpoints.push_back({step, policy});
      }
    }
  }
  policy.set_sft_trained(true);
  result.final_nll = MeanSequenceNll(policy, data);
  result.policy = std::move(policy);
  return result;
}

PairLogProbs PairInputs(const ToyPolicy& policy, const ToyPolicy& reference, const SymbolPair& pair,
                        double beta) {
  PairLogProbs in;
  in.beta = beta;
  in.chosen = {policy.SequenceLogProb(pair.chosen), reference.SequenceLogProb(pair.chosen),
               static_cast<int64_t>(pair.chosen.size())};
  in.rejected = {policy.SequenceLogProb(pair.rejected), reference.SequenceLogProb(pair.rejected),
                 static_cast<int64_t>(pair.rejected.size())};
  return in;
}

double PreferenceBatchLoss(const ToyPolicy& policy, const ToyPolicy& reference,
                           std::span<const SymbolPair> pairs, double beta, LossType type,
                           std::vector<double>* grad) {
  if (pairs.empty()) throw DomainError("empty pair set");
  if (grad) grad->assign(policy.logits().size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  Sum total;
  for (const auto& p : pairs) {
    const auto r = PreferenceLoss(PairInputs(policy, reference, p, beta), type);
    total.Add(r.loss);
    // Identical sequences contribute exactly opposite terms.
    if (grad && p.chosen != p.rejected) {
      policy.AccumulateSequenceGrad(p.chosen, r.grad.chosen_policy * inv_n, *grad);
      policy.AccumulateSequenceGrad(p.rejected, r.grad.rejected_policy * inv_n, *grad);
    }
  }
  return total.value() * inv_n;
}

MarginStats EvaluatePairs(const ToyPolicy& policy, const ToyPolicy& reference,
                          std::span<const SymbolPair> pairs, double beta, LossType type) {
  if (pairs.empty()) throw DomainError("empty pair set");
  Sum margin, prob, loss;
  std::size_t positive = 0;
  for (const auto& p : pairs) {
    const auto in = PairInputs(policy, reference, p, beta);
    const double m = Margin(in, type);
    margin.Add(m);
    prob.Add(PreferenceProb(m));
    loss.Add(PreferenceLoss(in, type).loss);
    if (m > 0.0) ++positive;
  }
  const auto n = static_cast<double>(pairs.size());
  return {margin.value() / n, static_cast<double>(positive) / n, prob.value() / n, loss.value() / n};
}

std::size_t SelectCheckpoint(std::span<const double> validation_losses) {
  if (validation_losses.empty()) throw DomainError("no checkpoints to select from");
  const std::size_t last = validation_losses.size() - 1;
  if (last == 0) return 0;
  return validation_losses[last - 1] < validation_losses[last] ? last - 1 : last;
}

DpoResult TrainDpo(const ToyPolicy& policy_init, std::span<const SymbolPair> pairs,
                   const TrainConfig& config, const DpoOptions& options) {
  ThrowIfInvalid(config);
  if (pairs.empty()) throw DomainError("DPO pair set is empty");
  if (!policy_init.sft_trained() && !options.allow_unsft_reference) {
    throw DomainError("reference policy was never SFT-trained");
  }
  for (const auto& p : pairs) {
    policy_init.CheckSequence(p.chosen);
    policy_init.CheckSequence(p.rejected);
    if (p.chosen.size() > config.max_seq_len || p.rejected.size() > config.max_seq_len) {
      throw DomainError("sequence longer than max_seq_len");
    }
  }
  DpoResult result;
  result.reference = policy_init;
  ToyPolicy policy = policy_init;
  const int64_t total = TotalSteps(pairs.size(), config);
  const auto ckpts = CheckpointSteps(total, config.checkpoint_every);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::mt19937_64 rng(config.seed);
  std::vector<double> grad;
  std::vector<SymbolPair> chunk;
  int64_t step = 0;
  for (int e = 0; e < config.epochs; ++e) {
    const auto order = Shuffled(pairs.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      chunk.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) chunk.push_back(pairs[order[i]]);
      const double lr = CosineLr(step, total, config.warmup_ratio, config.peak_lr);
      const double loss =
          PreferenceBatchLoss(policy, result.reference, chunk, config.beta, config.loss_type, &grad);
      Sum margin;
      for (const auto& p : chunk) {
        margin.Add(Margin(PairInputs(policy, result.reference, p, config.beta), config.loss_type));
      }
      Descend(policy, grad, lr);
      ++step;
      result.curve.push_back({step, lr, loss, margin.value() / static_cast<double>(chunk.size())});
      if (std::binary_search(ckpts.begin(), ckpts.end(), step)) result.checkpoints.push_back({step, policy});
    }
  }
  const auto validation = options.validation_pairs.empty() ? pairs : options.validation_pairs;
  for (const auto& c : result.checkpoints) {
    result.validation_losses.push_back(
        EvaluatePairs(c.policy, result.reference, validation, config.beta, config.loss_type).mean_loss);
  }
  result.selected = SelectCheckpoint(result.validation_losses);
  result.policy = result.checkpoints[result.selected].policy;
  return result;
}

double MeanSampledLength(const ToyPolicy& policy, std::size_t samples, uint64_t seed, std::size_t max_len) {
  if (samples == 0) throw DomainError("samples must be positive");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < samples; ++i) total += static_cast<double>(policy.Sample(rng, max_len).size());
  return total / static_cast<double>(samples);
}

SyntheticTask MakeSyntheticTask(const SyntheticTaskOptions& o) {
  if (o.group_size < 2) throw DomainError("group_size must be at least 2");
  std::vector<std::string> vocab = {"<s>", "</s>", "<unk>"};
  for (std::size_t i = 3; i < o.vocab_size; ++i) vocab.push_back("w" + std::to_string(i));
  SyntheticTask task{ToyPolicy(vocab), {}, {}};
  std::mt19937_64 rng(o.seed);
  task.base.RandomizeLogits(rng, 1.0);
  for (std::size_t r = 0; r < o.vocab_size; ++r) {
    const int row = static_cast<int>(r);
    task.base.set_logit(row, ToyPolicy::kEnd, task.base.logit(row, ToyPolicy::kEnd) + o.end_bias);
  }
  const auto score = [&](const SymbolSequence& s) {
    return LengthLogisticScore(static_cast<int64_t>(s.size()), o.logistic_midpoint, o.logistic_scale);
  };
  while (task.pairs.size() < o.n_pairs) {
    std::vector<SymbolSequence> group;
    for (std::size_t g = 0; g < o.group_size; ++g) group.push_back(task.base.Sample(rng, o.max_len));
    const auto [lo, hi] = std::minmax_element(group.begin(), group.end(), [&](const auto& a, const auto& b) {
      return score(a) < score(b);
    });
    // Groups without a strict score gap carry no preference.
    if (score(*hi) > score(*lo)) {
      task.sft_data.push_back(*hi);
      task.pairs.push_back({*hi, *lo});
    }
  }
  return task;
}

}  // namespace fusepipe
