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

// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fusepipe/config.h"
#include "fusepipe/gradcheck.h"
#include "fusepipe/jsonl.h"
#include "fusepipe/losses.h"
#include "fusepipe/pairs.h"
#include "fusepipe/pipeline.h"
#include "fusepipe/split.h"
#include "fusepipe/trainer.h"
#include "test_support.h"

namespace fusepipe {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;

  void Require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

template <typename T>
std::string Serialize(const std::vector<T>& v) {
  return ToJsonl(std::span<const T>(v));
}

Outcome LossIdentities() {
  Outcome o;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ratio(-5.0, 5.0), logp(-50.0, -5.0);
  std::uniform_int_distribution<int64_t> len(1, 512);
  const double betas[] = {0.01, 0.5, 10.0};
  for (int i = 0; i < 1000; ++i) {
    PairLogProbs p;
    p.beta = betas[i % 3];
    const double pw = logp(rng), pl = logp(rng);
    p.chosen = {pw, pw, len(rng)};
    p.rejected = {pl, pl, len(rng)};
    o.Require(std::abs(DpoLoss(p).loss - std::numbers::ln2) <= 1e-12, "policy = reference is not ln 2");

    p.chosen.ref_logp = pw - ratio(rng);
    p.rejected.ref_logp = pl - ratio(rng);
    const double loss = DpoLoss(p).loss;
    const double prob = PreferenceProb(RewardMargin(p));
    o.Require(std::abs(prob - std::exp(-loss)) <= 1e-12 * std::exp(-loss), "sigmoid(margin) != exp(-loss)");

    const int64_t L = len(rng);
    p.chosen.length = p.rejected.length = L;
    auto scaled = p;
    scaled.beta = p.beta / static_cast<double>(L);
    o.Require(LnDpoLoss(p).loss == DpoLoss(scaled).loss, "LN-DPO at equal lengths != DPO(beta/L)");
  }
  return o;
}

Outcome GradientSuite() {
  Outcome o;
  const auto rows = RunGradientSuite();
  for (const auto& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s max rel error %.3g", r.name.c_str(), r.max_rel_error);
    o.Require(r.cases >= 1000 && r.pass(), buf);
  }
  o.Require(rows.size() == 3, "expected three objectives");
  return o;
}

// Criteria 3 and 4 share the randomized corpora.
struct OracleRuns {
  Outcome oracle;
  Outcome constraints;
};

OracleRuns PairingOracle() {
  OracleRuns out;
  std::mt19937_64 rng(2026);
  const GapFilter filter;
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = testing::MakeRandomCase(rng, 20);
    const auto got = BuildDataset(c.corpus, c.pool);
    const auto want = testing::OracleBuildDataset(c.corpus, c.pool);
    const std::string where = " (corpus " + std::to_string(trial) + ")";
    out.oracle.Require(Serialize(got.sft) == Serialize(want.sft), "SFT selections differ" + where);
    out.oracle.Require(Serialize(got.pairs) == Serialize(want.pairs), "pairs differ" + where);
    out.oracle.Require(Serialize(got.exclusions) == Serialize(want.exclusions), "exclusions differ" + where);

    std::map<std::string, Domain> domain;
    for (const auto& p : c.corpus) domain[p.id] = p.domain;
    for (const auto& p : got.pairs) {
      if (domain[p.prompt_id] == Domain::kInstructionFollowing) {
        out.constraints.Require(filter.Accepts(p.gap), "IF pair outside the gap range" + where);
      }
      out.constraints.Require(p.chosen.source_model == p.rejected.source_model &&
                                  p.source_model == p.chosen.source_model,
                              "cross-model pair" + where);
    }
    // Coding prompts whose responses all fail: excluded and nowhere else.
    std::map<std::string, std::pair<int, int>> coding;  // prompt -> (responses, correct)
    for (const auto& r : c.pool) {
      if (domain[r.prompt_id] != Domain::kCoding) continue;
      auto& [n, ok] = coding[r.prompt_id];
      ++n;
      ok += r.correctness == Correctness::kCorrect;
    }
    std::set<std::string> all_fail_excluded;
    for (const auto& e : got.exclusions) {
      if (e.reason == ExclusionReason::kAllResponsesFailed) all_fail_excluded.insert(e.prompt_id);
    }
    for (const auto& [id, counts] : coding) {
      const bool all_fail = counts.second == 0;
      out.constraints.Require(all_fail == (all_fail_excluded.count(id) == 1), "all-fail exclusion" + where);
      if (!all_fail) continue;
      for (const auto& s : got.sft) out.constraints.Require(s.prompt_id != id, "all-fail prompt in SFT" + where);
      for (const auto& p : got.pairs) out.constraints.Require(p.prompt_id != id, "all-fail prompt in DPO" + where);
    }
  }
  return out;
}

Outcome SplitConformance() {
  Outcome o;
  auto corpus_of = [](Domain d, int n) {
    std::vector<Prompt> corpus;
    std::vector<SftExample> sft;
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < n; ++i) {
      const std::string id = "p" + std::to_string(i);
      corpus.push_back(testing::MakePrompt(id, d));
      const auto best = testing::Response(id, "m", 0, 0.9);
      sft.push_back({id, best, ExpectedSelectionReason(d)});
      if (d != Domain::kChinese) pairs.push_back({id, "m", best, testing::Response(id, "m", 1, 0.85), 0.05});
    }
    return std::make_tuple(corpus, sft, pairs);
  };
  for (int n = 1; n <= 200; ++n) {
    for (uint64_t seed : {0ull, 1ull, 42ull}) {
      SplitConfig config;
      config.seed = seed;
      const auto [corpus, sft, pairs] = corpus_of(Domain::kInstructionFollowing, n);
      const auto split = Partition(corpus, sft, pairs, config);
      const auto expected = static_cast<std::size_t>((2 * n + 4) / 5);  // ceil(0.4 n)
      o.Require(split.sft.size() == expected, "IF n=" + std::to_string(n) + " SFT size");
      o.Require(split.sft.size() + split.dpo.size() == static_cast<std::size_t>(n), "IF coverage");
      o.Require(CheckConservation(ComposeReport(split.sft, split.dpo)).empty(), "report conservation");
    }
    const auto [corpus, sft, pairs] = corpus_of(Domain::kChinese, n);
    const auto split = Partition(corpus, sft, pairs);
    o.Require(split.dpo.empty(), "Chinese DPO entries");
  }
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = testing::MakeRandomCase(rng, 40);
    const auto build = BuildDataset(c.corpus, c.pool);
    const auto split = Partition(c.corpus, build.sft, build.pairs);
    o.Require(CheckConservation(ComposeReport(split.sft, split.dpo)).empty(), "random report conservation");
  }
  const auto table = ReportFromRows({
      {Domain::kInstructionFollowing, "UltraFeedback", 51098, 20439, 30659},
      {Domain::kInstructionFollowing, "Magpie-Pro-DPO", 20374, 8149, 12225},
      {Domain::kInstructionFollowing, "HelpSteer2", 9435, 3774, 5661},
      {Domain::kMathematics, "OpenMathInstruct-2", 51803, 40188, 11615},
      {Domain::kCoding, "LeetCode", 3113, 1877, 1236},
      {Domain::kCoding, "Self-Oss-Instruct-SC2", 12892, 10160, 2732},
      {Domain::kChinese, "Alpaca-GPT4-Zh", 2471, 2471, 0},
      {Domain::kChinese, "Magpie-Qwen2-Pro-Zh", 7481, 7481, 0},
  });
  o.Require(table.total_sft == 94539 && table.total_dpo == 64128 && table.total_count == 158667 &&
                CheckConservation(table).empty(),
            "published composition totals");
  return o;
}

Outcome EndToEnd() {
  Outcome o;
  auto config_for = [](const fs::path& work) {
    return LoadConfig(fs::path(FUSEPIPE_FIXTURE_DIR) / "pipeline.yaml",
                      [&](std::string_view name) -> std::optional<std::string> {
                        if (name == "FUSEPIPE_FIXTURE_EXEC") return std::string(FUSEPIPE_FIXTURE_EXEC);
                        if (name == "FUSEPIPE_WORKDIR") return work.string();
                        return std::nullopt;
                      });
  };
  testing::TempDir a, b;
  std::ostringstream log, out;
  RunOptions options;
  options.log = &log;
  options.out = &out;
  const int first = RunAll(config_for(a.path() / "work"), options);
  const int second = RunAll(config_for(b.path() / "work"), options);
  o.Require(first == kExitOk && second == kExitOk, "pipeline failed: " + log.str());
  if (!o.pass) return o;
  for (auto name : {artifacts::kSftFinal, artifacts::kDpoFinal, artifacts::kReportJson, artifacts::kSftCheckpoint,
                    artifacts::kDpoCheckpoint, artifacts::kDpoSummary, artifacts::kManifest}) {
    const auto pa = a.path() / "work" / name;
    o.Require(fs::exists(pa), std::string(name) + " missing");
    o.Require(Slurp(pa) == Slurp(b.path() / "work" / name), std::string(name) + " differs between runs");
  }
  const auto summary = nlohmann::json::parse(Slurp(a.path() / "work" / artifacts::kDpoSummary));
  const double fraction = summary["final"]["fraction_positive"].get<double>();
  const double before = summary["post_sft"]["mean_preference_prob"].get<double>();
  const double after = summary["final"]["mean_preference_prob"].get<double>();
  o.Require(fraction >= 0.95, "fraction of positive margins " + std::to_string(fraction));
  o.Require(after > before, "preference probability did not increase");
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d pairs, %.3f positive, preference prob %.4f -> %.4f",
                summary["pairs"].get<int>(), fraction, before, after);
  if (o.pass) o.detail = buf;
  return o;
}

Outcome LengthDirection() {
  Outcome o;
  const auto task = MakeSyntheticTask();
  const auto sft = TrainSft(task.base, task.sft_data, testing::SyntheticSftConfig());
  const auto dpo = TrainDpo(sft.policy, task.pairs, testing::SyntheticDpoConfig(LossType::kDpo));
  const auto ln = TrainDpo(sft.policy, task.pairs, testing::SyntheticDpoConfig(LossType::kLnDpo));
  const double dpo_len = MeanSampledLength(dpo.policy, 2000, 1, 32);
  const double ln_len = MeanSampledLength(ln.policy, 2000, 1, 32);
  char buf[128];
  std::snprintf(buf, sizeof buf, "mean length LN-DPO %.2f vs DPO %.2f", ln_len, dpo_len);
  o.Require(ln_len <= dpo_len, buf);
  if (o.pass) o.detail = buf;
  return o;
}

Outcome Schedule() {
  Outcome o;
  for (int64_t total : {10, 12, 250, 1000, 1237}) {
    const int64_t w = WarmupSteps(total, 0.1);
    o.Require(CosineLr(0, total, 0.1, 5e-6) == 0.0, "lr at step 0");
    o.Require(CosineLr(w, total, 0.1, 5e-6) == 5e-6, "lr at warmup end");
    o.Require(CosineLr(total, total, 0.1, 5e-6) == 0.0, "lr at final step");
  }
  o.Require(CheckpointSteps(250, 100) == std::vector<int64_t>{100, 200, 250}, "checkpoint steps 250/100");
  o.Require(CheckpointSteps(300, 100) == std::vector<int64_t>{100, 200, 300}, "checkpoint steps 300/100");
  const std::vector<double> losses = {0.2, 0.40, 0.35};
  o.Require(SelectCheckpoint(losses) == 2, "selection picks lower of last two");
  const std::vector<double> earlier = {0.2, 0.30, 0.35};
  o.Require(SelectCheckpoint(earlier) == 1, "selection picks lower of last two");

  // A real run: 250 updates, checkpoints every 100.
  const auto task = MakeSyntheticTask();
  auto base = task.base;
  base.set_sft_trained(true);
  std::vector<SymbolPair> pairs = task.pairs;
  pairs.insert(pairs.end(), task.pairs.begin(), task.pairs.begin() + 50);
  const auto r = TrainDpo(base, pairs, testing::SyntheticDpoConfig(LossType::kLnDpo));
  std::vector<int64_t> steps;
  for (const auto& c : r.checkpoints) steps.push_back(c.step);
  o.Require(steps == std::vector<int64_t>{100, 200, 250}, "trainer checkpoint steps");
  o.Require(r.selected == SelectCheckpoint(r.validation_losses) && r.selected >= 1, "trainer selection");
  return o;
}

int Main() {
  using Clock = std::chrono::steady_clock;
  int failures = 0;
  auto report = [&](int id, const char* name, double limit_s, const std::function<Outcome()>& run) {
    const auto start = Clock::now();
    Outcome o = run();
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (limit_s > 0 && secs >= limit_s) {
      o.pass = false;
      o.detail = "took " + std::to_string(secs) + " s, limit " + std::to_string(limit_s) + " s";
    }
    failures += !o.pass;
    std::printf("%s %d %s (%.2f s)%s%s\n", o.pass ? "PASS" : "FAIL", id, name, secs,
                o.detail.empty() ? "" : ": ", o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "loss identities", 1.0, LossIdentities);
  report(2, "gradient suite", 10.0, GradientSuite);
  OracleRuns oracle;
  report(3, "pairing oracle on 500 random corpora", 30.0, [&] {
    oracle = PairingOracle();
    return oracle.oracle;
  });
  report(4, "pair constraint conformance", 0.0, [&] { return oracle.constraints; });
  report(5, "split conformance", 0.0, SplitConformance);
  report(6, "end-to-end fixture run", 60.0, EndToEnd);
  report(7, "length-normalized preference direction", 0.0, LengthDirection);
  report(8, "schedule and checkpoints", 0.0, Schedule);
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace fusepipe

int main() { return fusepipe::Main(); }
