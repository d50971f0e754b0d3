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

#include <sys/file.h>
#include <sys/wait.h>
#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fusepipe/config.h"
#include "fusepipe/jsonl.h"
#include "fusepipe/pipeline.h"
#include "test_support.h"

namespace fusepipe {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

const fs::path kFixtureConfig = fs::path(FUSEPIPE_FIXTURE_DIR) / "pipeline.yaml";

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

PipelineConfig FixtureConfig(const fs::path& workdir) {
  return LoadConfig(kFixtureConfig, [&](std::string_view name) -> std::optional<std::string> {
    if (name == "FUSEPIPE_FIXTURE_EXEC") return std::string(FUSEPIPE_FIXTURE_EXEC);
    if (name == "FUSEPIPE_WORKDIR") return workdir.string();
    return std::nullopt;
  });
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult Cli(const TempDir& dir, const std::string& args) {
  const auto log = dir / "cli.log";
  const std::string cmd = "FUSEPIPE_FIXTURE_EXEC='" + std::string(FUSEPIPE_FIXTURE_EXEC) + "' " +
                          std::string(FUSEPIPE_CLI) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = Slurp(log);
  return r;
}

// Relative path -> contents for every regular file under `root`.
std::map<std::string, std::string> Snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), root).string();
    if (rel == artifacts::kLock) continue;
    out[rel] = Slurp(entry.path());
  }
  return out;
}

int RunAllQuietly(const PipelineConfig& config, bool resume, std::string* log_text = nullptr) {
  std::ostringstream log, out;
  RunOptions options;
  options.resume = resume;
  options.log = &log;
  options.out = &out;
  const int code = RunAll(config, options);
  if (log_text) *log_text = log.str();
  return code;
}

TEST(CliTest, PairWithoutScoredPoolIsMissingPrerequisite) {
  TempDir dir;
  const auto r = Cli(dir, "--config '" + kFixtureConfig.string() + "' --workdir '" + (dir / "work").string() + "' pair");
  EXPECT_EQ(r.exit_code, kExitMissingPrerequisite) << r.output;
  EXPECT_NE(r.output.find("missing prerequisite"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("verified.jsonl"), std::string::npos) << r.output;
}

TEST(CliTest, GlobalOptionsAfterSubcommand) {
  TempDir dir;
  const auto r = Cli(dir, "pair --config '" + kFixtureConfig.string() + "' --workdir '" + (dir / "work").string() + "'");
  EXPECT_EQ(r.exit_code, kExitMissingPrerequisite) << r.output;
}

TEST(CliTest, InvalidConfigExitsThree) {
  TempDir dir;
  const auto cfg = dir / "bad.yaml";
  std::ofstream(cfg) << "corpus: x.jsonl\nworkdir: w\nbogus_key: 1\n";
  EXPECT_EQ(Cli(dir, "--config '" + cfg.string() + "' sample").exit_code, kExitConfigError);
  std::ofstream(cfg) << "corpus: x.jsonl\nworkdir: w\nendpoints: []\n";
  EXPECT_EQ(Cli(dir, "--config '" + cfg.string() + "' sample").exit_code, kExitConfigError);
  EXPECT_EQ(Cli(dir, "sample").exit_code, kExitConfigError);
}

TEST(CliTest, LossesCheckPrintsTable) {
  TempDir dir;
  const auto r = Cli(dir, "losses-check");
  EXPECT_EQ(r.exit_code, kExitOk) << r.output;
  EXPECT_NE(r.output.find("SFT NLL"), std::string::npos);
  EXPECT_NE(r.output.find("LN-DPO"), std::string::npos);
  EXPECT_EQ(r.output.find("FAIL"), std::string::npos);
}

TEST(CliTest, ValidateCorpus) {
  TempDir dir;
  const auto good = Cli(dir, "validate '" + (fs::path(FUSEPIPE_FIXTURE_DIR) / "prompts.jsonl").string() + "'");
  EXPECT_EQ(good.exit_code, 0) << good.output;
  EXPECT_EQ(Cli(dir, "validate /nonexistent/prompts.jsonl").exit_code, 2);
}

// The bundled 20-prompt run: artifacts, golden hashes, byte-identical reruns.
class FixtureRunTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    first_ = new TempDir;
    config_ = new PipelineConfig(FixtureConfig(first_->path() / "work"));
    ASSERT_EQ(RunAllQuietly(*config_, false), kExitOk);
  }
  static void TearDownTestSuite() {
    delete config_;
    delete first_;
  }
  static fs::path Work() { return first_->path() / "work"; }
  static TempDir* first_;
  static PipelineConfig* config_;
};
TempDir* FixtureRunTest::first_ = nullptr;
PipelineConfig* FixtureRunTest::config_ = nullptr;

TEST_F(FixtureRunTest, ProducesArtifacts) {
  for (auto name : {artifacts::kPool, artifacts::kScored, artifacts::kVerified, artifacts::kSft, artifacts::kDpo,
                    artifacts::kExclusions, artifacts::kSftFinal, artifacts::kDpoFinal, artifacts::kReportTxt,
                    artifacts::kReportJson, artifacts::kSftCheckpoint, artifacts::kDpoCheckpoint,
                    artifacts::kSftCurve, artifacts::kDpoCurve, artifacts::kDpoSummary, artifacts::kManifest}) {
    EXPECT_TRUE(fs::exists(Work() / name)) << name;
  }
  const auto report = nlohmann::json::parse(Slurp(Work() / artifacts::kReportJson));
  EXPECT_EQ(report["total"]["count"].get<int>(),
            report["total"]["sft"].get<int>() + report["total"]["dpo"].get<int>());
  const auto sft = ReadJsonl<SftRecord>(Work() / artifacts::kSftFinal).records;
  const auto dpo = ReadJsonl<DpoRecord>(Work() / artifacts::kDpoFinal).records;
  EXPECT_EQ(report["total"]["sft"].get<std::size_t>(), sft.size());
  EXPECT_EQ(report["total"]["dpo"].get<std::size_t>(), dpo.size());
  for (const auto& d : dpo) {
    EXPECT_NE(d.domain, Domain::kChinese);
    EXPECT_EQ(d.pair.chosen.source_model, d.pair.rejected.source_model);
  }
  const auto exclusions = ReadJsonl<ExclusionRecord>(Work() / artifacts::kExclusions).records;
  for (const auto& e : exclusions) {
    if (e.reason != ExclusionReason::kAllResponsesFailed) continue;
    for (const auto& s : sft) EXPECT_NE(s.prompt_id, e.prompt_id);
    for (const auto& d : dpo) EXPECT_NE(d.prompt_id, e.prompt_id);
  }
}

TEST_F(FixtureRunTest, PreferenceTrainingSeparatesPairs) {
  const auto summary = nlohmann::json::parse(Slurp(Work() / artifacts::kDpoSummary));
  EXPECT_GE(summary["final"]["fraction_positive"].get<double>(), 0.95);
  EXPECT_GT(summary["final"]["mean_preference_prob"].get<double>(),
            summary["post_sft"]["mean_preference_prob"].get<double>());
  const auto sft = nlohmann::json::parse(Slurp(Work() / artifacts::kSftCheckpoint));
  EXPECT_TRUE(sft["policy"]["sft_trained"].get<bool>());
}

TEST_F(FixtureRunTest, RerunInFreshWorkdirIsByteIdentical) {
  TempDir second;
  ASSERT_EQ(RunAllQuietly(FixtureConfig(second.path() / "work"), false), kExitOk);
  const auto a = Snapshot(Work());
  const auto b = Snapshot(second.path() / "work");
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, bytes] : a) {
    ASSERT_TRUE(b.count(name)) << name;
    EXPECT_TRUE(b.at(name) == bytes) << name << " differs";
  }
}

TEST_F(FixtureRunTest, GoldenHashes) {
  const auto manifest = nlohmann::json::parse(Slurp(Work() / artifacts::kManifest));
  std::map<std::string, std::string> hashes;
  for (const auto& [stage, entry] : manifest["stages"].items()) {
    for (const auto& [file, hash] : entry["outputs"].items()) hashes[file] = hash.get<std::string>();
  }
  EXPECT_EQ(hashes["sft_final.jsonl"], "5946517262b39871d6501d9b72cbb22725772f20ae441aaaaa22da916c8f0d39");
  EXPECT_EQ(hashes["dpo_final.jsonl"], "691a7c29d3cf5a542a920671eb7238d499f2a37fffecca95d4bf7600a709b113");
  EXPECT_EQ(hashes["report.json"], "b6d827d6d01317741b1efbd7ddc3d71b6ba908f3a13ada0b60bec23620de85c5");
}

TEST_F(FixtureRunTest, ResumeSkipsUpToDateStages) {
  const auto before = Snapshot(Work());
  std::string log;
  ASSERT_EQ(RunAllQuietly(*config_, true, &log), kExitOk) << log;
  for (Stage s : kPipelineOrder) {
    EXPECT_NE(log.find("[" + std::string(ToString(s)) + "] up to date, skipped"), std::string::npos) << log;
  }
  EXPECT_EQ(Snapshot(Work()), before);
}

TEST_F(FixtureRunTest, ChangedSettingsInvalidateDownstreamStages) {
  TempDir copy;
  fs::copy(Work(), copy.path() / "work", fs::copy_options::recursive);
  auto config = FixtureConfig(copy.path() / "work");
  config.split.seed = 1;
  std::string log;
  ASSERT_EQ(RunAllQuietly(config, true, &log), kExitOk) << log;
  EXPECT_NE(log.find("[pair] up to date, skipped"), std::string::npos);
  EXPECT_EQ(log.find("[split] up to date, skipped"), std::string::npos);
  EXPECT_EQ(log.find("[train-sft] up to date, skipped"), std::string::npos);
}

TEST_F(FixtureRunTest, TamperedOutputIsRebuilt) {
  TempDir copy;
  fs::copy(Work(), copy.path() / "work", fs::copy_options::recursive);
  std::ofstream(copy.path() / "work" / artifacts::kSft, std::ios::app) << "\n";
  std::string log;
  ASSERT_EQ(RunAllQuietly(FixtureConfig(copy.path() / "work"), true, &log), kExitOk) << log;
  EXPECT_EQ(log.find("[pair] up to date, skipped"), std::string::npos);
  EXPECT_EQ(Slurp(copy.path() / "work" / artifacts::kSft), Slurp(Work() / artifacts::kSft));
}

TEST_F(FixtureRunTest, CodingCorpusWithoutExecutorIsConfigError) {
  TempDir copy;
  fs::copy(Work(), copy.path() / "work", fs::copy_options::recursive);
  auto config = FixtureConfig(copy.path() / "work");
  config.executor.command_template.clear();
  config.executor.check_template.reset();
  ASSERT_TRUE(Validate(config).empty());
  std::ostringstream log, out;
  RunOptions options;
  options.log = &log;
  options.out = &out;
  EXPECT_EQ(RunStage(Stage::kVerify, config, options), kExitConfigError);
  EXPECT_NE(log.str().find("executor.command"), std::string::npos) << log.str();
}

TEST_F(FixtureRunTest, LockedWorkdirIsRefused) {
  const int fd = ::open((Work() / artifacts::kLock).c_str(), O_RDWR | O_CREAT, 0644);
  ASSERT_GE(fd, 0);
  ASSERT_EQ(::flock(fd, LOCK_EX | LOCK_NB), 0);
  std::ostringstream log;
  RunOptions options;
  options.log = &log;
  const int code = RunStage(Stage::kReport, *config_, options);
  ::flock(fd, LOCK_UN);
  ::close(fd);
  EXPECT_EQ(code, kExitFailure);
  EXPECT_NE(log.str().find("locked"), std::string::npos);
}

TEST(PipelineTest, MissingCorpusIsMissingPrerequisite) {
  TempDir dir;
  auto config = FixtureConfig(dir.path() / "work");
  config.corpus = dir.path() / "absent.jsonl";
  std::ostringstream log;
  RunOptions options;
  options.log = &log;
  EXPECT_EQ(RunStage(Stage::kSample, config, options), kExitMissingPrerequisite);
}

TEST(PipelineTest, TrainDpoWithoutSftPolicy) {
  TempDir dir;
  std::ostringstream log;
  RunOptions options;
  options.log = &log;
  EXPECT_EQ(RunStage(Stage::kTrainDpo, FixtureConfig(dir.path() / "work"), options), kExitMissingPrerequisite);
  EXPECT_NE(log.str().find("sft_policy.json"), std::string::npos) << log.str();
}

}  // namespace
}  // namespace fusepipe
