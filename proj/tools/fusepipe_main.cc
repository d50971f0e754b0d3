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

// Command-line front end for the pipeline stages.

#include <csignal>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fusepipe/config.h"
#include "fusepipe/errors.h"
#include "fusepipe/jsonl.h"
#include "fusepipe/mock_server.h"
#include "fusepipe/pipeline.h"

namespace {

struct GlobalFlags {
  std::string config;
  std::string workdir;
  std::optional<int> parallelism;
  std::optional<uint64_t> seed;
  bool resume = false;
  bool no_resume = false;
};

fusepipe::MockServer* g_server = nullptr;

void StopServer(int) {
  if (g_server) g_server->Stop();
}

int LoadAndRun(const GlobalFlags& flags, const std::optional<fusepipe::Stage>& stage) {
  fusepipe::PipelineConfig config;
  if (!flags.config.empty()) {
    try {
      config = fusepipe::LoadConfig(flags.config);
    } catch (const fusepipe::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return fusepipe::kExitConfigError;
    }
  } else if (!stage || *stage != fusepipe::Stage::kLossesCheck) {
    std::cerr << "config error: --config is required\n";
    return fusepipe::kExitConfigError;
  }
  if (!flags.workdir.empty()) {
    const bool derived_exec = config.executor.workdir == config.workdir / "exec";
    config.workdir = flags.workdir;
    if (derived_exec || config.executor.workdir.empty()) config.executor.workdir = config.workdir / "exec";
  }
  if (flags.parallelism) config.parallelism = *flags.parallelism;
  if (flags.seed) {
    config.split.seed = *flags.seed;
    config.train_sft.seed = *flags.seed;
    config.train_dpo.seed = *flags.seed;
  }
  fusepipe::RunOptions options;
  if (!stage) {
    options.resume = !flags.no_resume;
    return fusepipe::RunAll(config, options);
  }
  options.resume = flags.resume;
  return fusepipe::RunStage(*stage, config, options);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fusepipe: preference-data construction and toy SFT/DPO training"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags flags;
  app.add_option("--config", flags.config, "Pipeline config (YAML)");
  app.add_option("--workdir", flags.workdir, "Override the workdir from the config");
  app.add_option("--parallelism", flags.parallelism, "Worker threads per stage")->check(CLI::PositiveNumber);
  app.add_option("--seed", flags.seed, "Seed for the split and both training stages");

  int exit_code = 0;
  for (auto stage : {fusepipe::Stage::kSample, fusepipe::Stage::kScore, fusepipe::Stage::kVerify,
                     fusepipe::Stage::kPair, fusepipe::Stage::kSplit, fusepipe::Stage::kReport,
                     fusepipe::Stage::kTrainSft, fusepipe::Stage::kTrainDpo, fusepipe::Stage::kLossesCheck}) {
    auto* sub = app.add_subcommand(std::string(fusepipe::ToString(stage)), "Run the " +
                                                                              std::string(fusepipe::ToString(stage)) +
                                                                              " stage");
    if (stage != fusepipe::Stage::kLossesCheck) {
      sub->add_flag("--resume", flags.resume, "Skip the stage when its inputs are unchanged");
    }
    sub->callback([&, stage] { exit_code = LoadAndRun(flags, stage); });
  }

  auto* all = app.add_subcommand("all", "Run every stage in order (resumes by default)");
  all->add_flag("--no-resume", flags.no_resume, "Rerun every stage");
  all->callback([&] { exit_code = LoadAndRun(flags, std::nullopt); });

  std::string corpus;
  auto* validate = app.add_subcommand("validate", "Check a prompt corpus and print a JSON report");
  validate->add_option("corpus", corpus, "Corpus JSONL file")->required();
  validate->callback([&] {
    try {
      const auto report = fusepipe::ValidateCorpus(corpus);
      std::cout << fusepipe::ToJson(report).dump(2) << "\n";
      exit_code = report.violations.empty() ? fusepipe::kExitOk : fusepipe::kExitFailure;
    } catch (const fusepipe::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      exit_code = fusepipe::kExitMissingPrerequisite;
    }
  });

  std::string host = "127.0.0.1";
  int port = 8089;
  auto* mock = app.add_subcommand("mock-server", "Serve the deterministic mock model and reward endpoints");
  mock->add_option("--host", host, "Bind address");
  mock->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  mock->callback([&] {
    fusepipe::MockServer server;
    g_server = &server;
    std::signal(SIGINT, StopServer);
    std::signal(SIGTERM, StopServer);
    std::cerr << "mock server on http://" << host << ":" << port << "\n";
    try {
      server.Run(host, port);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      exit_code = fusepipe::kExitFailure;
    }
    g_server = nullptr;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  return exit_code;
}
