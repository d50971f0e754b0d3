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

#include "fusepipe/pipeline.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <openssl/evp.h>

#include "fusepipe/errors.h"
#include "fusepipe/gradcheck.h"
#include "fusepipe/jsonl.h"
#include "fusepipe/mock_server.h"
#include "fusepipe/pairs.h"
#include "fusepipe/split.h"
#include "fusepipe/trainer.h"
#include "fusepipe/verification.h"

namespace fusepipe {

namespace fs = std::filesystem;

namespace {

constexpr std::pair<Stage, std::string_view> kStageNames[] = {
    {Stage::kSample, "sample"},       {Stage::kScore, "score"},         {Stage::kVerify, "verify"},
    {Stage::kPair, "pair"},           {Stage::kSplit, "split"},         {Stage::kReport, "report"},
    {Stage::kTrainSft, "train-sft"},  {Stage::kTrainDpo, "train-dpo"},  {Stage::kLossesCheck, "losses-check"},
};

std::string Sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return os.str();
}

// Exclusive advisory lock on the workdir, released on destruction.
class WorkdirLock {
 public:
  explicit WorkdirLock(const fs::path& workdir) {
    fs::create_directories(workdir);
    const auto path = workdir / artifacts::kLock;
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error("workdir " + workdir.string() + " is locked by another run");
    }
  }
  ~WorkdirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  int fd_ = -1;
};

struct Context {
  const PipelineConfig& config;
  const RunOptions& options;
  std::ostream& log;
  std::ostream& out;
  std::unique_ptr<MockServer> mock;

  fs::path Path(std::string_view name) const { return config.workdir / name; }

  std::string Require(std::string_view name) const {
    const auto p = Path(name);
    if (!fs::exists(p)) throw MissingArtifactError(p.string());
    return ReadFile(p);
  }

  std::string MockUrl() {
    if (!mock) {
      mock = std::make_unique<MockServer>();
      mock->Start();
    }
    return mock->base_url();
  }

  std::string Resolve(const std::string& url) { return url == kMockUrl ? MockUrl() : url; }
};

template <typename T>
std::vector<T> ParseStrict(const std::string& text, const fs::path& path) {
  auto r = ParseJsonl<T>(text);
  if (!r.issues.empty()) {
    throw FormatError(path.string() + ":" + std::to_string(r.issues.front().line) + ": " + r.issues.front().message);
  }
  return std::move(r.records);
}

std::vector<Prompt> LoadCorpus(const Context& ctx, std::string& text) {
  if (!fs::exists(ctx.config.corpus)) throw MissingArtifactError(ctx.config.corpus.string());
  text = ReadFile(ctx.config.corpus);
  const auto report = ValidateCorpusText(text);
  if (!report.violations.empty()) {
    const auto& v = report.violations.front();
    throw FormatError(ctx.config.corpus.string() + ":" + std::to_string(v.line) + ": " + v.message + " (" +
                      std::to_string(report.violations.size()) + " violation(s))");
  }
  return ParseStrict<Prompt>(text, ctx.config.corpus);
}

nlohmann::json EndpointsJson(const PipelineConfig& c) {
  auto arr = nlohmann::json::array();
  for (const auto& e : c.endpoints) {
    arr.push_back({{"model_id", e.model_id},
                   {"base_url", e.base_url},
                   {"family", ToString(e.family)},
                   {"chinese_specialist", e.chinese_specialist},
                   {"math_only", e.math_only}});
  }
  auto overrides = nlohmann::json::array();
  for (const auto& [key, p] : c.profile_overrides) {
    overrides.push_back({{"model_id", key.first},
                         {"domain", ToString(key.second)},
                         {"temperature", p.temperature},
                         {"top_p", p.top_p},
                         {"repetition_penalty", p.repetition_penalty},
                         {"n_samples", p.n_samples}});
  }
  return {{"endpoints", arr},
          {"overrides", overrides},
          {"max_tokens", c.sampling.max_tokens ? nlohmann::json(*c.sampling.max_tokens) : nlohmann::json()}};
}

nlohmann::json StageSettings(Stage stage, const PipelineConfig& c) {
  switch (stage) {
    case Stage::kSample: return EndpointsJson(c);
    case Stage::kScore:
      return {{"kind", ToString(c.scorer.kind)},
              {"base_url", c.scorer.base_url.value_or("")},
              {"formula", ToString(c.scorer.stub_formula)},
              {"midpoint", c.scorer.logistic_midpoint},
              {"scale", c.scorer.logistic_scale}};
    case Stage::kVerify:
      return {{"command", c.executor.command_template},
              {"check", c.executor.check_template.value_or("")},
              {"timeout_ms", c.executor.sandbox_timeout_ms},
              {"source_filename", c.executor.source_filename}};
    case Stage::kPair:
      return {{"min_gap", c.pairs.gap_filter.min_gap},
              {"max_gap", c.pairs.gap_filter.max_gap},
              {"all_domains", c.pairs.gap_filter_all_domains},
              {"keep_all", c.pairs.keep_all_model_pairs}};
    case Stage::kSplit:
      return {{"fraction", c.split.if_sft_fraction},
              {"seed", c.split.seed},
              {"math_dpo_requires_pair", c.split.math_dpo_requires_pair}};
    case Stage::kTrainSft: return {{"vocab_size", c.vocab_size}, {"train", ToJson(c.train_sft)}};
    case Stage::kTrainDpo: return {{"train", ToJson(c.train_dpo)}};
    default: return nlohmann::json::object();
  }
}

std::vector<std::string> StageInputs(Stage stage) {
  namespace a = artifacts;
  switch (stage) {
    case Stage::kSample: return {};
    case Stage::kScore: return {std::string(a::kPool)};
    case Stage::kVerify: return {std::string(a::kScored)};
    case Stage::kPair: return {std::string(a::kVerified)};
    case Stage::kSplit: return {std::string(a::kSft), std::string(a::kDpo)};
    case Stage::kReport: return {std::string(a::kSftFinal), std::string(a::kDpoFinal)};
    case Stage::kTrainSft: return {std::string(a::kSftFinal), std::string(a::kDpoFinal)};
    case Stage::kTrainDpo: return {std::string(a::kSftCheckpoint), std::string(a::kDpoFinal)};
    default: return {};
  }
}

bool UsesCorpus(Stage stage) {
  return stage == Stage::kSample || stage == Stage::kScore || stage == Stage::kVerify ||
         stage == Stage::kPair || stage == Stage::kSplit;
}

// Hash over the stage name, its settings and the bytes of its inputs. Throws
// MissingArtifactError when an input is absent.
std::string InputHash(Stage stage, const Context& ctx) {
  std::string material(ToString(stage));
  material += '\n';
  material += StageSettings(stage, ctx.config).dump();
  material += '\n';
  if (UsesCorpus(stage)) {
    if (!fs::exists(ctx.config.corpus)) throw MissingArtifactError(ctx.config.corpus.string());
    material += Sha256Hex(ReadFile(ctx.config.corpus));
    material += '\n';
  }
  for (const auto& name : StageInputs(stage)) {
    material += name + "=" + Sha256Hex(ctx.Require(name)) + "\n";
  }
  return Sha256Hex(material);
}

nlohmann::json LoadManifest(const Context& ctx) {
  const auto p = ctx.Path(artifacts::kManifest);
  if (!fs::exists(p)) return {{"schema", kSchemaVersion}, {"stages", nlohmann::json::object()}};
  try {
    auto j = nlohmann::json::parse(ReadFile(p));
    if (!j.contains("stages") || !j["stages"].is_object()) j["stages"] = nlohmann::json::object();
    return j;
  } catch (const nlohmann::json::exception&) {
    return {{"schema", kSchemaVersion}, {"stages", nlohmann::json::object()}};
  }
}

bool UpToDate(const Context& ctx, Stage stage, const std::string& input_hash) {
  const auto manifest = LoadManifest(ctx);
  const auto key = std::string(ToString(stage));
  if (!manifest["stages"].contains(key)) return false;
  const auto& entry = manifest["stages"][key];
  if (entry.value("input_hash", std::string()) != input_hash) return false;
  const auto outputs = entry.value("outputs", nlohmann::json::object());
  for (const auto& [name, hash] : outputs.items()) {
    const auto p = ctx.Path(name);
    if (!fs::exists(p) || Sha256Hex(ReadFile(p)) != hash.get<std::string>()) return false;
  }
  return true;
}

void RecordStage(const Context& ctx, Stage stage, const std::string& input_hash,
                 const std::vector<std::string>& outputs) {
  auto manifest = LoadManifest(ctx);
  nlohmann::json outs = nlohmann::json::object();
  for (const auto& name : outputs) outs[name] = Sha256Hex(ReadFile(ctx.Path(name)));
  manifest["schema"] = kSchemaVersion;
  manifest["stages"][std::string(ToString(stage))] = {{"input_hash", input_hash}, {"outputs", outs}};
  WriteFileAtomic(ctx.Path(artifacts::kManifest), manifest.dump(2) + "\n");
}

void WriteJson(const fs::path& path, const nlohmann::json& j) { WriteFileAtomic(path, j.dump(2) + "\n"); }

std::vector<std::string> RunSample(Context& ctx) {
  std::string text;
  const auto corpus = LoadCorpus(ctx, text);
  auto endpoints = ctx.config.endpoints;
  for (auto& e : endpoints) e.base_url = ctx.Resolve(e.base_url);
  std::unique_ptr<ChatClient> owned;
  ChatClient* client = ctx.options.chat_client;
  if (!client) {
    owned = MakeHttpChatClient();
    client = owned.get();
  }
  auto options = ctx.config.sampling;
  options.parallelism = ctx.config.parallelism;
  const auto pool = SamplePool(corpus, endpoints, *client, ctx.config.profile_overrides, options);
  WriteJsonl(ctx.Path(artifacts::kPool), pool.responses);
  WriteJsonl(ctx.Path(artifacts::kSampleFailures), pool.failures);
  ctx.log << "[sample] " << pool.responses.size() << " responses, " << pool.failures.size()
          << " failed requests\n";
  return {std::string(artifacts::kPool), std::string(artifacts::kSampleFailures)};
}

std::vector<std::string> RunScore(Context& ctx) {
  std::string text;
  const auto corpus = LoadCorpus(ctx, text);
  const auto pool = ParseStrict<ScoredResponse>(ctx.Require(artifacts::kPool), ctx.Path(artifacts::kPool));
  std::map<std::string, std::string, std::less<>> prompt_text;
  for (const auto& p : corpus) prompt_text.emplace(p.id, p.text);
  auto binding = ctx.config.scorer;
  if (binding.base_url) binding.base_url = ctx.Resolve(*binding.base_url);
  const auto scored = ScorePool(
      pool, binding, ctx.config.parallelism,
      [&](std::string_view id) -> std::optional<std::string> {
        auto it = prompt_text.find(id);
        if (it == prompt_text.end()) return std::nullopt;
        return it->second;
      },
      ctx.options.reward_client);
  WriteJsonl(ctx.Path(artifacts::kScored), scored.responses);
  WriteJsonl(ctx.Path(artifacts::kScoreFailures), scored.failures);
  ctx.log << "[score] " << scored.responses.size() << " scored, " << scored.failures.size() << " unscorable\n";
  return {std::string(artifacts::kScored), std::string(artifacts::kScoreFailures)};
}

std::vector<std::string> RunVerify(Context& ctx) {
  std::string text;
  const auto corpus = LoadCorpus(ctx, text);
  const auto pool = ParseStrict<ScoredResponse>(ctx.Require(artifacts::kScored), ctx.Path(artifacts::kScored));
  const bool has_coding = std::any_of(corpus.begin(), corpus.end(), [](const Prompt& p) { return p.domain == Domain::kCoding; });
  if (has_coding && ctx.config.executor.command_template.empty()) {
    throw ConfigError("executor.command is required for Coding prompts");
  }
  fs::create_directories(ctx.config.executor.workdir);
  const auto verified = AnnotateCorrectness(pool, corpus, ctx.config.executor, ctx.config.parallelism);
  WriteJsonl(ctx.Path(artifacts::kVerified), verified);
  std::size_t correct = 0;
  for (const auto& r : verified) correct += r.correctness == Correctness::kCorrect;
  ctx.log << "[verify] " << verified.size() << " responses, " << correct << " correct\n";
  return {std::string(artifacts::kVerified)};
}

std::vector<std::string> RunPair(Context& ctx) {
  std::string text;
  const auto corpus = LoadCorpus(ctx, text);
  const auto pool =
      ParseStrict<ScoredResponse>(ctx.Require(artifacts::kVerified), ctx.Path(artifacts::kVerified));
  const auto build = BuildDataset(corpus, pool, ctx.config.pairs);
  WriteJsonl(ctx.Path(artifacts::kSft), build.sft);
  WriteJsonl(ctx.Path(artifacts::kDpo), build.pairs);
  WriteJsonl(ctx.Path(artifacts::kExclusions), build.exclusions);
  ctx.log << "[pair] " << build.sft.size() << " SFT examples, " << build.pairs.size() << " pairs, "
          << build.exclusions.size() << " exclusions\n";
  return {std::string(artifacts::kSft), std::string(artifacts::kDpo), std::string(artifacts::kExclusions)};
}

std::vector<std::string> RunSplit(Context& ctx) {
  std::string text;
  const auto corpus = LoadCorpus(ctx, text);
  const auto sft = ParseStrict<SftExample>(ctx.Require(artifacts::kSft), ctx.Path(artifacts::kSft));
  const auto pairs = ParseStrict<PreferencePair>(ctx.Require(artifacts::kDpo), ctx.Path(artifacts::kDpo));
  const auto split = Partition(corpus, sft, pairs, ctx.config.split);
  WriteJsonl(ctx.Path(artifacts::kSftFinal), split.sft);
  WriteJsonl(ctx.Path(artifacts::kDpoFinal), split.dpo);
  ctx.log << "[split] " << split.sft.size() << " SFT, " << split.dpo.size() << " DPO\n";
  return {std::string(artifacts::kSftFinal), std::string(artifacts::kDpoFinal)};
}

std::vector<std::string> RunReport(Context& ctx) {
  const auto sft = ParseStrict<SftRecord>(ctx.Require(artifacts::kSftFinal), ctx.Path(artifacts::kSftFinal));
  const auto dpo = ParseStrict<DpoRecord>(ctx.Require(artifacts::kDpoFinal), ctx.Path(artifacts::kDpoFinal));
  const auto report = ComposeReport(sft, dpo);
  if (const auto bad = CheckConservation(report); !bad.empty()) {
    throw Error("composition report does not add up: " + bad.front());
  }
  const auto rendered = RenderReportText(report);
  WriteFileAtomic(ctx.Path(artifacts::kReportTxt), rendered);
  WriteJson(ctx.Path(artifacts::kReportJson), ReportToJson(report));
  ctx.out << rendered;
  return {std::string(artifacts::kReportTxt), std::string(artifacts::kReportJson)};
}

nlohmann::json CheckpointJson(TrainStage stage, int64_t step, const TrainConfig& config, const ToyPolicy& p) {
  return {{"stage", ToString(stage)}, {"step", step}, {"config", ToJson(config)}, {"policy", PolicyToJson(p)}};
}

// Writes checkpoint files for one stage, replacing those of earlier runs.
std::vector<std::string> WriteCheckpoints(const Context& ctx, TrainStage stage, const TrainConfig& config,
                                          std::span<const Checkpoint> checkpoints) {
  const auto dir = ctx.Path(artifacts::kCheckpointDir);
  fs::create_directories(dir);
  const std::string prefix = stage == TrainStage::kSft ? "sft_step_" : "dpo_step_";
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().filename().string().starts_with(prefix)) fs::remove(entry.path());
  }
  std::vector<std::string> names;
  for (const auto& c : checkpoints) {
    std::ostringstream name;
    name << artifacts::kCheckpointDir << '/' << prefix << std::setw(6) << std::setfill('0') << c.step << ".json";
    WriteJson(ctx.Path(name.str()), CheckpointJson(stage, c.step, config, c.policy));
    names.push_back(name.str());
  }
  return names;
}

std::vector<std::string> RunTrainSft(Context& ctx) {
  const auto sft = ParseStrict<SftRecord>(ctx.Require(artifacts::kSftFinal), ctx.Path(artifacts::kSftFinal));
  const auto dpo = ParseStrict<DpoRecord>(ctx.Require(artifacts::kDpoFinal), ctx.Path(artifacts::kDpoFinal));
  std::vector<std::string> texts;
  for (const auto& r : sft) texts.push_back(r.response.text);
  for (const auto& r : dpo) {
    texts.push_back(r.pair.chosen.text);
    texts.push_back(r.pair.rejected.text);
  }
  const auto renderer = SymbolRenderer::FromTexts(texts, ctx.config.vocab_size);
  const auto& cfg = ctx.config.train_sft;
  std::vector<SymbolSequence> data;
  for (const auto& r : sft) data.push_back(renderer.Render(r.response.text, cfg.max_seq_len));
  if (data.empty()) throw DomainError("no SFT records to train on");
  auto result = TrainSft(ToyPolicy(renderer.vocab()), data, cfg);
  const int64_t steps = result.curve.empty() ? 0 : result.curve.back().step;
  WriteJson(ctx.Path(artifacts::kSftCheckpoint), CheckpointJson(TrainStage::kSft, steps, cfg, result.policy));
  WriteFileAtomic(ctx.Path(artifacts::kSftCurve), CurveToCsv(result.curve));
  auto outputs = WriteCheckpoints(ctx, TrainStage::kSft, cfg, result.checkpoints);
  outputs.insert(outputs.begin(), {std::string(artifacts::kSftCheckpoint), std::string(artifacts::kSftCurve)});
  ctx.log << "[train-sft] " << data.size() << " sequences, " << steps << " steps, NLL "
          << result.initial_nll << " -> " << result.final_nll << "\n";
  return outputs;
}

nlohmann::json StatsJson(const MarginStats& s) {
  return {{"mean_margin", s.mean_margin},
          {"fraction_positive", s.fraction_positive},
          {"mean_preference_prob", s.mean_preference_prob},
          {"mean_loss", s.mean_loss}};
}

std::vector<std::string> RunTrainDpo(Context& ctx) {
  const auto ckpt = nlohmann::json::parse(ctx.Require(artifacts::kSftCheckpoint));
  const auto init = PolicyFromJson(ckpt.at("policy"));
  const auto dpo = ParseStrict<DpoRecord>(ctx.Require(artifacts::kDpoFinal), ctx.Path(artifacts::kDpoFinal));
  const SymbolRenderer renderer(init.vocab());
  const auto& cfg = ctx.config.train_dpo;
  std::vector<SymbolPair> pairs;
  for (const auto& r : dpo) {
    pairs.push_back({renderer.Render(r.pair.chosen.text, cfg.max_seq_len),
                     renderer.Render(r.pair.rejected.text, cfg.max_seq_len)});
  }
  if (pairs.empty()) throw DomainError("no DPO records to train on");
  const auto result = TrainDpo(init, pairs, cfg);
  const auto before = EvaluatePairs(result.reference, result.reference, pairs, cfg.beta, cfg.loss_type);
  const auto after = EvaluatePairs(result.policy, result.reference, pairs, cfg.beta, cfg.loss_type);
  const int64_t step = result.checkpoints[result.selected].step;
  WriteJson(ctx.Path(artifacts::kDpoCheckpoint), CheckpointJson(TrainStage::kDpo, step, cfg, result.policy));
  WriteFileAtomic(ctx.Path(artifacts::kDpoCurve), CurveToCsv(result.curve));
  nlohmann::json summary = {{"pairs", pairs.size()},
                            {"loss_type", ToString(cfg.loss_type)},
                            {"beta", cfg.beta},
                            {"steps", result.curve.size()},
                            {"selected_step", step},
                            {"validation_losses", result.validation_losses},
                            {"post_sft", StatsJson(before)},
                            {"final", StatsJson(after)}};
  WriteJson(ctx.Path(artifacts::kDpoSummary), summary);
  auto outputs = WriteCheckpoints(ctx, TrainStage::kDpo, cfg, result.checkpoints);
  outputs.insert(outputs.begin(), {std::string(artifacts::kDpoCheckpoint), std::string(artifacts::kDpoCurve),
                                   std::string(artifacts::kDpoSummary)});
  ctx.log << "[train-dpo] " << pairs.size() << " pairs, positive margins " << after.fraction_positive
          << ", mean preference prob " << before.mean_preference_prob << " -> " << after.mean_preference_prob
          << "\n";
  return outputs;
}

int RunLossesCheck(Context& ctx) {
  const auto rows = RunGradientSuite();
  ctx.out << RenderGradCheckTable(rows);
  for (const auto& r : rows) {
    if (!r.pass()) return kExitNumericFailure;
  }
  return kExitOk;
}

std::vector<std::string> Dispatch(Stage stage, Context& ctx) {
  switch (stage) {
    case Stage::kSample: return RunSample(ctx);
    case Stage::kScore: return RunScore(ctx);
    case Stage::kVerify: return RunVerify(ctx);
    case Stage::kPair: return RunPair(ctx);
    case Stage::kSplit: return RunSplit(ctx);
    case Stage::kReport: return RunReport(ctx);
    case Stage::kTrainSft: return RunTrainSft(ctx);
    case Stage::kTrainDpo: return RunTrainDpo(ctx);
    case Stage::kLossesCheck: break;
  }
  throw std::logic_error("unhandled stage");
}

// Runs one stage with the workdir lock already held.
void RunLocked(Stage stage, Context& ctx, bool resume) {
  const auto hash = InputHash(stage, ctx);
  if (resume && UpToDate(ctx, stage, hash)) {
    ctx.log << "[" << ToString(stage) << "] up to date, skipped\n";
    return;
  }
  const auto outputs = Dispatch(stage, ctx);
  RecordStage(ctx, stage, hash, outputs);
}

template <typename F>
int Guard(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const MissingArtifactError& e) {
    log << "error: missing prerequisite " << e.path() << "\n";
    return kExitMissingPrerequisite;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const NumericError& e) {
    log << "numeric failure: " << e.what() << " (" << e.detail() << ")\n";
    return kExitNumericFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

void CheckConfig(const PipelineConfig& config) {
  const auto problems = Validate(config);
  if (problems.empty()) return;
  std::string msg = problems.front();
  for (std::size_t i = 1; i < problems.size(); ++i) msg += "; " + problems[i];
  throw ConfigError(msg);
}

}  // namespace

std::string_view ToString(Stage s) {
  for (const auto& [stage, name] : kStageNames) {
    if (stage == s) return name;
  }
  return "?";
}

std::optional<Stage> ParseStage(std::string_view s) {
  for (const auto& [stage, name] : kStageNames) {
    if (name == s) return stage;
  }
  return std::nullopt;
}

int RunStage(Stage stage, const PipelineConfig& config, const RunOptions& options) {
  std::ostream& log = options.log ? *options.log : std::cerr;
  std::ostream& out = options.out ? *options.out : std::cout;
  return Guard(log, [&] {
    Context ctx{config, options, log, out, nullptr};
    if (stage == Stage::kLossesCheck) return RunLossesCheck(ctx);
    CheckConfig(config);
    WorkdirLock lock(config.workdir);
    RunLocked(stage, ctx, options.resume);
    return kExitOk;
  });
}

int RunAll(const PipelineConfig& config, const RunOptions& options) {
  std::ostream& log = options.log ? *options.log : std::cerr;
  std::ostream& out = options.out ? *options.out : std::cout;
  return Guard(log, [&] {
    CheckConfig(config);
    Context ctx{config, options, log, out, nullptr};
    WorkdirLock lock(config.workdir);
    for (Stage s : kPipelineOrder) RunLocked(s, ctx, options.resume);
    return kExitOk;
  });
}

}  // namespace fusepipe
