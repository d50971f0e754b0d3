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

#include "fusepipe/config.h"

#include <cstdlib>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "fusepipe/errors.h"
#include "fusepipe/jsonl.h"

namespace fusepipe {

namespace {

// Reads a YAML mapping while tracking which keys were consumed, so that
// misspelled keys are reported instead of silently ignored.
class Section {
 public:
  Section(const YAML::Node& node, std::string path, const EnvLookup& env)
      : node_(node), path_(std::move(path)), env_(env) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_ + " must be a mapping");
  }

  bool Has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

  YAML::Node Raw(const std::string& key) {
    used_.insert(key);
    return node_ && node_.IsMap() ? node_[key] : YAML::Node();
  }

  std::optional<std::string> String(const std::string& key) {
    auto n = Raw(key);
    if (!n || n.IsNull()) return std::nullopt;
    if (!n.IsScalar()) throw ConfigError(Where(key) + " must be a scalar");
    return InterpolateEnv(n.Scalar(), env_);
  }

  template <typename T>
  void Get(const std::string& key, T& out) {
    auto s = String(key);
    if (!s) return;
    try {
      out = YAML::Node(*s).as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(Where(key) + ": cannot parse '" + *s + "'");
    }
  }

  void Path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
    if (auto s = String(key)) out = Resolve(*s, base);
  }

  Section Child(const std::string& key) { return Section(Raw(key), Where(key), env_); }

  std::string Where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void RejectUnknown() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError("unknown config key " + Where(key));
    }
  }

  static std::filesystem::path Resolve(const std::string& s, const std::filesystem::path& base) {
    std::filesystem::path p(s);
    return p.is_absolute() || base.empty() ? p : base / p;
  }

 private:
  YAML::Node node_;
  std::string path_;
  const EnvLookup& env_;
  std::set<std::string> used_;
};

Domain RequireDomain(const std::string& s, const std::string& where) {
  auto d = ParseDomain(s);
  if (!d) throw ConfigError(where + ": unknown domain '" + s + "'");
  return *d;
}

void ReadTrain(Section s, TrainConfig& c) {
  s.Get("epochs", c.epochs);
  s.Get("batch_size", c.batch_size);
  s.Get("peak_lr", c.peak_lr);
  s.Get("warmup_ratio", c.warmup_ratio);
  s.Get("beta", c.beta);
  if (auto t = s.String("loss_type")) {
    auto parsed = ParseLossType(*t);
    if (!parsed) throw ConfigError(s.Where("loss_type") + ": unknown loss type '" + *t + "'");
    c.loss_type = *parsed;
  }
  s.Get("checkpoint_every", c.checkpoint_every);
  s.Get("max_seq_len", c.max_seq_len);
  s.Get("seed", c.seed);
  s.RejectUnknown();
}

void Prefix(std::vector<std::string>& out, const std::string& where, const std::vector<std::string>& items) {
  for (const auto& i : items) out.push_back(where + ": " + i);
}

}  // namespace

std::optional<std::string> GetEnv(std::string_view name) {
  const char* v = std::getenv(std::string(name).c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

std::string InterpolateEnv(std::string_view text, const EnvLookup& env) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("${", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const auto close = text.find('}', open);
    if (close == std::string_view::npos) throw ConfigError("unterminated ${ in '" + std::string(text) + "'");
    const auto inner = text.substr(open + 2, close - open - 2);
    const auto sep = inner.find(":-");
    const auto name = inner.substr(0, sep);
    if (name.empty()) throw ConfigError("empty variable name in '" + std::string(text) + "'");
    auto value = env(name);
    if (value) {
      out += *value;
    } else if (sep != std::string_view::npos) {
      out.append(inner.substr(sep + 2));
    } else {
      throw ConfigError("environment variable " + std::string(name) + " is not set");
    }
    pos = close + 1;
  }
  return out;
}

PipelineConfig ParseConfig(std::string_view yaml_text, const std::filesystem::path& base_dir,
                           const EnvLookup& env) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  PipelineConfig c;
  Section top(root, "", env);
  top.Path("corpus", c.corpus, base_dir);
  top.Path("workdir", c.workdir, base_dir);
  top.Get("parallelism", c.parallelism);
  top.Get("mock_server", c.mock_server);

  const auto default_token = env("FUSEPIPE_AUTH_TOKEN");
  auto endpoints = top.Raw("endpoints");
  if (endpoints && !endpoints.IsSequence()) throw ConfigError("endpoints must be a list");
  for (std::size_t i = 0; endpoints && i < endpoints.size(); ++i) {
    Section e(endpoints[i], "endpoints[" + std::to_string(i) + "]", env);
    ModelEndpoint ep;
    e.Get("model_id", ep.model_id);
    e.Get("base_url", ep.base_url);
    if (auto f = e.String("family")) {
      auto fam = ParseModelFamily(*f);
      if (!fam) throw ConfigError(e.Where("family") + ": unknown family '" + *f + "'");
      ep.family = *fam;
    }
    ep.auth_token = e.String("auth_token");
    if (!ep.auth_token) ep.auth_token = default_token;
    e.Get("chinese_specialist", ep.chinese_specialist);
    e.Get("math_only", ep.math_only);
    e.RejectUnknown();
    c.endpoints.push_back(std::move(ep));
  }

  auto overrides = top.Raw("profile_overrides");
  if (overrides && !overrides.IsSequence()) throw ConfigError("profile_overrides must be a list");
  for (std::size_t i = 0; overrides && i < overrides.size(); ++i) {
    Section o(overrides[i], "profile_overrides[" + std::to_string(i) + "]", env);
    std::string model, domain;
    o.Get("model_id", model);
    o.Get("domain", domain);
    SamplingProfile p;
    o.Get("temperature", p.temperature);
    o.Get("top_p", p.top_p);
    o.Get("repetition_penalty", p.repetition_penalty);
    o.Get("n_samples", p.n_samples);
    o.RejectUnknown();
    c.profile_overrides[{model, RequireDomain(domain, o.Where("domain"))}] = p;
  }

  {
    auto s = top.Child("sampling");
    s.Get("max_attempts", c.sampling.max_attempts);
    int64_t backoff = c.sampling.backoff_base.count();
    s.Get("backoff_ms", backoff);
    c.sampling.backoff_base = std::chrono::milliseconds(backoff);
    if (s.Has("max_tokens")) {
      int m = 0;
      s.Get("max_tokens", m);
      c.sampling.max_tokens = m;
    }
    s.RejectUnknown();
  }
  {
    auto s = top.Child("scorer");
    if (auto k = s.String("kind")) {
      auto kind = ParseScorerKind(*k);
      if (!kind) throw ConfigError("scorer.kind: unknown scorer '" + *k + "'");
      c.scorer.kind = *kind;
    }
    c.scorer.base_url = s.String("base_url");
    if (auto f = s.String("formula")) {
      auto formula = ParseStubFormula(*f);
      if (!formula) throw ConfigError("scorer.formula: unknown formula '" + *f + "'");
      c.scorer.stub_formula = *formula;
    }
    s.Get("logistic_midpoint", c.scorer.logistic_midpoint);
    s.Get("logistic_scale", c.scorer.logistic_scale);
    s.RejectUnknown();
  }
  {
    auto s = top.Child("executor");
    s.Get("command", c.executor.command_template);
    c.executor.check_template = s.String("check");
    s.Path("workdir", c.executor.workdir, base_dir);
    s.Get("sandbox_timeout_ms", c.executor.sandbox_timeout_ms);
    s.Get("source_filename", c.executor.source_filename);
    s.RejectUnknown();
  }
  {
    auto s = top.Child("pairs");
    s.Get("min_gap", c.pairs.gap_filter.min_gap);
    s.Get("max_gap", c.pairs.gap_filter.max_gap);
    s.Get("gap_filter_all_domains", c.pairs.gap_filter_all_domains);
    s.Get("keep_all_model_pairs", c.pairs.keep_all_model_pairs);
    s.RejectUnknown();
  }
  {
    auto s = top.Child("split");
    s.Get("if_sft_fraction", c.split.if_sft_fraction);
    s.Get("seed", c.split.seed);
    s.Get("math_dpo_requires_pair", c.split.math_dpo_requires_pair);
    s.RejectUnknown();
  }
  {
    auto s = top.Child("train");
    s.Get("vocab_size", c.vocab_size);
    ReadTrain(s.Child("sft"), c.train_sft);
    ReadTrain(s.Child("dpo"), c.train_dpo);
    s.RejectUnknown();
  }
  top.RejectUnknown();
  if (c.executor.workdir.empty() && !c.workdir.empty()) c.executor.workdir = c.workdir / "exec";
  return c;
}

PipelineConfig LoadConfig(const std::filesystem::path& path, const EnvLookup& env) {
  std::string text;
  try {
    text = ReadFile(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  return ParseConfig(text, path.parent_path(), env);
}

std::vector<std::string> Validate(const PipelineConfig& c) {
  std::vector<std::string> out;
  if (c.corpus.empty()) out.emplace_back("corpus path is required");
  if (c.workdir.empty()) out.emplace_back("workdir path is required");
  if (c.parallelism < 1) out.emplace_back("parallelism must be >= 1");
  if (c.endpoints.empty()) out.emplace_back("at least one endpoint is required");
  std::set<std::string> ids;
  int specialists = 0;
  for (const auto& e : c.endpoints) {
    const std::string where = "endpoint " + e.model_id;
    if (!ids.insert(e.model_id).second) out.push_back(where + ": duplicate model_id");
    if (e.chinese_specialist) ++specialists;
    if (e.base_url == kMockUrl) {
      if (!c.mock_server) out.push_back(where + ": base_url 'mock' needs mock_server: true");
      if (e.model_id.empty()) out.push_back(where + ": empty model_id");
    } else {
      Prefix(out, where, Validate(e));
    }
  }
  if (specialists > 1) out.emplace_back("more than one chinese_specialist endpoint");
  for (const auto& [key, profile] : c.profile_overrides) {
    if (!ids.count(key.first)) out.push_back("profile override for unknown model " + key.first);
    Prefix(out, "profile override " + key.first, Validate(profile));
  }
  if (c.sampling.max_attempts < 1) out.emplace_back("sampling.max_attempts must be >= 1");
  if (c.sampling.backoff_base.count() < 0) out.emplace_back("sampling.backoff_ms must be >= 0");
  if (c.sampling.max_tokens && *c.sampling.max_tokens < 1) out.emplace_back("sampling.max_tokens must be >= 1");
  auto scorer = c.scorer;
  if (scorer.base_url && *scorer.base_url == kMockUrl) {
    if (!c.mock_server) out.emplace_back("scorer: base_url 'mock' needs mock_server: true");
    scorer.base_url = "http://127.0.0.1";
  }
  Prefix(out, "scorer", Validate(scorer));
  // The executor is only needed for Coding prompts; the verify stage checks that.
  if (!c.executor.command_template.empty()) Prefix(out, "executor", Validate(c.executor));
  Prefix(out, "pairs", Validate(c.pairs.gap_filter));
  Prefix(out, "split", Validate(c.split));
  if (c.vocab_size < 3 || c.vocab_size > ToyPolicy::kMaxVocab) out.emplace_back("train.vocab_size must be in [3, 64]");
  Prefix(out, "train.sft", Validate(c.train_sft));
  Prefix(out, "train.dpo", Validate(c.train_dpo));
  return out;
}

}  // namespace fusepipe
