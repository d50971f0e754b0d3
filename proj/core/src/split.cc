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

#include "fusepipe/split.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "fusepipe/jsonl.h"

namespace fusepipe {

using nlohmann::json;

std::vector<std::string> Validate(const SplitConfig& c) {
  std::vector<std::string> out;
  if (!(c.if_sft_fraction > 0.0 && c.if_sft_fraction < 1.0)) {
    out.push_back("if_sft_fraction must be in (0,1)");
  }
  return out;
}

void to_json(json& j, const SftRecord& r) {
  j = json{{"prompt_id", r.prompt_id},
           {"domain", ToString(r.domain)},
           {"source_dataset", r.source_dataset},
           {"prompt_text", r.prompt_text},
           {"response", r.response},
           {"selection_reason", ToString(r.selection_reason)}};
}

void from_json(const json& j, SftRecord& r) {
  j.at("prompt_id").get_to(r.prompt_id);
  auto d = ParseDomain(j.at("domain").get<std::string>());
  auto reason = ParseSelectionReason(j.at("selection_reason").get<std::string>());
  if (!d || !reason) throw json::other_error::create(501, "bad SFT record enums", &j);
  r.domain = *d;
  r.selection_reason = *reason;
  j.at("source_dataset").get_to(r.source_dataset);
  j.at("prompt_text").get_to(r.prompt_text);
  j.at("response").get_to(r.response);
}

void to_json(json& j, const DpoRecord& r) {
  j = json{{"prompt_id", r.prompt_id},
           {"domain", ToString(r.domain)},
           {"source_dataset", r.source_dataset},
           {"prompt_text", r.prompt_text},
           {"pair", r.pair}};
}

void from_json(const json& j, DpoRecord& r) {
  j.at("prompt_id").get_to(r.prompt_id);
  auto d = ParseDomain(j.at("domain").get<std::string>());
  if (!d) throw json::other_error::create(501, "bad DPO record domain", &j);
  r.domain = *d;
  j.at("source_dataset").get_to(r.source_dataset);
  j.at("prompt_text").get_to(r.prompt_text);
  j.at("pair").get_to(r.pair);
}

std::vector<std::size_t> SeededPermutation(std::size_t n, uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  // std::shuffle's draws are implementation-defined; spell them out so splits
  // are identical across standard libraries.
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::size_t SftQuota(double fraction, std::size_t n) {
  const double x = fraction * static_cast<double>(n);
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

SplitResult Partition(std::span<const Prompt> corpus, std::span<const SftExample> sft_examples,
                      std::span<const PreferencePair> pairs, const SplitConfig& config) {
  if (auto v = Validate(config); !v.empty()) throw ConfigError(v.front());

  std::unordered_map<std::string, const SftExample*> sft_by_id;
  for (const auto& e : sft_examples) sft_by_id.emplace(e.prompt_id, &e);
  std::unordered_map<std::string, std::vector<const PreferencePair*>> pairs_by_id;
  for (const auto& p : pairs) pairs_by_id[p.prompt_id].push_back(&p);

  enum class Phase { kNone, kSft, kDpo };
  std::vector<Phase> phase(corpus.size(), Phase::kNone);
  auto has_sft = [&](const Prompt& p) { return sft_by_id.contains(p.id); };
  auto has_pair = [&](const Prompt& p) { return pairs_by_id.contains(p.id); };

  // Seeded ratio split over the eligible prompts of one domain.
  auto ratio_split = [&](Domain domain) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus[i].domain == domain && (has_sft(corpus[i]) || has_pair(corpus[i]))) eligible.push_back(i);
    }
    const auto perm = SeededPermutation(eligible.size(), config.seed);
    const std::size_t quota = SftQuota(config.if_sft_fraction, eligible.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
      const std::size_t i = eligible[perm[k]];
      const bool sft_slot = k < quota;
      if (!sft_slot && has_pair(corpus[i])) phase[i] = Phase::kDpo;
      else if (has_sft(corpus[i])) phase[i] = Phase::kSft;
    }
  };

  ratio_split(Domain::kInstructionFollowing);
  for (Domain d : {Domain::kMathematics, Domain::kCoding}) {
    if (!config.math_dpo_requires_pair) {
      ratio_split(d);
      continue;
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus[i].domain != d) continue;
      if (has_pair(corpus[i])) phase[i] = Phase::kDpo;
      else if (has_sft(corpus[i])) phase[i] = Phase::kSft;
    }
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].domain == Domain::kChinese && has_sft(corpus[i])) phase[i] = Phase::kSft;
  }

  SplitResult out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Prompt& p = corpus[i];
    if (phase[i] == Phase::kSft) {
      const SftExample& e = *sft_by_id.at(p.id);
      out.sft.push_back({p.id, p.domain, p.source_dataset, p.text, e.response, e.selection_reason});
    } else if (phase[i] == Phase::kDpo) {
      for (const PreferencePair* pair : pairs_by_id.at(p.id)) {
        out.dpo.push_back({p.id, p.domain, p.source_dataset, p.text, *pair});
      }
    }
  }
  return out;
}

CompositionReport ReportFromRows(std::vector<ReportRow> rows) {
  CompositionReport report;
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.domain, a.source_dataset) < std::tie(b.domain, b.source_dataset);
  });
  report.rows = std::move(rows);
  for (const auto& r : report.rows) {
    report.total_count += r.count;
    report.total_sft += r.sft;
    report.total_dpo += r.dpo;
  }
  return report;
}

CompositionReport ComposeReport(std::span<const SftRecord> sft, std::span<const DpoRecord> dpo) {
  std::map<std::pair<Domain, std::string>, ReportRow> rows;
  auto row = [&](Domain d, const std::string& ds) -> ReportRow& {
    auto& r = rows[{d, ds}];
    r.domain = d;
    r.source_dataset = ds;
    return r;
  };
  for (const auto& r : sft) ++row(r.domain, r.source_dataset).sft;
  for (const auto& r : dpo) ++row(r.domain, r.source_dataset).dpo;
  std::vector<ReportRow> out;
  for (auto& [key, r] : rows) {
    r.count = r.sft + r.dpo;
    out.push_back(r);
  }
  return ReportFromRows(std::move(out));
}

std::vector<std::string> CheckConservation(const CompositionReport& report) {
  std::vector<std::string> bad;
  int64_t count = 0, sft = 0, dpo = 0;
  for (const auto& r : report.rows) {
    if (r.count != r.sft + r.dpo) bad.push_back(std::string(ToString(r.domain)) + "/" + r.source_dataset);
    count += r.count;
    sft += r.sft;
    dpo += r.dpo;
  }
  if (report.total_count != report.total_sft + report.total_dpo || report.total_count != count ||
      report.total_sft != sft || report.total_dpo != dpo) {
    bad.push_back("total");
  }
  return bad;
}

namespace {

std::string WithCommas(int64_t v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return v < 0 ? "-" + out : out;
}

}  // namespace

std::string RenderReportText(const CompositionReport& report) {
  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({"Category", "Dataset", "Count", "#SFT", "#DPO"});
  std::optional<Domain> last;
  for (const auto& r : report.rows) {
    std::string category = last == r.domain ? "" : std::string(ToString(r.domain));
    last = r.domain;
    cells.push_back({category, r.source_dataset, WithCommas(r.count), WithCommas(r.sft), WithCommas(r.dpo)});
  }
  cells.push_back({"Total", "", WithCommas(report.total_count), WithCommas(report.total_sft),
                   WithCommas(report.total_dpo)});

  std::array<std::size_t, 5> width{};
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto rule = [&] {
    for (std::size_t c = 0; c < 5; ++c) out << std::string(width[c] + (c == 0 ? 0 : 2), '-');
    out << '\n';
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i == 1 || i + 1 == cells.size()) rule();
    const auto& row = cells[i];
    for (std::size_t c = 0; c < 5; ++c) {
      if (c > 0) out << "  ";
      const std::string pad(width[c] - row[c].size(), ' ');
      // Text columns left-aligned, numbers right-aligned.
      if (c < 2) out << row[c] << pad;
      else out << pad << row[c];
    }
    out << '\n';
  }
  return out.str();
}

json ReportToJson(const CompositionReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"domain", ToString(r.domain)},
                    {"source_dataset", r.source_dataset},
                    {"count", r.count},
                    {"sft", r.sft},
                    {"dpo", r.dpo}});
  }
  return json{{"rows", rows},
              {"total", {{"count", report.total_count}, {"sft", report.total_sft}, {"dpo", report.total_dpo}}}};
}

}  // namespace fusepipe
