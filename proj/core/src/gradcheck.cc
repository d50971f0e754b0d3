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

#include "fusepipe/gradcheck.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <iomanip>

#include "fusepipe/errors.h"
#include "fusepipe/losses.h"
#include "fusepipe/toy_policy.h"

namespace fusepipe {

namespace {

using Real = long double;

// Reference evaluations in extended precision. Central differences of a
// quantity near ln 2 with h = 1e-6 lose about eps/h of relative accuracy, so
// the difference quotient is taken on these instead of the double versions.
Real SoftplusNeg(Real m) {
  const Real x = -m;
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Real ReferenceLoss(const std::array<Real, 4>& v, Real cw, Real cl) {
  // v = {policy_w, ref_w, policy_l, ref_l}
  return SoftplusNeg(cw * (v[0] - v[1]) - cl * (v[2] - v[3]));
}

// Sequence NLL from transition counts: sum over rows of
// n_r * logsumexp(row) - sum_j count_rj * logit_rj.
Real ReferenceNll(std::size_t v, std::span<const Real> logits, std::span<const Real> counts) {
  Real total = 0;
  for (std::size_t r = 0; r < v; ++r) {
    const Real* row = logits.data() + r * v;
    const Real* cnt = counts.data() + r * v;
    Real n = 0;
    for (std::size_t j = 1; j < v; ++j) n += cnt[j];
    if (n == 0) continue;
    Real mx = row[1];
    for (std::size_t j = 2; j < v; ++j) mx = std::max(mx, row[j]);
    Real z = 0;
    for (std::size_t j = 1; j < v; ++j) z += std::exp(row[j] - mx);
    total += n * (mx + std::log(z));
    for (std::size_t j = 1; j < v; ++j) total -= cnt[j] * row[j];
  }
  return total;
}

constexpr std::array<double, 3> kBetas = {0.01, 0.5, 10.0};

}  // namespace

std::vector<double> CentralDifference(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> x, double h) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = point[i];
    point[i] = orig + h;
    const double up = f(point);
    point[i] = orig - h;
    const double down = f(point);
    point[i] = orig;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

double RelativeError(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

std::vector<GradCheckRow> RunGradientSuite(const GradCheckOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> ratio(-5.0, 5.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> length(1, 512);
  const Real h = o.h;

  GradCheckRow sft{"SFT NLL", 0, 0.0, o.tolerance};
  for (std::size_t c = 0; c < o.cases; ++c) {
    const std::size_t vocab = 3 + c % 6;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < vocab; ++i) names.push_back("s" + std::to_string(i));
    ToyPolicy policy(names);
    policy.RandomizeLogits(rng, 1.0);
    std::uniform_int_distribution<int> symbol(1, static_cast<int>(vocab) - 1);
    SymbolSequence seq(static_cast<std::size_t>(length(rng)));
    for (int& s : seq) s = symbol(rng);

    std::vector<double> analytic(policy.logits().size(), 0.0);
    policy.AccumulateSequenceGrad(seq, -1.0, analytic);
    std::vector<Real> counts(vocab * vocab, 0);
    int prev = ToyPolicy::kBegin;
    for (int s : seq) {
      counts[static_cast<std::size_t>(prev) * vocab + static_cast<std::size_t>(s)] += 1;
      prev = s;
    }
    std::vector<Real> point(policy.logits().begin(), policy.logits().end());
    for (std::size_t i = 0; i < point.size(); ++i) {
      const Real orig = point[i];
      point[i] = orig + h;
      const Real up = ReferenceNll(vocab, point, counts);
      point[i] = orig - h;
      const Real down = ReferenceNll(vocab, point, counts);
      point[i] = orig;
      const auto numeric = static_cast<double>((up - down) / (2 * h));
      sft.max_rel_error = std::max(sft.max_rel_error, RelativeError(analytic[i], numeric));
    }
    ++sft.cases;
  }

  std::vector<GradCheckRow> rows{sft};
  for (LossType type : {LossType::kDpo, LossType::kLnDpo}) {
    GradCheckRow row{type == LossType::kDpo ? "DPO" : "LN-DPO", 0, 0.0, o.tolerance};
    for (std::size_t c = 0; c < o.cases; ++c) {
      PairLogProbs in;
      in.beta = kBetas[c % kBetas.size()];
      in.chosen.length = length(rng);
      in.rejected.length = length(rng);
      // Policy log-probs at most -5 keep the reference side non-positive.
      in.chosen.policy_logp = -5.0 - 2.0 * static_cast<double>(in.chosen.length) * unit(rng);
      in.chosen.ref_logp = in.chosen.policy_logp - ratio(rng);
      in.rejected.policy_logp = -5.0 - 2.0 * static_cast<double>(in.rejected.length) * unit(rng);
      in.rejected.ref_logp = in.rejected.policy_logp - ratio(rng);

      const auto r = PreferenceLoss(in, type);
      const Real beta = in.beta;
      const Real cw = type == LossType::kDpo ? beta : beta / static_cast<Real>(in.chosen.length);
      const Real cl = type == LossType::kDpo ? beta : beta / static_cast<Real>(in.rejected.length);
      std::array<Real, 4> v = {in.chosen.policy_logp, in.chosen.ref_logp, in.rejected.policy_logp,
                               in.rejected.ref_logp};
      const double value_err = RelativeError(r.loss, static_cast<double>(ReferenceLoss(v, cw, cl)));
      if (value_err > 1e-12) throw NumericError("loss disagrees with the reference evaluation", row.name);
      const std::array<double, 4> analytic = {r.grad.chosen_policy, r.grad.chosen_ref,
                                              r.grad.rejected_policy, r.grad.rejected_ref};
      for (std::size_t i = 0; i < 4; ++i) {
        const Real orig = v[i];
        v[i] = orig + h;
        const Real up = ReferenceLoss(v, cw, cl);
        v[i] = orig - h;
        const Real down = ReferenceLoss(v, cw, cl);
        v[i] = orig;
        const auto numeric = static_cast<double>((up - down) / (2 * h));
        row.max_rel_error = std::max(row.max_rel_error, RelativeError(analytic[i], numeric));
      }
      ++row.cases;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string RenderGradCheckTable(std::span<const GradCheckRow> rows) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "objective" << std::right << std::setw(8) << "cases"
     << std::setw(16) << "max_rel_error" << std::setw(12) << "tolerance" << "  result\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(10) << r.name << std::right << std::setw(8) << r.cases
       << std::setw(16) << std::scientific << std::setprecision(3) << r.max_rel_error
       << std::setw(12) << r.tolerance << std::defaultfloat << "  " << (r.pass() ? "PASS" : "FAIL")
       << '\n';
  }
  return os.str();
}

}  // namespace fusepipe
