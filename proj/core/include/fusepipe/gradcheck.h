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
#include <span>
#include <string>
#include <vector>

namespace fusepipe {

// Central finite difference of f at x, one coordinate at a time.
std::vector<double> CentralDifference(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> x, double h = 1e-6);

// |a - n| / max(|a|, |n|); 0 when both are 0.
double RelativeError(double analytic, double numeric);

struct GradCheckRow {
  std::string name;
  std::size_t cases = 0;
  double max_rel_error = 0.0;
  double tolerance = 1e-6;
  bool pass() const { return max_rel_error < tolerance; }
};

struct GradCheckOptions {
  std::size_t cases = 1000;  // per objective
  uint64_t seed = 20240101;
  double h = 1e-6;
  double tolerance = 1e-6;
};

// Analytic vs central-difference gradients for the SFT NLL (w.r.t. bigram
// logits), DPO and LN-DPO (w.r.t. the four log-prob inputs). Cases span
// beta in {0.01, 0.5, 10}, log-ratios in [-5, 5] and lengths in [1, 512].
std::vector<GradCheckRow> RunGradientSuite(const GradCheckOptions& options = {});

std::string RenderGradCheckTable(std::span<const GradCheckRow> rows);

}  // namespace fusepipe
