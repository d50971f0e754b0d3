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

#include <random>

#include <benchmark/benchmark.h>

#include "fusepipe/pairs.h"
#include "fusepipe/split.h"
#include "test_support.h"

namespace fusepipe {
namespace {

void BM_BuildDataset(benchmark::State& state) {
  std::mt19937_64 rng(9);
  const auto c = testing::MakeRandomCase(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(BuildDataset(c.corpus, c.pool));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(c.pool.size()));
}
BENCHMARK(BM_BuildDataset)->Arg(100)->Arg(1000);

void BM_Partition(benchmark::State& state) {
  std::mt19937_64 rng(10);
  const auto c = testing::MakeRandomCase(rng, static_cast<int>(state.range(0)));
  const auto build = BuildDataset(c.corpus, c.pool);
  for (auto _ : state) benchmark::DoNotOptimize(Partition(c.corpus, build.sft, build.pairs));
}
BENCHMARK(BM_Partition)->Arg(1000);

}  // namespace
}  // namespace fusepipe
