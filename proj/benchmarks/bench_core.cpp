// Copyright 2026 The temed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <random>

#include "temed/evalkit.hpp"
#include "temed/models.hpp"
#include "temed/vorc.hpp"

namespace {

struct Table {
  Eigen::MatrixXd X;
  std::vector<int> y;
};

// Synthetic mix of continuous and small-integer columns with a noisy linear label.
Table make_table(std::int64_t rows, std::int64_t cols, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Table t{Eigen::MatrixXd(rows, cols), std::vector<int>(static_cast<std::size_t>(rows))};
  for (Eigen::Index i = 0; i < rows; ++i) {
    double z = 0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      t.X(i, j) = j % 2 ? static_cast<double>(rng() % 5) : g(rng);
      z += (j % 3 == 0 ? 1.0 : -0.5) * t.X(i, j);
    }
    t.y[static_cast<std::size_t>(i)] = z + g(rng) > 0 ? 1 : 0;
  }
  return t;
}

void BM_RepairJson(benchmark::State& state) {
  std::string raw = "Reasoning: fields follow.\nOutput JSON:\n```json\n{";
  for (int i = 0; i < state.range(0); ++i) raw += "'field_" + std::to_string(i) + "': " + std::to_string(i) + ", ";
  raw += "}\n```\n";
  for (auto _ : state) benchmark::DoNotOptimize(temed::repair_json(raw));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(raw.size()));
}
BENCHMARK(BM_RepairJson)->Arg(10)->Arg(100)->Arg(1000);

void BM_RootSplit(benchmark::State& state) {
  const auto t = make_table(state.range(0), 12);
  std::vector<std::size_t> rows(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (auto _ : state) benchmark::DoNotOptimize(temed::best_gini_split(t.X, t.y, rows));
}
BENCHMARK(BM_RootSplit)->Arg(100)->Arg(1000)->Arg(10000);

void BM_TrainDtree(benchmark::State& state) {
  const auto t = make_table(state.range(0), 12);
  for (auto _ : state) benchmark::DoNotOptimize(temed::train_dtree(t.X, t.y, 8, 2));
}
BENCHMARK(BM_TrainDtree)->Arg(500)->Arg(5000);

void BM_TrainGbdt(benchmark::State& state) {
  const auto t = make_table(600, 12);
  for (auto _ : state) benchmark::DoNotOptimize(temed::train_gbdt(t.X, t.y, static_cast<int>(state.range(0)), 0.1));
}
BENCHMARK(BM_TrainGbdt)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_TrainLogreg(benchmark::State& state) {
  const auto t = make_table(state.range(0), 20);
  for (auto _ : state) benchmark::DoNotOptimize(temed::train_logreg(t.X, t.y, 1.0));
}
BENCHMARK(BM_TrainLogreg)->Arg(500)->Arg(5000);

void BM_RocAuc(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::vector<int> y(static_cast<std::size_t>(state.range(0)));
  std::vector<double> s(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = static_cast<int>(rng() % 2);
    s[i] = static_cast<double>(rng() % 1000) / 1000.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(temed::roc_auc(y, s));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

}  // namespace
BENCHMARK_MAIN();
