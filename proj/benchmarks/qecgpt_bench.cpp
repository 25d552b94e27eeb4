// Copyright 2026 The qecgpt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "qecgpt/decoder.hpp"
#include "qecgpt/gf2.hpp"
#include "qecgpt/model.hpp"
#include "qecgpt/noise.hpp"
#include "qecgpt/stabilizer.hpp"
#include "qecgpt/training.hpp"

namespace {

using namespace qecgpt;

BitRows random_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  BitRows x(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) x(r, c) = rng() & 1;
  }
  return x;
}

void BM_ForwardSurface3(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto params = init_params<float>(ModelConfig{26, 64, 4, 2, 64}, 1);
  const auto x = random_rows(batch, 26, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward_logits(params, x, 26));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * batch));
}
BENCHMARK(BM_ForwardSurface3)->Arg(1)->Arg(64)->Arg(512);

void BM_GradSurface3(benchmark::State& state) {
  const auto params = init_params<float>(ModelConfig{26, 64, 4, 2, 64}, 1);
  const auto x = random_rows(256, 26, 3);
  for (auto _ : state) benchmark::DoNotOptimize(grad_nll(params, x));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * 256));
}
BENCHMARK(BM_GradSurface3);

void BM_SampleAlpha(benchmark::State& state) {
  const auto params = init_params<float>(ModelConfig{26, 64, 4, 2, 64}, 1);
  const auto prefix = random_rows(static_cast<std::size_t>(state.range(0)), 14, 4);
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(sample_alpha(params, prefix, 12, 1, rng));
}
BENCHMARK(BM_SampleAlpha)->Arg(256)->Arg(4096);

void BM_DecodePretrained(benchmark::State& state) {
  const auto code = build_code(CodeSpec::parse("surface:3"));
  const auto params = init_params<float>(ModelConfig{26, 64, 4, 2, 64}, 1);
  const auto batch = sample_errors(code, DepolarizingModel{code.n, 0.1}, 1000, 6);
  for (auto _ : state) benchmark::DoNotOptimize(decode_pretrained(params, code, batch.gamma));
}
BENCHMARK(BM_DecodePretrained);

void BM_ExactMld(benchmark::State& state) {
  const auto code = build_code(CodeSpec::parse(state.range(0) == 0 ? "surface:3" : "surface:3+puncture:2@1"));
  const NoiseModel noise = DepolarizingModel{code.n, 0.1};
  const auto batch = sample_errors(code, noise, 16, 7);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(exact_mld(code, noise, batch.gamma[i++ % 16]));
}
BENCHMARK(BM_ExactMld)->Arg(0)->Arg(1);

void BM_BuildCode(benchmark::State& state) {
  const auto spec = CodeSpec::parse("surface:" + std::to_string(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_code(spec));
}
BENCHMARK(BM_BuildCode)->Arg(3)->Arg(5)->Arg(9);

void BM_Elimination(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(8);
  gf2::BitMatrix m(n, 2 * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < 2 * n; ++c) m.set(r, c, rng() & 1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(gf2::rank(m));
}
BENCHMARK(BM_Elimination)->Arg(64)->Arg(256);

void BM_TrainingBatch(benchmark::State& state) {
  const auto code = build_code(CodeSpec::parse("surface:3"));
  ErrorSampler sampler(DepolarizingModel{code.n, 0.1}, 9);
  for (auto _ : state) benchmark::DoNotOptimize(sample_training_batch(code, sampler, 512));
}
BENCHMARK(BM_TrainingBatch);

}  // namespace

BENCHMARK_MAIN();
