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

#include "qecgpt/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qecgpt/error.hpp"

namespace qecgpt {
namespace {

namespace fs = std::filesystem;

TrainConfig toy_config(std::size_t steps) {
  TrainConfig c = TrainConfig::preset("quick");
  c.model = ModelConfig{0, 16, 2, 1, 32};
  c.batch = 256;
  c.steps = steps;
  c.lr = 3e-3;
  c.eval_every = steps;
  c.seed = 42;
  return c;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("qecgpt_training_test_" + name);
}

double enumerated_entropy(const DepolarizingModel& model) {
  double h = 0.0;
  for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << (2 * model.n)); ++idx) {
    PauliVec e(2 * model.n);
    for (std::size_t b = 0; b < 2 * model.n; ++b) e.set(b, (idx >> b) & 1);
    const double lp = logprob_depolarizing(model, e);
    if (std::isfinite(lp)) h -= std::exp(lp) * lp;
  }
  return h;
}

TEST(TrainConfig, PresetsValidate) {
  for (const auto& name : TrainConfig::preset_names()) {
    const auto c = TrainConfig::preset(name);
    EXPECT_EQ(c.profile, name);
    EXPECT_NO_THROW(c.validate());
  }
  const auto full = TrainConfig::preset("full");
  EXPECT_EQ(full.batch, 10000u);
  EXPECT_EQ(full.steps, 100000u);
  EXPECT_EQ(full.lr, 1e-3);
  EXPECT_EQ(full.model.d_model, 256u);
  EXPECT_EQ(full.model.n_heads, 4u);
  EXPECT_EQ(full.model.n_layers, 2u);
  EXPECT_EQ(full.model.d_ff, 256u);
  const auto desk = TrainConfig::preset("desk");
  EXPECT_EQ(desk.model.d_model, 64u);
  EXPECT_EQ(desk.batch, 512u);
  EXPECT_EQ(desk.steps, 20000u);
  EXPECT_THROW(TrainConfig::preset("huge"), Error);
}

TEST(TrainConfig, ValidationRejectsBadValues) {
  auto c = TrainConfig::preset("desk");
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig::preset("desk");
  c.batch = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig::preset("desk");
  c.model.n_heads = 3;
  EXPECT_THROW(c.validate(), Error);
}

TEST(TrainConfig, JsonRoundTrip) {
  auto c = TrainConfig::preset("quick");
  c.steps = 123;
  c.lr = 2.5e-4;
  c.seed = 99;
  c.model.d_model = 32;
  c.checkpoint_path = "/tmp/x.ckpt";
  const auto back = train_config_from_json(train_config_to_json(c));
  EXPECT_EQ(back.profile, "quick");
  EXPECT_EQ(back.steps, 123u);
  EXPECT_EQ(back.lr, 2.5e-4);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.model.d_model, 32u);
  EXPECT_EQ(back.checkpoint_path, fs::path("/tmp/x.ckpt"));
  EXPECT_EQ(train_config_to_json(back), train_config_to_json(c));
}

TEST(TrainConfig, MissingFieldsComeFromProfile) {
  const auto c = train_config_from_json(R"({"profile": "full", "steps": 7})");
  EXPECT_EQ(c.steps, 7u);
  EXPECT_EQ(c.batch, 10000u);
  EXPECT_EQ(c.model.d_model, 256u);
  EXPECT_EQ(train_config_from_json("{}").batch, 512u);
  EXPECT_THROW(train_config_from_json("[1, 2]"), Error);
  EXPECT_THROW(train_config_from_json("{not json"), Error);
  EXPECT_THROW(train_config_from_json(R"({"lr": -1})"), Error);
}

TEST(Adam, FirstStepHasLearningRateMagnitude) {
  Adam adam(3, 0.01, 0.9, 0.999, 1e-8);
  ParamVector<float> x{1.0f, -2.0f, 0.5f};
  adam.step(x, ParamVector<float>{4.0f, -0.001f, 100.0f});
  EXPECT_NEAR(x[0], 0.99f, 1e-6);
  EXPECT_NEAR(x[1], -1.99f, 1e-5);
  EXPECT_NEAR(x[2], 0.49f, 1e-6);
  EXPECT_EQ(adam.steps_taken(), 1u);
}

TEST(Adam, MinimisesQuadratic) {
  Adam adam(2, 0.05, 0.9, 0.999, 1e-8);
  ParamVector<float> x{3.0f, -4.0f};
  for (int t = 0; t < 2000; ++t) adam.step(x, ParamVector<float>{x[0] - 1.0f, x[1] + 2.0f});
  EXPECT_NEAR(x[0], 1.0f, 1e-2);
  EXPECT_NEAR(x[1], -2.0f, 1e-2);
  EXPECT_THROW(adam.step(x, ParamVector<float>{1.0f}), Error);
}

TEST(Entropy, MatchesEnumeration) {
  for (double p : {0.0, 0.01, 0.1, 0.3, 0.75}) {
    const DepolarizingModel model{3, p};
    EXPECT_NEAR(noise_entropy(model), enumerated_entropy(model), 1e-12) << p;
  }
  EXPECT_THROW(noise_entropy(IsingNoiseModel::random_regular(6, 0.5, 1, 3)), Error);
}

TEST(EvaluateKl, ZeroParamsAgainstUniformNoise) {
  // p = 3/4 makes every Pauli equally likely, as does a zero-parameter model.
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  const ModelParams<float> zero(ModelConfig{2 * code.n, 8, 2, 1, 8});
  const auto kl = evaluate_kl(zero, code, DepolarizingModel{code.n, 0.75});
  EXPECT_TRUE(kl.exact);
  EXPECT_NEAR(kl.value, 0.0, 1e-6);
}

TEST(EvaluateKl, MonteCarloAgreesWithEnumeration) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  const NoiseModel noise = DepolarizingModel{code.n, 0.1};
  const auto params = init_params<float>(ModelConfig{2 * code.n, 16, 2, 1, 16}, 3);
  const auto exact = evaluate_kl(params, code, noise);
  ASSERT_TRUE(exact.exact);
  EXPECT_GT(exact.value, 0.0);
  // KL = E_P[-log q] - H(P).
  const auto nll = heldout_nll(params, code, noise, 50000, 4);
  EXPECT_NEAR(nll.value - noise_entropy(noise), exact.value, 4.0 * nll.std_error);
}

TEST(EvaluateKl, RejectsIsing) {
  const auto code = build_code(CodeSpec::parse("repetition:6"));
  const auto params = init_params<float>(ModelConfig{2 * code.n, 8, 2, 1, 8}, 3);
  EXPECT_THROW(evaluate_kl(params, code, IsingNoiseModel::random_regular(code.n, 0.5, 1, 3)), Error);
}

TEST(Pretrain, LearnsToyDistribution) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  const NoiseModel noise = DepolarizingModel{code.n, 0.1};
  const auto result = pretrain(code, noise, toy_config(1500));
  const auto kl = evaluate_kl(result.params, code, noise);
  EXPECT_LT(kl.value, 0.02);
  const auto nll = heldout_nll(result.params, code, noise, 20000, 1);
  EXPECT_NEAR(nll.value, noise_entropy(noise), 0.05);
  // Never below the entropy beyond sampling noise.
  EXPECT_GE(nll.value, noise_entropy(noise) - 3.0 * nll.std_error);
}

TEST(Pretrain, PointMassNoiseDrivesLossToZero) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  auto cfg = toy_config(1000);
  cfg.eval_every = 100;
  const auto result = pretrain(code, DepolarizingModel{code.n, 0.0}, cfg);
  EXPECT_LT(result.reports.back().nll, 0.01);
}

TEST(Pretrain, WindowedLossDecreases) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  const NoiseModel noise = DepolarizingModel{code.n, 0.1};
  auto cfg = toy_config(600);
  cfg.eval_every = 1;
  const auto result = pretrain(code, noise, cfg);
  ASSERT_EQ(result.reports.size(), 600u);
  // Consecutive 50-step windows: each mean no higher than the previous one
  // beyond three combined standard errors.
  auto window = [&](std::size_t w) {
    double s = 0.0;
    double ss = 0.0;
    for (std::size_t i = 50 * w; i < 50 * (w + 1); ++i) {
      s += result.reports[i].nll;
      ss += result.reports[i].nll * result.reports[i].nll;
    }
    const double mean = s / 50.0;
    return std::pair{mean, std::sqrt(std::max(ss / 50.0 - mean * mean, 0.0) / 50.0)};
  };
  for (std::size_t w = 0; w + 1 < 12; ++w) {
    const auto [a, sa] = window(w);
    const auto [b, sb] = window(w + 1);
    EXPECT_LE(b, a + 3.0 * std::hypot(sa, sb)) << "window " << w;
  }
  EXPECT_LT(window(11).first, window(0).first);
}

TEST(Pretrain, DeterministicForFixedSeed) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  const NoiseModel noise = DepolarizingModel{code.n, 0.1};
  const auto a = pretrain(code, noise, toy_config(50));
  const auto b = pretrain(code, noise, toy_config(50));
  EXPECT_EQ(a.params.values(), b.params.values());
  auto other = toy_config(50);
  other.seed = 43;
  EXPECT_NE(pretrain(code, noise, other).params.values(), a.params.values());

  std::ostringstream sa;
  std::ostringstream sb;
  save_checkpoint(sa, a.params, {});
  save_checkpoint(sb, b.params, {});
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Pretrain, WritesMetricsAndCheckpoints) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  const NoiseModel noise = DepolarizingModel{code.n, 0.1};
  auto cfg = toy_config(40);
  cfg.eval_every = 10;
  cfg.checkpoint_every = 20;
  cfg.checkpoint_path = temp_path("ckpt.bin");
  cfg.metrics_path = temp_path("metrics.jsonl");
  std::vector<std::size_t> seen;
  const auto result = pretrain(code, noise, cfg, [&](const TrainReport& r) { seen.push_back(r.step); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{10, 20, 30, 40}));
  EXPECT_EQ(result.reports[1].checkpoint, cfg.checkpoint_path);
  EXPECT_TRUE(result.reports[0].checkpoint.empty());

  std::ifstream in(cfg.metrics_path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("step") && j.contains("nll") && j.contains("wall_ms"));
    ++lines;
  }
  EXPECT_EQ(lines, 4u);

  CheckpointInfo info;
  const auto loaded = load_checkpoint(cfg.checkpoint_path, &info);
  EXPECT_EQ(loaded.values(), result.params.values());
  EXPECT_EQ(info.step, 40u);
  EXPECT_EQ(info.seed, cfg.seed);
  // Checkpointed parameters reproduce the NLL exactly.
  const auto rows = sequence_rows({pauli_to_els(code, PauliVec(2 * code.n))});
  EXPECT_EQ(mean_nll(loaded, rows), mean_nll(result.params, rows));
  fs::remove(cfg.checkpoint_path);
  fs::remove(cfg.metrics_path);
}

TEST(Pretrain, NonFiniteKeepsLastGoodCheckpoint) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  auto cfg = toy_config(50);
  cfg.lr = 1e38;
  cfg.checkpoint_path = temp_path("nonfinite.bin");
  fs::remove(cfg.checkpoint_path);
  try {
    pretrain(code, DepolarizingModel{code.n, 0.1}, cfg);
    FAIL() << "expected NonFinite";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
  ASSERT_TRUE(fs::exists(cfg.checkpoint_path));
  EXPECT_TRUE(load_checkpoint(cfg.checkpoint_path).all_finite());
  fs::remove(cfg.checkpoint_path);
}

TEST(Pretrain, RejectsMismatchedNoise) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  EXPECT_THROW(pretrain(code, DepolarizingModel{4, 0.1}, toy_config(1)), Error);
}

TEST(Mismatch, EvalAtTrainRateIsMatchedByConstruction) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  auto cfg = toy_config(30);
  const auto rows = train_mismatched(code, 0.2, {0.2}, cfg, 500, 1);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].difference, 0.0);
  EXPECT_EQ(rows[0].mismatched.failures, rows[0].matched.failures);
  EXPECT_THROW(train_mismatched(code, 0.6, {0.1}, cfg, 10, 1), Error);
}

}  // namespace
}  // namespace qecgpt
