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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qecgpt/decoder.hpp"
#include "qecgpt/model.hpp"
#include "qecgpt/noise.hpp"
#include "qecgpt/stabilizer.hpp"

namespace qecgpt {

struct TrainConfig {
  std::string profile = "desk";
  /// seq_len is filled in from the code at training time.
  ModelConfig model;
  std::size_t batch = 512;
  std::size_t steps = 20000;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;
  std::size_t eval_every = 1000;
  /// Zero disables periodic checkpoints; the final one is still written when
  /// `checkpoint_path` is set.
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_path;
  /// JSON-lines {step, nll, wall_ms}; empty disables.
  std::filesystem::path metrics_path;

  /// Named presets: "full" (d_model 256, batch 10000, 100k steps), "desk"
  /// (d_model 64, batch 512, 20k steps) and "quick" (a one-core budget).
  static TrainConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();

  void validate() const;
};

/// JSON round trip. Fields absent from the object keep the values of the
/// named "profile" (or "desk" when no profile is given).
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& config);

struct TrainReport {
  std::size_t step = 0;
  /// Mean training NLL in nats per sample over the steps since the last report.
  double nll = 0.0;
  double wall_ms = 0.0;
  std::filesystem::path checkpoint;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<TrainReport> reports;
};

using ReportCallback = std::function<void(const TrainReport&)>;

/// Adam with fixed coefficients and constant learning rate.
class Adam {
 public:
  Adam(std::size_t size, double lr, double beta1, double beta2, double eps);
  void step(ParamVector<float>& params, const ParamVector<float>& grad);
  std::size_t steps_taken() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  ParamVector<float> m_;
  ParamVector<float> v_;
};

/// Minimises the mean NLL of fresh noise samples. A NonFinite error aborts
/// training after writing the last good parameters to `checkpoint_path`.
TrainResult pretrain(const CodeTables& code, const NoiseModel& noise, const TrainConfig& config,
                     const ReportCallback& on_report = {});

struct KlEstimate {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = false;
};

/// Forward KL(P || q). Exact enumeration over all 4^n errors when 2n <= 14,
/// otherwise a Monte Carlo average over `samples` draws. Needs a noise model
/// with pointwise probabilities (Error(kUnevaluableModel) otherwise).
KlEstimate evaluate_kl(const ModelParams<float>& params, const CodeTables& code, const NoiseModel& noise,
                       std::size_t samples = 100000, std::uint64_t seed = 0);

/// Shannon entropy of the noise distribution in nats (depolarizing only).
double noise_entropy(const NoiseModel& noise);

/// Mean NLL of `samples` fresh draws, with its standard error.
KlEstimate heldout_nll(const ModelParams<float>& params, const CodeTables& code, const NoiseModel& noise,
                       std::size_t samples, std::uint64_t seed);

struct MismatchRow {
  double p = 0.0;
  RateEstimate mismatched;
  RateEstimate matched;
  /// mismatched - matched failure rate on identical error samples.
  double difference = 0.0;
  double difference_std_error = 0.0;
};

/// Decodes depolarizing noise at every eval rate with a model trained at
/// train_p and with one trained at the eval rate, on identical samples.
/// Matched models missing from `matched` are trained with `config`.
std::vector<MismatchRow> train_mismatched(const CodeTables& code, double train_p,
                                          const std::vector<double>& eval_ps, const TrainConfig& config,
                                          std::size_t trials, std::uint64_t seed,
                                          const ModelParams<float>* mismatched = nullptr,
                                          const std::map<double, ModelParams<float>>* matched = nullptr);

}  // namespace qecgpt
