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
#include "qecgpt/training.hpp"

namespace qecgpt {

/// Noise family of a sweep. For "depolarizing" the grid holds error rates p;
/// for "ising" it holds inverse temperatures beta.
struct NoiseSpec {
  std::string kind = "depolarizing";
  std::size_t degree = 4;
  double field = 0.3;
  std::uint64_t graph_seed = 1;

  /// "depolarizing" or "ising[:degree=D][,field=F][,seed=S]".
  static NoiseSpec parse(std::string_view text);
  std::string to_string() const;
  NoiseModel at(std::size_t n, double value) const;
  bool is_ising() const { return kind == "ising"; }
};

struct ExperimentConfig {
  std::string code = "surface:3";
  NoiseSpec noise;
  TrainConfig train = TrainConfig::preset("desk");
  std::vector<DecodeMethod> methods{DecodeMethod::kPretrained, DecodeMethod::kExactMld};
  std::vector<double> grid{0.05, 0.10, 0.15};
  std::size_t trials = 10000;
  std::uint64_t seed = 1;
  std::size_t refine_samples = 64;
  /// Writes measured wall times; off gives byte-reproducible CSVs.
  bool record_wall_time = true;
  std::filesystem::path output;
  /// Per-grid-point checkpoints are loaded from here when present and
  /// written after training otherwise. Empty disables.
  std::filesystem::path checkpoint_dir;

  /// Throws Error(kBadConfig) on unknown profiles, empty lists or grid values
  /// outside (0, 0.5) for depolarizing noise.
  void validate() const;
};

ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& config);

struct SweepRow {
  double p = 0.0;
  DecodeMethod method = DecodeMethod::kExactMld;
  double logical_error_rate = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  double wall_ms = 0.0;
  /// Per-trial failure flags and the hash of the error stream they came from.
  std::vector<bool> failed;
  std::uint64_t error_hash = 0;
};

/// Seeds of the named substreams for grid point `index`.
struct SweepSeeds {
  std::uint64_t noise = 0;
  std::uint64_t train = 0;
  std::uint64_t decode = 0;
};
SweepSeeds sweep_seeds(std::uint64_t root, std::size_t index);

/// Supplies trained parameters for one grid point (for example a cache
/// shared between experiments). Returning nullptr falls back to training.
using ModelProvider = std::function<const ModelParams<float>*(std::size_t index, double value)>;

/// Runs every (grid value, method) pair on one shared error sample per grid
/// value. Rows come back ordered by grid value, then method. Grid points run
/// on up to thread_count() threads.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const ModelProvider& provider = {},
                                const std::function<void(const std::string&)>& log = {});

/// QECGPT_THREADS, or 1 when unset or invalid.
std::size_t thread_count();

/// CSV with '#' header lines for the seeds and each grid point's error hash,
/// then "p,method,logical_error_rate,stderr,trials,wall_ms".
void write_sweep_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<SweepRow>& rows);
std::string sweep_csv(const ExperimentConfig& config, const std::vector<SweepRow>& rows);

struct MethodComparison {
  double p = 0.0;
  DecodeMethod a = DecodeMethod::kPretrained;
  DecodeMethod b = DecodeMethod::kExactMld;
  /// Failure-rate difference a - b on paired trials.
  double difference = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  /// Trials where exactly one of the two failed.
  std::size_t only_a = 0;
  std::size_t only_b = 0;
};

/// Paired difference of a and b at every grid value where both appear, with
/// a normal-approximation interval at `z` standard errors. Throws
/// Error(kUnpairedData) when the two rows were not decoded on the same errors.
std::vector<MethodComparison> compare_methods(const std::vector<SweepRow>& rows, DecodeMethod a,
                                              DecodeMethod b, double z = 1.96);

struct SelfTestCheck {
  std::string name;
  bool ok = false;
  std::string detail;
};

/// Code invariants and ELS round trips on the standard small codes and random
/// punctures, plus model normalization and exact-oracle normalization.
std::vector<SelfTestCheck> run_selftest();

}  // namespace qecgpt
