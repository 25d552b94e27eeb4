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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qecgpt/random.hpp"
#include "qecgpt/stabilizer.hpp"

namespace qecgpt {

/// Independent single-qubit depolarizing noise: I with probability 1 - p and
/// each of X, Y, Z with probability p / 3.
struct DepolarizingModel {
  std::size_t n = 0;
  double p = 0.0;
};

/// Correlated noise from an Ising model on a random regular graph. Spins are
/// drawn from exp(-H) with H = -beta sum_<ij> J_ij s_i s_j - h sum_i s_i; a
/// spin of -1 puts a uniformly random X, Y or Z on its qubit.
struct IsingNoiseModel {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<double> couplings;
  double field = 0.3;
  double beta = 0.0;
  /// adjacency[i] lists (neighbour, coupling).
  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency;

  /// Random `degree`-regular graph via the configuration model with rejection
  /// of self-loops and multi-edges; couplings ~ U(0, 1).
  static IsingNoiseModel random_regular(std::size_t n, double beta, std::uint64_t seed,
                                        std::size_t degree = 4, double field = 0.3);

  /// H(s) for spins in {-1, +1}.
  double energy(std::span<const std::int8_t> spins) const;
  /// Energy change of flipping spin i.
  double flip_delta(std::span<const std::int8_t> spins, std::size_t i) const;
};

using NoiseModel = std::variant<DepolarizingModel, IsingNoiseModel>;

std::size_t qubit_count(const NoiseModel& model);
std::string describe(const NoiseModel& model);

PauliVec sample_depolarizing(const DepolarizingModel& model, Rng& rng);

/// Log-probability of an error. Returns -infinity for impossible errors
/// (e.g. a non-identity error at p = 0).
double logprob_depolarizing(const DepolarizingModel& model, const PauliVec& error);

/// Pointwise log-probability when the model has a tractable normalisation;
/// std::nullopt for the Ising model.
std::optional<double> log_probability(const NoiseModel& model, const PauliVec& error);

/// Maps spins to a Pauli error: +1 -> I, -1 -> X, Y or Z uniformly.
PauliVec spins_to_error(std::span<const std::int8_t> spins, Rng& rng);

/// Single-spin-flip Metropolis-Hastings chain with random site selection.
/// Chains start from the all +1 state, the ground state of the field term; a
/// random start freezes into the metastable all -1 domain at large beta.
class IsingChain {
 public:
  explicit IsingChain(const IsingNoiseModel& model);

  void update(Rng& rng);
  void sweep(Rng& rng) {
    for (std::size_t i = 0; i < model_->n; ++i) update(rng);
  }
  const std::vector<std::int8_t>& spins() const noexcept { return spins_; }

 private:
  const IsingNoiseModel* model_;
  std::vector<std::int8_t> spins_;
};

/// Runs one chain for `sweeps` sweeps; after `burn_in`
/// sweeps every `thin`-th sweep contributes one error.
std::vector<PauliVec> sample_ising(const IsingNoiseModel& model, Rng& rng, std::size_t sweeps,
                                   std::size_t burn_in, std::size_t thin);

/// Stateful batch sampler. Depolarizing draws are i.i.d.; Ising draws come
/// from one persistent chain per batch slot, each burned in once and advanced
/// `thin_updates` single-site updates between retained samples.
class ErrorSampler {
 public:
  ErrorSampler(NoiseModel model, std::uint64_t seed);

  std::vector<PauliVec> sample(std::size_t batch);
  const NoiseModel& model() const noexcept { return model_; }

  /// Defaults: burn-in of 10 n sweeps, thinning of n single-site updates.
  std::size_t burn_in_sweeps = 0;
  std::size_t thin_updates = 0;

 private:
  NoiseModel model_;
  Rng rng_;
  std::vector<IsingChain> chains_;
};

/// Draws `batch` errors and maps each to its [gamma, beta, alpha] configuration.
std::vector<ElsConfig> sample_training_batch(const CodeTables& code, ErrorSampler& sampler,
                                             std::size_t batch);

}  // namespace qecgpt
