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

#include "qecgpt/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "qecgpt/error.hpp"

namespace qecgpt {

IsingNoiseModel IsingNoiseModel::random_regular(std::size_t n, double beta, std::uint64_t seed,
                                                std::size_t degree, double field) {
  if (degree >= n || (n * degree) % 2 != 0) {
    throw Error(ErrorCode::kBadConfig, "no simple " + std::to_string(degree) +
                                           "-regular graph on " + std::to_string(n) + " vertices");
  }
  Rng rng(derive_seed(seed, "ising-graph"));
  std::vector<std::size_t> stubs;
  for (std::size_t v = 0; v < n; ++v) stubs.insert(stubs.end(), degree, v);

  IsingNoiseModel model;
  model.n = n;
  model.beta = beta;
  model.field = field;
  constexpr int kMaxAttempts = 1'000'000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::shuffle(stubs.begin(), stubs.end(), rng);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    bool simple = true;
    for (std::size_t i = 0; i < stubs.size(); i += 2) {
      auto a = stubs[i];
      auto b = stubs[i + 1];
      if (a > b) std::swap(a, b);
      if (a == b || !seen.insert({a, b}).second) {
        simple = false;
        break;
      }
    }
    if (!simple) continue;
    model.edges.assign(seen.begin(), seen.end());
    break;
  }
  if (model.edges.empty()) throw Error(ErrorCode::kBadConfig, "regular graph construction failed");

  std::uniform_real_distribution<double> coupling(0.0, 1.0);
  model.adjacency.assign(n, {});
  for (const auto& [a, b] : model.edges) {
    const double j = coupling(rng);
    model.couplings.push_back(j);
    model.adjacency[a].emplace_back(b, j);
    model.adjacency[b].emplace_back(a, j);
  }
  return model;
}

double IsingNoiseModel::energy(std::span<const std::int8_t> spins) const {
  double pair = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    pair += couplings[e] * spins[edges[e].first] * spins[edges[e].second];
  }
  double magnet = 0.0;
  for (auto s : spins) magnet += s;
  return -beta * pair - field * magnet;
}

double IsingNoiseModel::flip_delta(std::span<const std::int8_t> spins, std::size_t i) const {
  double local = 0.0;
  for (const auto& [j, coupling] : adjacency[i]) local += coupling * spins[j];
  return 2.0 * spins[i] * (beta * local + field);
}

std::size_t qubit_count(const NoiseModel& model) {
  return std::visit([](const auto& m) { return m.n; }, model);
}

std::string describe(const NoiseModel& model) {
  std::ostringstream s;
  if (const auto* d = std::get_if<DepolarizingModel>(&model)) {
    s << "depolarizing(p=" << d->p << ")";
  } else {
    const auto& ising = std::get<IsingNoiseModel>(model);
    s << "ising(beta=" << ising.beta << ", h=" << ising.field << ", edges=" << ising.edges.size() << ")";
  }
  return s.str();
}

PauliVec sample_depolarizing(const DepolarizingModel& model, Rng& rng) {
  PauliVec e(2 * model.n);
  for (std::size_t q = 0; q < model.n; ++q) {
    if (uniform01(rng) >= model.p) continue;
    switch (rng() % 3) {
      case 0: e.set(model.n + q, true); break;  // X
      case 1:                                   // Y
        e.set(q, true);
        e.set(model.n + q, true);
        break;
      default: e.set(q, true); break;  // Z
    }
  }
  return e;
}

double logprob_depolarizing(const DepolarizingModel& model, const PauliVec& error) {
  if (error.size() != 2 * model.n) {
    throw Error(ErrorCode::kLengthMismatch, "Pauli of length " + std::to_string(error.size()) +
                                                " for n=" + std::to_string(model.n));
  }
  std::size_t flipped = 0;
  for (std::size_t q = 0; q < model.n; ++q) {
    if (error.get(q) || error.get(model.n + q)) ++flipped;
  }
  const double identity = flipped == model.n ? 0.0 : std::log1p(-model.p);
  const double pauli = flipped == 0 ? 0.0 : std::log(model.p / 3.0);
  return static_cast<double>(model.n - flipped) * identity + static_cast<double>(flipped) * pauli;
}

std::optional<double> log_probability(const NoiseModel& model, const PauliVec& error) {
  if (const auto* d = std::get_if<DepolarizingModel>(&model)) return logprob_depolarizing(*d, error);
  return std::nullopt;
}

PauliVec spins_to_error(std::span<const std::int8_t> spins, Rng& rng) {
  const std::size_t n = spins.size();
  PauliVec e(2 * n);
  for (std::size_t q = 0; q < n; ++q) {
    if (spins[q] > 0) continue;
    switch (rng() % 3) {
      case 0: e.set(n + q, true); break;
      case 1:
        e.set(q, true);
        e.set(n + q, true);
        break;
      default: e.set(q, true); break;
    }
  }
  return e;
}

IsingChain::IsingChain(const IsingNoiseModel& model) : model_(&model), spins_(model.n, 1) {}

void IsingChain::update(Rng& rng) {
  const std::size_t i = static_cast<std::size_t>(rng() % model_->n);
  const double delta = model_->flip_delta(spins_, i);
  if (delta <= 0.0 || uniform01(rng) < std::exp(-delta)) spins_[i] = static_cast<std::int8_t>(-spins_[i]);
}

std::vector<PauliVec> sample_ising(const IsingNoiseModel& model, Rng& rng, std::size_t sweeps,
                                   std::size_t burn_in, std::size_t thin) {
  if (sweeps < burn_in) throw Error(ErrorCode::kBadConfig, "sweeps must be at least burn_in");
  if (thin == 0) throw Error(ErrorCode::kBadConfig, "thin must be positive");
  IsingChain chain(model);
  for (std::size_t s = 0; s < burn_in; ++s) chain.sweep(rng);
  std::vector<PauliVec> out;
  for (std::size_t s = burn_in; s < sweeps; ++s) {
    chain.sweep(rng);
    if ((s - burn_in + 1) % thin == 0) out.push_back(spins_to_error(chain.spins(), rng));
  }
  return out;
}

ErrorSampler::ErrorSampler(NoiseModel model, std::uint64_t seed)
    : model_(std::move(model)), rng_(seed) {
  const std::size_t n = qubit_count(model_);
  burn_in_sweeps = 10 * n;
  thin_updates = n;
}

std::vector<PauliVec> ErrorSampler::sample(std::size_t batch) {
  std::vector<PauliVec> out;
  out.reserve(batch);
  if (const auto* d = std::get_if<DepolarizingModel>(&model_)) {
    for (std::size_t b = 0; b < batch; ++b) out.push_back(sample_depolarizing(*d, rng_));
    return out;
  }
  const auto& ising = std::get<IsingNoiseModel>(model_);
  while (chains_.size() < batch) {
    IsingChain chain(ising);
    for (std::size_t s = 0; s < burn_in_sweeps; ++s) chain.sweep(rng_);
    chains_.push_back(std::move(chain));
  }
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t u = 0; u < thin_updates; ++u) chains_[b].update(rng_);
    out.push_back(spins_to_error(chains_[b].spins(), rng_));
  }
  return out;
}

std::vector<ElsConfig> sample_training_batch(const CodeTables& code, ErrorSampler& sampler,
                                             std::size_t batch) {
  if (qubit_count(sampler.model()) != code.n) {
    throw Error(ErrorCode::kShapeMismatch, "noise model and code disagree on qubit count");
  }
  std::vector<ElsConfig> out;
  out.reserve(batch);
  for (const auto& e : sampler.sample(batch)) out.push_back(pauli_to_els(code, e));
  return out;
}

}  // namespace qecgpt
