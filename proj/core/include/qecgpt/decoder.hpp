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
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qecgpt/model.hpp"
#include "qecgpt/noise.hpp"
#include "qecgpt/stabilizer.hpp"

namespace qecgpt {

/// Tolerances and guards shared by decoders and their tests.
struct DecoderLimits {
  /// Largest k for which refinement enumerates all 4^k logical classes.
  static constexpr std::size_t kRefineMaxK = 8;
  /// Exact oracles enumerate 2^(2k + m) configurations per syndrome.
  static constexpr std::size_t kExactMaxBits = 26;
  static constexpr double kNormalizationTol = 1e-6;
  static constexpr double kSigmaGate = 3.0;
};

enum class DecodeMethod { kPretrained, kRefined, kExactMld, kExactMinWeight, kModelArgmax };

std::string_view to_string(DecodeMethod method);
/// Accepts "pretrained", "refined", "exact_mld", "exact_minweight", "model_argmax".
DecodeMethod parse_decode_method(std::string_view name);

/// Logical classes are indexed in lexicographic order of the beta bit string:
/// bit j of beta is bit (2k - 1 - j) of the index.
std::size_t beta_index(const gf2::BitVec& beta);
gf2::BitVec beta_from_index(std::size_t index, std::size_t k);

struct DecodeResult {
  gf2::BitVec beta_hat;
  /// log q of each chosen beta bit (pretrained only).
  std::vector<double> bit_logprob;
  DecodeMethod method = DecodeMethod::kPretrained;
  /// Log-probability (or estimate) of every logical class, when computed.
  std::vector<double> coset_logprob;
};

struct LogicalErrorRecord {
  gf2::BitVec gamma;
  gf2::BitVec beta_true;
  gf2::BitVec beta_hat;
  bool success = false;
};

struct RateEstimate {
  double rate = 0.0;
  double std_error = 0.0;
  std::size_t failures = 0;
  std::size_t trials = 0;

  static RateEstimate from_counts(std::size_t failures, std::size_t trials);
};

/// An autoregressive binary model exposed through its conditionals.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;
  virtual std::size_t seq_len() const = 0;
  /// Logit of q(x_pos = 1 | x_<pos) for every row of x. Only columns < pos
  /// are read.
  virtual std::vector<double> logits(const BitRows& x, std::size_t pos) const = 0;
  /// Fills columns [start, seq_len()) of x by ancestral sampling and returns
  /// the log-probability of the drawn bits per row. The default calls
  /// logits() once per position.
  virtual std::vector<double> sample_tail(BitRows& x, std::size_t start, Rng& rng) const;
};

class TransformerModel final : public SequenceModel {
 public:
  explicit TransformerModel(const ModelParams<float>& params) : params_(&params) {}
  std::size_t seq_len() const override { return params_->config().seq_len; }
  std::vector<double> logits(const BitRows& x, std::size_t pos) const override;
  std::vector<double> sample_tail(BitRows& x, std::size_t start, Rng& rng) const override;

 private:
  const ModelParams<float>* params_;
};

/// log p(E) for an error; -infinity for impossible errors.
using ErrorLogProb = std::function<double(const PauliVec&)>;

/// Pointwise log-probability of a noise model; Error(kUnevaluableModel) when
/// the model has none.
ErrorLogProb error_logprob(const NoiseModel& noise);

/// Sequential argmax over the beta conditionals: 2k batched model passes.
DecodeResult decode_pretrained(const ModelParams<float>& params, const CodeTables& code,
                               const gf2::BitVec& gamma);
std::vector<DecodeResult> decode_pretrained(const ModelParams<float>& params, const CodeTables& code,
                                            const std::vector<gf2::BitVec>& gammas);

/// argmax over all 4^k classes of the model's q(beta | gamma).
std::vector<DecodeResult> decode_model_argmax(const ModelParams<float>& params, const CodeTables& code,
                                              const std::vector<gf2::BitVec>& gammas);

/// Importance-sampling estimate of p(beta, gamma) for every logical class:
/// alpha ~ q(alpha | beta, gamma), weight p(alpha, beta, gamma) / q(alpha |
/// beta, gamma), averaged in the log domain. beta_hat maximises the estimate.
DecodeResult refine(const SequenceModel& model, const CodeTables& code, const ErrorLogProb& logprob,
                    const gf2::BitVec& gamma, std::size_t n_samples, Rng& rng);
DecodeResult refine(const ModelParams<float>& params, const CodeTables& code, const NoiseModel& noise,
                    const gf2::BitVec& gamma, std::size_t n_samples, Rng& rng);
std::vector<DecodeResult> refine(const SequenceModel& model, const CodeTables& code,
                                 const ErrorLogProb& logprob, const std::vector<gf2::BitVec>& gammas,
                                 std::size_t n_samples, Rng& rng);

/// Exact coset sums by enumeration of all (beta, alpha). Ties go to the
/// lexicographically smallest beta. Error(kTooLarge) past the guard.
DecodeResult exact_mld(const CodeTables& code, const NoiseModel& noise, const gf2::BitVec& gamma);
DecodeResult exact_mld(const CodeTables& code, const ErrorLogProb& logprob, const gf2::BitVec& gamma);

/// Logical class of the single most probable error with syndrome gamma.
/// coset_logprob holds, per class, the log-probability of its best error.
DecodeResult exact_minweight(const CodeTables& code, const NoiseModel& noise, const gf2::BitVec& gamma);
DecodeResult exact_minweight(const CodeTables& code, const ErrorLogProb& logprob,
                             const gf2::BitVec& gamma);

/// Drawn errors reduced to their syndromes and true logical classes, plus a
/// hash of the error stream for checking that runs are paired.
struct ErrorBatch {
  std::vector<gf2::BitVec> gamma;
  std::vector<gf2::BitVec> beta;
  std::uint64_t hash = 0;
};

ErrorBatch sample_errors(const CodeTables& code, const NoiseModel& noise, std::size_t trials,
                         std::uint64_t seed);

struct DecodeOptions {
  std::size_t refine_samples = 64;
  std::uint64_t seed = 0;
};

/// Decodes every syndrome with one method. Repeated syndromes are decoded
/// once. `params` is required by the model-based methods.
std::vector<gf2::BitVec> decode_syndromes(DecodeMethod method, const CodeTables& code,
                                          const NoiseModel& noise, const ModelParams<float>* params,
                                          const std::vector<gf2::BitVec>& gammas,
                                          const DecodeOptions& options = {});

std::vector<LogicalErrorRecord> score(const ErrorBatch& batch, const std::vector<gf2::BitVec>& beta_hat);

/// Samples `trials` errors from the seed's noise stream, decodes them and
/// reports the failure rate with its binomial standard error.
RateEstimate logical_error_rate(const CodeTables& code, const NoiseModel& noise, DecodeMethod method,
                                std::size_t trials, std::uint64_t seed,
                                const ModelParams<float>* params = nullptr,
                                const DecodeOptions& options = {},
                                std::vector<LogicalErrorRecord>* records = nullptr);

}  // namespace qecgpt
