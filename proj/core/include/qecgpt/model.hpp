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

#include <Eigen/Core>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qecgpt/random.hpp"
#include "qecgpt/stabilizer.hpp"

namespace qecgpt {

/// Binary sequences, one per row.
using BitRows = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

BitRows to_rows(const std::vector<gf2::BitVec>& vectors, std::size_t width);
BitRows sequence_rows(const std::vector<ElsConfig>& configs);
gf2::BitVec row_to_bitvec(const BitRows& rows, std::size_t r, std::size_t start, std::size_t len);

struct ModelConfig {
  std::size_t seq_len = 0;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 64;

  /// Throws Error(kBadConfig) unless all sizes are positive and d_model is a
  /// multiple of n_heads.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Name of the feed-forward nonlinearity, stored in checkpoints.
inline constexpr const char* kActivation = "gelu_tanh";

/// Named tensors laid out back to back in one flat array.
class ParamLayout {
 public:
  enum LayerTensor {
    kLn1Gain,
    kLn1Bias,
    kQkvWeight,  // d_model x 3 d_model, columns [Q | K | V]
    kQkvBias,
    kOutWeight,
    kOutBias,
    kLn2Gain,
    kLn2Bias,
    kFf1Weight,
    kFf1Bias,
    kFf2Weight,
    kFf2Bias,
    kLayerTensors
  };

  struct Tensor {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
  };

  explicit ParamLayout(const ModelConfig& config);

  std::size_t token_embedding() const noexcept { return 0; }
  std::size_t position_embedding() const noexcept { return 1; }
  std::size_t layer(std::size_t l, LayerTensor t) const noexcept { return 2 + l * kLayerTensors + t; }
  std::size_t final_gain() const noexcept { return 2 + n_layers_ * kLayerTensors; }
  std::size_t final_bias() const noexcept { return final_gain() + 1; }
  /// seq_len x d_model: one logistic head per position.
  std::size_t head_weight() const noexcept { return final_gain() + 2; }
  std::size_t head_bias() const noexcept { return final_gain() + 3; }

  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }
  std::size_t size() const noexcept { return size_; }

 private:
  std::size_t n_layers_ = 0;
  std::vector<Tensor> tensors_;
  std::size_t size_ = 0;
};

/// Flat parameter storage. Aligned so vectorised reductions round the same
/// way on every run.
template <class S>
using ParamVector = std::vector<S, Eigen::aligned_allocator<S>>;

/// All transformer weights in a single flat array. Gradients use the same type.
template <class S>
class ModelParams {
 public:
  using Scalar = S;
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  ModelParams() : layout_(ModelConfig{1, 1, 1, 1, 1}) {}
  /// All-zero parameters.
  explicit ModelParams(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  ParamVector<S>& values() noexcept { return values_; }
  const ParamVector<S>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  MatrixMap tensor(std::size_t id);
  ConstMatrixMap tensor(std::size_t id) const;

  template <class T>
  ModelParams<T> cast() const {
    ModelParams<T> out(config_);
    for (std::size_t i = 0; i < values_.size(); ++i) out.values()[i] = static_cast<T>(values_[i]);
    return out;
  }

  bool all_finite() const;

 private:
  ModelConfig config_;
  ParamLayout layout_;
  ParamVector<S> values_;
};

/// Gaussian initialisation: weight matrices have standard deviation
/// 1/sqrt(fan_in), embeddings and heads 1/sqrt(d_model), gains 1, biases 0.
template <class S>
ModelParams<S> init_params(const ModelConfig& config, std::uint64_t seed);

/// Number of batched forward passes since process start (or the last reset).
/// A pass over B sequences counts once.
std::uint64_t forward_pass_count();
void reset_forward_pass_count();

/// Logits z with sigmoid(z[b, i]) = q(x_i = 1 | x_<i) for the first `len`
/// positions of every row. Only bits x_0 .. x_{len-2} are read.
template <class S>
typename ModelParams<S>::Matrix forward_logits(const ModelParams<S>& params, const BitRows& x,
                                               std::size_t len);

/// Per-position q(x_i = 1 | x_<i) over the full sequence.
template <class S>
std::vector<double> forward(const ModelParams<S>& params, const gf2::BitVec& x);

/// Sum over all positions of log q(x_i | x_<i).
template <class S>
std::vector<double> log_joint(const ModelParams<S>& params, const BitRows& x);
template <class S>
double log_joint(const ModelParams<S>& params, const ElsConfig& config);

/// log q(beta | gamma): sum of the per-bit log conditionals over the beta
/// positions with gamma as prefix. Rows of `prefix` hold [gamma, beta].
template <class S>
std::vector<double> log_conditional_beta(const ModelParams<S>& params, const BitRows& prefix,
                                         std::size_t m, std::size_t k);
template <class S>
double log_conditional_beta(const ModelParams<S>& params, const gf2::BitVec& beta,
                            const gf2::BitVec& gamma);

enum class GenerateMode { kArgmax, kSample };

struct BetaGeneration {
  BitRows beta;  // rows x 2k
  /// log q of the chosen bit at each beta position.
  Eigen::MatrixXd bit_logprob;
};

/// Fills the 2k beta bits one at a time using exactly 2k batched forward
/// passes. Argmax picks 1 only when q(1 | .) > 0.5.
template <class S>
BetaGeneration generate_beta(const ModelParams<S>& params, const BitRows& gamma, std::size_t k,
                             GenerateMode mode, Rng* rng = nullptr);

struct AlphaSamples {
  BitRows alpha;                    // N x m
  std::vector<double> log_proposal;  // log q(alpha | beta, gamma)
};

/// Position-by-position evaluation with cached keys and values, for ancestral
/// sampling. Matches forward_logits up to rounding; not counted as a pass.
template <class S>
class IncrementalForward {
 public:
  using Matrix = typename ModelParams<S>::Matrix;

  IncrementalForward(const ModelParams<S>& params, std::size_t batch);

  std::size_t position() const noexcept { return pos_; }
  /// Logits of position `position()` for every row, reading bit
  /// position() - 1 of each row of x; then advances by one.
  Eigen::Matrix<S, Eigen::Dynamic, 1> step(const BitRows& x);

 private:
  const ModelParams<S>* params_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  std::vector<Matrix> keys_;    // per layer, (batch * seq_len) x d_model
  std::vector<Matrix> values_;
};

/// Ancestral sampling of alpha given rows of [gamma, beta] prefixes. Every
/// prefix row is used as-is; callers repeat rows to draw several samples.
template <class S>
AlphaSamples sample_alpha(const ModelParams<S>& params, const BitRows& prefix, std::size_t m,
                          std::size_t k, Rng& rng);
/// N samples for a single (beta, gamma).
template <class S>
AlphaSamples sample_alpha(const ModelParams<S>& params, const gf2::BitVec& beta,
                          const gf2::BitVec& gamma, Rng& rng, std::size_t n_samples);

/// Mean negative log-likelihood over a batch and its exact gradient.
template <class S>
struct NllGradient {
  double nll = 0.0;
  ModelParams<S> grad;
};

/// Gradients accumulate over fixed-size chunks in a fixed order, so results
/// are reproducible. Throws Error(kNonFinite) on any non-finite value.
template <class S>
NllGradient<S> grad_nll(const ModelParams<S>& params, const BitRows& batch);

template <class S>
double mean_nll(const ModelParams<S>& params, const BitRows& batch);

/// Checkpoint container: "qecgpt-ckpt-1\n", 8-byte little-endian header
/// length, JSON header, then every tensor as little-endian float32 in layout
/// order.
struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::string code;
  std::string noise;
};

void save_checkpoint(std::ostream& out, const ModelParams<float>& params, const CheckpointInfo& info);
void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const CheckpointInfo& info);
ModelParams<float> load_checkpoint(std::istream& in, CheckpointInfo* info = nullptr);
ModelParams<float> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace qecgpt
