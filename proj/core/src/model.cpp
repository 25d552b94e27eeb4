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

#include "qecgpt/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include "json.hpp"
#include <sstream>

#include "qecgpt/error.hpp"

namespace qecgpt {

namespace {

std::atomic<std::uint64_t> g_forward_passes{0};

constexpr std::size_t kInferenceChunk = 32;
constexpr std::size_t kGradChunk = 32;
constexpr std::size_t kSampleChunk = 1024;
constexpr double kLayerNormEps = 1e-5;

template <class S>
using Mat = typename ModelParams<S>::Matrix;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
S softplus(S z) {
  using std::exp;
  using std::log1p;
  return std::max(z, S(0)) + log1p(exp(-std::abs(z)));
}

template <class S>
S sigmoid(S z) {
  using std::exp;
  if (z >= 0) return S(1) / (S(1) + exp(-z));
  const S e = exp(z);
  return e / (S(1) + e);
}

/// log q(bit | .) from the logit of q(1 | .).
template <class S>
double log_bit(S z, bool bit) {
  return static_cast<double>(bit ? -softplus(-z) : -softplus(z));
}

template <class S>
struct GeluConst {
  static constexpr S kC = S(0.7978845608028654);  // sqrt(2 / pi)
  static constexpr S kA = S(0.044715);
};

// Array forms so Eigen can vectorise tanh.
template <class S>
Mat<S> gelu(const Mat<S>& z) {
  constexpr S c = GeluConst<S>::kC;
  constexpr S a = GeluConst<S>::kA;
  const auto x = z.array();
  return (S(0.5) * x * (S(1) + (c * (x + a * x.cube())).tanh())).matrix();
}

template <class S>
Mat<S> gelu_grad(const Mat<S>& z) {
  constexpr S c = GeluConst<S>::kC;
  constexpr S a = GeluConst<S>::kA;
  const auto x = z.array();
  const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> t = (c * (x + a * x.cube())).tanh();
  return (S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t.square()) * c * (S(1) + S(3) * a * x.square())).matrix();
}

template <class S>
struct LayerCache {
  Mat<S> x;
  Mat<S> xhat1;
  Vec<S> rstd1;
  Mat<S> a;
  Mat<S> qkv;
  Mat<S> probs;
  Mat<S> attn;
  Mat<S> x1;
  Mat<S> xhat2;
  Vec<S> rstd2;
  Mat<S> c;
  Mat<S> z;
  Mat<S> g;
};

template <class S>
struct ForwardCache {
  std::size_t batch = 0;
  std::size_t len = 0;
  std::vector<std::uint8_t> tokens;  // batch * len, token fed at each position
  std::vector<LayerCache<S>> layers;
  Mat<S> xf;
  Mat<S> xhatf;
  Vec<S> rstdf;
  Mat<S> hf;
};

template <class S, class Gain, class Bias>
void layer_norm(const Mat<S>& x, const Gain& gain, const Bias& bias, Mat<S>& xhat, Vec<S>& rstd,
                Mat<S>& y) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  xhat.resize(rows, cols);
  y.resize(rows, cols);
  rstd.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const S mu = x.row(r).mean();
    xhat.row(r) = x.row(r).array() - mu;
    const S var = xhat.row(r).squaredNorm() / static_cast<S>(cols);
    using std::sqrt;
    rstd(r) = S(1) / sqrt(var + S(kLayerNormEps));
    xhat.row(r) *= rstd(r);
    y.row(r) = xhat.row(r).cwiseProduct(gain) + bias;
  }
}

template <class S, class Gain, class GradGain, class GradBias>
void layer_norm_backward(const Mat<S>& dy, const Mat<S>& xhat, const Vec<S>& rstd, const Gain& gain,
                         Mat<S>& dx, GradGain&& dgain, GradBias&& dbias) {
  const auto rows = dy.rows();
  const auto cols = static_cast<S>(dy.cols());
  dx.resize(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    dgain += dy.row(r).cwiseProduct(xhat.row(r));
    dbias += dy.row(r);
    const auto dxhat = dy.row(r).cwiseProduct(gain).eval();
    const S mean_d = dxhat.sum() / cols;
    const S mean_dx = dxhat.dot(xhat.row(r)) / cols;
    dx.row(r) = rstd(r) * (dxhat.array() - mean_d - xhat.row(r).array() * mean_dx).matrix();
  }
}

template <class S>
void check_finite(const Mat<S>& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::kNonFinite, std::string("non-finite values in ") + what);
  }
}

/// One head of causal attention for one sequence. `qkv` points at the head's
/// query columns; keys and values sit `kv_offset` and 2 * kv_offset further.
/// Row i attends to rows 0..i; probabilities land in the len x len `probs`.
template <class S>
void attention_forward(const S* qkv, std::size_t stride, std::size_t kv_offset, std::size_t dh,
                       std::size_t len, S scale, S* probs, S* out, std::size_t out_stride) {
  for (std::size_t i = 0; i < len; ++i) {
    const S* q = qkv + i * stride;
    S* p = probs + i * len;
    S mx = -std::numeric_limits<S>::infinity();
    for (std::size_t j = 0; j <= i; ++j) {
      const S* k = qkv + j * stride + kv_offset;
      S acc = 0;
      for (std::size_t c = 0; c < dh; ++c) acc += q[c] * k[c];
      p[j] = acc * scale;
      mx = std::max(mx, p[j]);
    }
    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> row(p, static_cast<Eigen::Index>(i + 1));
    row = (row - mx).exp();
    const S inv = S(1) / row.sum();
    S* o = out + i * out_stride;
    for (std::size_t j = 0; j <= i; ++j) {
      p[j] *= inv;
      const S* v = qkv + j * stride + 2 * kv_offset;
      for (std::size_t c = 0; c < dh; ++c) o[c] += p[j] * v[c];
    }
    for (std::size_t j = i + 1; j < len; ++j) p[j] = 0;
  }
}

template <class S>
void attention_backward(const S* qkv, std::size_t stride, std::size_t kv_offset, std::size_t dh,
                        std::size_t len, S scale, const S* probs, const S* dout, std::size_t dout_stride,
                        S* dqkv, std::vector<S>& dp) {
  for (std::size_t i = 0; i < len; ++i) {
    const S* p = probs + i * len;
    const S* dout_i = dout + i * dout_stride;
    S inner = 0;
    for (std::size_t j = 0; j <= i; ++j) {
      const S* v = qkv + j * stride + 2 * kv_offset;
      S* dv = dqkv + j * stride + 2 * kv_offset;
      S acc = 0;
      for (std::size_t c = 0; c < dh; ++c) {
        acc += dout_i[c] * v[c];
        dv[c] += p[j] * dout_i[c];
      }
      dp[j] = acc;
      inner += p[j] * acc;
    }
    const S* q = qkv + i * stride;
    S* dq = dqkv + i * stride;
    for (std::size_t j = 0; j <= i; ++j) {
      const S ds = p[j] * (dp[j] - inner) * scale;
      const S* k = qkv + j * stride + kv_offset;
      S* dk = dqkv + j * stride + kv_offset;
      for (std::size_t c = 0; c < dh; ++c) {
        dq[c] += ds * k[c];
        dk[c] += ds * q[c];
      }
    }
  }
}

/// Runs the network on rows [row0, row0 + batch) of x over `len` positions.
template <class S>
Mat<S> forward_chunk(const ModelParams<S>& params, const BitRows& x, std::size_t row0,
                     std::size_t batch, std::size_t len, ForwardCache<S>& cache) {
  const auto& cfg = params.config();
  const auto& lay = params.layout();
  const std::size_t d = cfg.d_model;
  const std::size_t heads = cfg.n_heads;
  const std::size_t dh = d / heads;
  const std::size_t rows = batch * len;
  using std::sqrt;
  const S scale = S(1) / sqrt(static_cast<S>(dh));

  cache.batch = batch;
  cache.len = len;
  cache.tokens.assign(rows, 0);
  cache.layers.resize(cfg.n_layers);

  // Shifted input: a virtual leading 1, then x_0 .. x_{len-2}.
  Mat<S> h(rows, d);
  const auto tok = params.tensor(lay.token_embedding());
  const auto pos = params.tensor(lay.position_embedding());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < len; ++i) {
      const std::uint8_t t = i == 0 ? 1 : (x(row0 + b, i - 1) ? 1 : 0);
      cache.tokens[b * len + i] = t;
      h.row(b * len + i) = tok.row(t) + pos.row(i);
    }
  }

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    auto& lc = cache.layers[l];
    lc.x = h;
    layer_norm<S>(lc.x, params.tensor(lay.layer(l, ParamLayout::kLn1Gain)).row(0),
                  params.tensor(lay.layer(l, ParamLayout::kLn1Bias)).row(0), lc.xhat1, lc.rstd1, lc.a);
    lc.qkv.noalias() = lc.a * params.tensor(lay.layer(l, ParamLayout::kQkvWeight));
    lc.qkv.rowwise() += params.tensor(lay.layer(l, ParamLayout::kQkvBias)).row(0);

    lc.probs.resize(static_cast<Eigen::Index>(batch * heads * len), static_cast<Eigen::Index>(len));
    lc.attn.resize(rows, d);
    lc.attn.setZero();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t hd = 0; hd < heads; ++hd) {
        attention_forward(lc.qkv.data() + b * len * 3 * d + hd * dh, 3 * d, d, dh, len, scale,
                          lc.probs.data() + (b * heads + hd) * len * len,
                          lc.attn.data() + b * len * d + hd * dh, d);
      }
    }

    lc.x1 = lc.x;
    lc.x1.noalias() += lc.attn * params.tensor(lay.layer(l, ParamLayout::kOutWeight));
    lc.x1.rowwise() += params.tensor(lay.layer(l, ParamLayout::kOutBias)).row(0);

    layer_norm<S>(lc.x1, params.tensor(lay.layer(l, ParamLayout::kLn2Gain)).row(0),
                  params.tensor(lay.layer(l, ParamLayout::kLn2Bias)).row(0), lc.xhat2, lc.rstd2, lc.c);
    lc.z.noalias() = lc.c * params.tensor(lay.layer(l, ParamLayout::kFf1Weight));
    lc.z.rowwise() += params.tensor(lay.layer(l, ParamLayout::kFf1Bias)).row(0);
    lc.g = gelu<S>(lc.z);
    h = lc.x1;
    h.noalias() += lc.g * params.tensor(lay.layer(l, ParamLayout::kFf2Weight));
    h.rowwise() += params.tensor(lay.layer(l, ParamLayout::kFf2Bias)).row(0);
  }

  cache.xf = std::move(h);
  layer_norm<S>(cache.xf, params.tensor(lay.final_gain()).row(0), params.tensor(lay.final_bias()).row(0),
                cache.xhatf, cache.rstdf, cache.hf);

  const auto head_w = params.tensor(lay.head_weight());
  const auto head_b = params.tensor(lay.head_bias());
  Mat<S> logits(batch, len);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < len; ++i) {
      logits(b, i) = cache.hf.row(b * len + i).dot(head_w.row(i)) + head_b(0, i);
    }
  }
  check_finite<S>(logits, "logits");
  return logits;
}

/// Accumulates the gradient of sum_b sum_i dlogits(b, i) * logit(b, i).
template <class S>
void backward_chunk(const ModelParams<S>& params, const ForwardCache<S>& cache, const Mat<S>& dlogits,
                    ModelParams<S>& grad) {
  const auto& cfg = params.config();
  const auto& lay = params.layout();
  const std::size_t d = cfg.d_model;
  const std::size_t heads = cfg.n_heads;
  const std::size_t dh = d / heads;
  const std::size_t batch = cache.batch;
  const std::size_t len = cache.len;
  const std::size_t rows = batch * len;
  using std::sqrt;
  const S scale = S(1) / sqrt(static_cast<S>(dh));

  const auto head_w = params.tensor(lay.head_weight());
  auto g_head_w = grad.tensor(lay.head_weight());
  auto g_head_b = grad.tensor(lay.head_bias());
  Mat<S> dh_f(rows, d);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < len; ++i) {
      const S dz = dlogits(b, i);
      dh_f.row(b * len + i) = dz * head_w.row(i);
      g_head_w.row(i) += dz * cache.hf.row(b * len + i);
      g_head_b(0, i) += dz;
    }
  }

  Mat<S> dx;
  layer_norm_backward<S>(dh_f, cache.xhatf, cache.rstdf, params.tensor(lay.final_gain()).row(0), dx,
                         grad.tensor(lay.final_gain()).row(0), grad.tensor(lay.final_bias()).row(0));

  Mat<S> tmp;
  Mat<S> dqkv;
  std::vector<S> dp_row(len);
  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const auto& lc = cache.layers[l];
    // Feed-forward block: x2 = x1 + gelu(c W1 + b1) W2 + b2.
    grad.tensor(lay.layer(l, ParamLayout::kFf2Weight)).noalias() += lc.g.transpose() * dx;
    grad.tensor(lay.layer(l, ParamLayout::kFf2Bias)).row(0) += dx.colwise().sum();
    Mat<S> dz = dx * params.tensor(lay.layer(l, ParamLayout::kFf2Weight)).transpose();
    dz.array() *= gelu_grad<S>(lc.z).array();
    grad.tensor(lay.layer(l, ParamLayout::kFf1Weight)).noalias() += lc.c.transpose() * dz;
    grad.tensor(lay.layer(l, ParamLayout::kFf1Bias)).row(0) += dz.colwise().sum();
    const Mat<S> dc = dz * params.tensor(lay.layer(l, ParamLayout::kFf1Weight)).transpose();
    layer_norm_backward<S>(dc, lc.xhat2, lc.rstd2, params.tensor(lay.layer(l, ParamLayout::kLn2Gain)).row(0),
                           tmp, grad.tensor(lay.layer(l, ParamLayout::kLn2Gain)).row(0),
                           grad.tensor(lay.layer(l, ParamLayout::kLn2Bias)).row(0));
    dx += tmp;  // now d(loss)/d(x1)

    // Attention block: x1 = x + attn Wo + bo.
    grad.tensor(lay.layer(l, ParamLayout::kOutWeight)).noalias() += lc.attn.transpose() * dx;
    grad.tensor(lay.layer(l, ParamLayout::kOutBias)).row(0) += dx.colwise().sum();
    const Mat<S> dattn = dx * params.tensor(lay.layer(l, ParamLayout::kOutWeight)).transpose();

    dqkv.setZero(rows, 3 * d);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t hd = 0; hd < heads; ++hd) {
        attention_backward(lc.qkv.data() + b * len * 3 * d + hd * dh, 3 * d, d, dh, len, scale,
                           lc.probs.data() + (b * heads + hd) * len * len,
                           dattn.data() + b * len * d + hd * dh, d,
                           dqkv.data() + b * len * 3 * d + hd * dh, dp_row);
      }
    }
    grad.tensor(lay.layer(l, ParamLayout::kQkvWeight)).noalias() += lc.a.transpose() * dqkv;
    grad.tensor(lay.layer(l, ParamLayout::kQkvBias)).row(0) += dqkv.colwise().sum();
    const Mat<S> da = dqkv * params.tensor(lay.layer(l, ParamLayout::kQkvWeight)).transpose();
    layer_norm_backward<S>(da, lc.xhat1, lc.rstd1, params.tensor(lay.layer(l, ParamLayout::kLn1Gain)).row(0),
                           tmp, grad.tensor(lay.layer(l, ParamLayout::kLn1Gain)).row(0),
                           grad.tensor(lay.layer(l, ParamLayout::kLn1Bias)).row(0));
    dx += tmp;
  }

  auto g_tok = grad.tensor(lay.token_embedding());
  auto g_pos = grad.tensor(lay.position_embedding());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < len; ++i) {
      g_tok.row(cache.tokens[b * len + i]) += dx.row(b * len + i);
      g_pos.row(i) += dx.row(b * len + i);
    }
  }
}

void check_width(const BitRows& x, std::size_t need, const char* what) {
  if (static_cast<std::size_t>(x.cols()) < need) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": rows have " +
                                               std::to_string(x.cols()) + " bits, need " +
                                               std::to_string(need));
  }
}

}  // namespace

BitRows to_rows(const std::vector<gf2::BitVec>& vectors, std::size_t width) {
  BitRows out = BitRows::Zero(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    if (vectors[r].size() != width) {
      throw Error(ErrorCode::kLengthMismatch, "bit vector of length " + std::to_string(vectors[r].size()) +
                                                  ", expected " + std::to_string(width));
    }
    for (std::size_t i = 0; i < width; ++i) out(r, i) = vectors[r].get(i);
  }
  return out;
}

BitRows sequence_rows(const std::vector<ElsConfig>& configs) {
  std::vector<gf2::BitVec> seqs;
  seqs.reserve(configs.size());
  for (const auto& c : configs) seqs.push_back(c.sequence());
  return to_rows(seqs, seqs.empty() ? 0 : seqs.front().size());
}

gf2::BitVec row_to_bitvec(const BitRows& rows, std::size_t r, std::size_t start, std::size_t len) {
  gf2::BitVec v(len);
  for (std::size_t i = 0; i < len; ++i) v.set(i, rows(r, start + i) != 0);
  return v;
}

void ModelConfig::validate() const {
  if (seq_len == 0 || d_model == 0 || n_heads == 0 || n_layers == 0 || d_ff == 0) {
    throw Error(ErrorCode::kBadConfig, "model sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw Error(ErrorCode::kBadConfig, "d_model " + std::to_string(d_model) +
                                           " is not divisible by n_heads " + std::to_string(n_heads));
  }
}

ParamLayout::ParamLayout(const ModelConfig& config) : n_layers_(config.n_layers) {
  const std::size_t d = config.d_model;
  auto add = [this](std::string name, std::size_t rows, std::size_t cols) {
    tensors_.push_back({std::move(name), rows, cols, size_});
    size_ += rows * cols;
  };
  add("token_embedding", 2, d);
  add("position_embedding", config.seq_len, d);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "ln1.gain", 1, d);
    add(p + "ln1.bias", 1, d);
    add(p + "attn.qkv.weight", d, 3 * d);
    add(p + "attn.qkv.bias", 1, 3 * d);
    add(p + "attn.out.weight", d, d);
    add(p + "attn.out.bias", 1, d);
    add(p + "ln2.gain", 1, d);
    add(p + "ln2.bias", 1, d);
    add(p + "ff1.weight", d, config.d_ff);
    add(p + "ff1.bias", 1, config.d_ff);
    add(p + "ff2.weight", config.d_ff, d);
    add(p + "ff2.bias", 1, d);
  }
  add("final_ln.gain", 1, d);
  add("final_ln.bias", 1, d);
  add("head.weight", config.seq_len, d);
  add("head.bias", 1, config.seq_len);
}

template <class S>
ModelParams<S>::ModelParams(const ModelConfig& config) : config_(config), layout_(config) {
  config_.validate();
  values_.assign(layout_.size(), S(0));
}

template <class S>
typename ModelParams<S>::MatrixMap ModelParams<S>::tensor(std::size_t id) {
  const auto& t = layout_.tensors()[id];
  return MatrixMap(values_.data() + t.offset, static_cast<Eigen::Index>(t.rows),
                   static_cast<Eigen::Index>(t.cols));
}

template <class S>
typename ModelParams<S>::ConstMatrixMap ModelParams<S>::tensor(std::size_t id) const {
  const auto& t = layout_.tensors()[id];
  return ConstMatrixMap(values_.data() + t.offset, static_cast<Eigen::Index>(t.rows),
                        static_cast<Eigen::Index>(t.cols));
}

template <class S>
bool ModelParams<S>::all_finite() const {
  using std::isfinite;
  return std::all_of(values_.begin(), values_.end(), [](S v) { return isfinite(v); });
}

template <class S>
ModelParams<S> init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams<S> params(config);
  const auto& lay = params.layout();
  Rng rng(derive_seed(seed, "model-init"));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](std::size_t id, double sd) {
    auto t = params.tensor(id);
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = static_cast<S>(sd * normal(rng));
    }
  };
  const double inv_d = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  const double inv_ff = 1.0 / std::sqrt(static_cast<double>(config.d_ff));
  fill(lay.token_embedding(), inv_d);
  fill(lay.position_embedding(), inv_d);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    params.tensor(lay.layer(l, ParamLayout::kLn1Gain)).setOnes();
    params.tensor(lay.layer(l, ParamLayout::kLn2Gain)).setOnes();
    fill(lay.layer(l, ParamLayout::kQkvWeight), inv_d);
    fill(lay.layer(l, ParamLayout::kOutWeight), inv_d);
    fill(lay.layer(l, ParamLayout::kFf1Weight), inv_d);
    fill(lay.layer(l, ParamLayout::kFf2Weight), inv_ff);
  }
  params.tensor(lay.final_gain()).setOnes();
  fill(lay.head_weight(), inv_d);
  return params;
}

std::uint64_t forward_pass_count() { return g_forward_passes.load(); }
void reset_forward_pass_count() { g_forward_passes.store(0); }

template <class S>
typename ModelParams<S>::Matrix forward_logits(const ModelParams<S>& params, const BitRows& x,
                                               std::size_t len) {
  if (len == 0 || len > params.config().seq_len) {
    throw Error(ErrorCode::kShapeMismatch, "forward length " + std::to_string(len) + " outside [1, " +
                                               std::to_string(params.config().seq_len) + "]");
  }
  check_width(x, len - 1, "forward");
  ++g_forward_passes;
  const std::size_t batch = static_cast<std::size_t>(x.rows());
  Mat<S> out(batch, len);
  ForwardCache<S> cache;
  for (std::size_t r0 = 0; r0 < batch; r0 += kInferenceChunk) {
    const std::size_t rows = std::min(kInferenceChunk, batch - r0);
    out.middleRows(r0, rows) = forward_chunk(params, x, r0, rows, len, cache);
  }
  return out;
}

template <class S>
IncrementalForward<S>::IncrementalForward(const ModelParams<S>& params, std::size_t batch)
    : params_(&params), batch_(batch) {
  const auto& cfg = params.config();
  const auto rows = static_cast<Eigen::Index>(batch * cfg.seq_len);
  keys_.assign(cfg.n_layers, Matrix::Zero(rows, static_cast<Eigen::Index>(cfg.d_model)));
  values_ = keys_;
}

template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> IncrementalForward<S>::step(const BitRows& x) {
  const auto& params = *params_;
  const auto& cfg = params.config();
  const auto& lay = params.layout();
  const std::size_t len = cfg.seq_len;
  if (pos_ >= len) throw Error(ErrorCode::kShapeMismatch, "incremental evaluation past the sequence end");
  if (static_cast<std::size_t>(x.rows()) != batch_) {
    throw Error(ErrorCode::kShapeMismatch, "incremental batch size changed");
  }
  if (pos_ > 0) check_width(x, pos_, "incremental step");
  const std::size_t d = cfg.d_model;
  const std::size_t heads = cfg.n_heads;
  const std::size_t dh = d / heads;
  const std::size_t i = pos_;
  using std::sqrt;
  const S scale = S(1) / sqrt(static_cast<S>(dh));

  Mat<S> h(batch_, d);
  const auto tok = params.tensor(lay.token_embedding());
  const auto pos = params.tensor(lay.position_embedding());
  for (std::size_t b = 0; b < batch_; ++b) {
    const std::uint8_t t = i == 0 ? 1 : (x(b, i - 1) ? 1 : 0);
    h.row(b) = tok.row(t) + pos.row(i);
  }

  Mat<S> xhat, a, qkv, attn, x1, c, z;
  Vec<S> rstd;
  Eigen::Array<S, Eigen::Dynamic, 1> scores(static_cast<Eigen::Index>(i + 1));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    layer_norm<S>(h, params.tensor(lay.layer(l, ParamLayout::kLn1Gain)).row(0),
                  params.tensor(lay.layer(l, ParamLayout::kLn1Bias)).row(0), xhat, rstd, a);
    qkv.noalias() = a * params.tensor(lay.layer(l, ParamLayout::kQkvWeight));
    qkv.rowwise() += params.tensor(lay.layer(l, ParamLayout::kQkvBias)).row(0);
    auto& keys = keys_[l];
    auto& vals = values_[l];
    attn.setZero(batch_, d);
    for (std::size_t b = 0; b < batch_; ++b) {
      keys.row(b * len + i) = qkv.row(b).segment(d, d);
      vals.row(b * len + i) = qkv.row(b).segment(2 * d, d);
      for (std::size_t hd = 0; hd < heads; ++hd) {
        const S* q = qkv.data() + b * 3 * d + hd * dh;
        S mx = -std::numeric_limits<S>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          const S* k = keys.data() + (b * len + j) * d + hd * dh;
          S acc = 0;
          for (std::size_t e = 0; e < dh; ++e) acc += q[e] * k[e];
          scores[j] = acc * scale;
          mx = std::max(mx, scores[j]);
        }
        scores = (scores - mx).exp();
        const S inv = S(1) / scores.sum();
        S* o = attn.data() + b * d + hd * dh;
        for (std::size_t j = 0; j <= i; ++j) {
          const S p = scores[j] * inv;
          const S* v = vals.data() + (b * len + j) * d + hd * dh;
          for (std::size_t e = 0; e < dh; ++e) o[e] += p * v[e];
        }
      }
    }
    x1 = h;
    x1.noalias() += attn * params.tensor(lay.layer(l, ParamLayout::kOutWeight));
    x1.rowwise() += params.tensor(lay.layer(l, ParamLayout::kOutBias)).row(0);
    layer_norm<S>(x1, params.tensor(lay.layer(l, ParamLayout::kLn2Gain)).row(0),
                  params.tensor(lay.layer(l, ParamLayout::kLn2Bias)).row(0), xhat, rstd, c);
    z.noalias() = c * params.tensor(lay.layer(l, ParamLayout::kFf1Weight));
    z.rowwise() += params.tensor(lay.layer(l, ParamLayout::kFf1Bias)).row(0);
    h = x1;
    h.noalias() += gelu<S>(z) * params.tensor(lay.layer(l, ParamLayout::kFf2Weight));
    h.rowwise() += params.tensor(lay.layer(l, ParamLayout::kFf2Bias)).row(0);
  }
  Mat<S> hf;
  layer_norm<S>(h, params.tensor(lay.final_gain()).row(0), params.tensor(lay.final_bias()).row(0), xhat,
                rstd, hf);
  const auto head_w = params.tensor(lay.head_weight());
  const S head_b = params.tensor(lay.head_bias())(0, i);
  Vec<S> logits = hf * head_w.row(i).transpose();
  logits.array() += head_b;
  check_finite<S>(logits, "logits");
  ++pos_;
  return logits;
}

template <class S>
std::vector<double> forward(const ModelParams<S>& params, const gf2::BitVec& x) {
  const std::size_t t = params.config().seq_len;
  if (x.size() != t) {
    throw Error(ErrorCode::kShapeMismatch, "input of length " + std::to_string(x.size()) +
                                               " for sequence length " + std::to_string(t));
  }
  const auto z = forward_logits(params, to_rows({x}, t), t);
  std::vector<double> out(t);
  for (std::size_t i = 0; i < t; ++i) out[i] = static_cast<double>(sigmoid(z(0, i)));
  return out;
}

template <class S>
std::vector<double> log_joint(const ModelParams<S>& params, const BitRows& x) {
  const std::size_t t = params.config().seq_len;
  check_width(x, t, "log_joint");
  const auto z = forward_logits(params, x, t);
  std::vector<double> out(static_cast<std::size_t>(x.rows()), 0.0);
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    for (std::size_t i = 0; i < t; ++i) out[b] += log_bit(z(b, i), x(b, i) != 0);
  }
  return out;
}

template <class S>
double log_joint(const ModelParams<S>& params, const ElsConfig& config) {
  return log_joint(params, sequence_rows({config}))[0];
}

template <class S>
std::vector<double> log_conditional_beta(const ModelParams<S>& params, const BitRows& prefix,
                                         std::size_t m, std::size_t k) {
  const std::size_t len = m + 2 * k;
  check_width(prefix, len, "log_conditional_beta");
  const auto z = forward_logits(params, prefix, len);
  std::vector<double> out(static_cast<std::size_t>(prefix.rows()), 0.0);
  for (Eigen::Index b = 0; b < prefix.rows(); ++b) {
    for (std::size_t i = m; i < len; ++i) out[b] += log_bit(z(b, i), prefix(b, i) != 0);
  }
  return out;
}

template <class S>
double log_conditional_beta(const ModelParams<S>& params, const gf2::BitVec& beta,
                            const gf2::BitVec& gamma) {
  const gf2::BitVec prefix = gamma.concat(beta);
  return log_conditional_beta(params, to_rows({prefix}, prefix.size()), gamma.size(), beta.size() / 2)[0];
}

template <class S>
BetaGeneration generate_beta(const ModelParams<S>& params, const BitRows& gamma, std::size_t k,
                             GenerateMode mode, Rng* rng) {
  if (mode == GenerateMode::kSample && rng == nullptr) {
    throw Error(ErrorCode::kBadConfig, "sample mode needs a random generator");
  }
  const std::size_t m = static_cast<std::size_t>(gamma.cols());
  const std::size_t batch = static_cast<std::size_t>(gamma.rows());
  BitRows work = BitRows::Zero(gamma.rows(), static_cast<Eigen::Index>(m + 2 * k));
  work.leftCols(m) = gamma;
  BetaGeneration out{BitRows::Zero(gamma.rows(), static_cast<Eigen::Index>(2 * k)),
                     Eigen::MatrixXd::Zero(gamma.rows(), static_cast<Eigen::Index>(2 * k))};
  for (std::size_t j = 0; j < 2 * k; ++j) {
    const std::size_t pos = m + j;
    const auto z = forward_logits(params, work, pos + 1);
    for (std::size_t b = 0; b < batch; ++b) {
      const S logit = z(b, pos);
      bool bit;
      if (mode == GenerateMode::kArgmax) {
        bit = logit > S(0);
      } else {
        bit = uniform01(*rng) < static_cast<double>(sigmoid(logit));
      }
      work(b, pos) = bit;
      out.beta(b, j) = bit;
      out.bit_logprob(b, j) = log_bit(logit, bit);
    }
  }
  return out;
}

template <class S>
AlphaSamples sample_alpha(const ModelParams<S>& params, const BitRows& prefix, std::size_t m,
                          std::size_t k, Rng& rng) {
  const std::size_t start = m + 2 * k;
  check_width(prefix, start, "sample_alpha");
  const std::size_t batch = static_cast<std::size_t>(prefix.rows());
  AlphaSamples out{BitRows::Zero(prefix.rows(), static_cast<Eigen::Index>(m)),
                   std::vector<double>(batch, 0.0)};
  for (std::size_t r0 = 0; r0 < batch; r0 += kSampleChunk) {
    const std::size_t rows = std::min(kSampleChunk, batch - r0);
    BitRows work = BitRows::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(start + m));
    work.leftCols(start) = prefix.block(r0, 0, rows, start);
    IncrementalForward<S> inc(params, rows);
    for (std::size_t pos = 0; pos < start; ++pos) inc.step(work);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t pos = start + i;
      const auto z = inc.step(work);
      for (std::size_t b = 0; b < rows; ++b) {
        const S logit = z(b);
        const bool bit = uniform01(rng) < static_cast<double>(sigmoid(logit));
        work(b, pos) = bit;
        out.alpha(r0 + b, i) = bit;
        out.log_proposal[r0 + b] += log_bit(logit, bit);
      }
    }
  }
  return out;
}

template <class S>
AlphaSamples sample_alpha(const ModelParams<S>& params, const gf2::BitVec& beta,
                          const gf2::BitVec& gamma, Rng& rng, std::size_t n_samples) {
  const gf2::BitVec prefix = gamma.concat(beta);
  BitRows rows(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(prefix.size()));
  for (std::size_t r = 0; r < n_samples; ++r) {
    for (std::size_t i = 0; i < prefix.size(); ++i) rows(r, i) = prefix.get(i);
  }
  return sample_alpha(params, rows, gamma.size(), beta.size() / 2, rng);
}

template <class S>
NllGradient<S> grad_nll(const ModelParams<S>& params, const BitRows& batch) {
  const std::size_t t = params.config().seq_len;
  if (batch.rows() == 0) throw Error(ErrorCode::kShapeMismatch, "empty batch");
  check_width(batch, t, "grad_nll");
  const std::size_t n = static_cast<std::size_t>(batch.rows());
  const S inv_n = S(1) / static_cast<S>(n);
  NllGradient<S> out{0.0, ModelParams<S>(params.config())};
  ForwardCache<S> cache;
  double total = 0.0;
  for (std::size_t r0 = 0; r0 < n; r0 += kGradChunk) {
    const std::size_t rows = std::min(kGradChunk, n - r0);
    const Mat<S> z = forward_chunk(params, batch, r0, rows, t, cache);
    Mat<S> dz(rows, t);
    for (std::size_t b = 0; b < rows; ++b) {
      for (std::size_t i = 0; i < t; ++i) {
        const bool bit = batch(r0 + b, i) != 0;
        // -log q(bit) = softplus(z) - bit * z.
        total -= log_bit(z(b, i), bit);
        dz(b, i) = (sigmoid(z(b, i)) - (bit ? S(1) : S(0))) * inv_n;
      }
    }
    backward_chunk(params, cache, dz, out.grad);
  }
  out.nll = total / static_cast<double>(n);
  if (!std::isfinite(out.nll)) throw Error(ErrorCode::kNonFinite, "non-finite loss");
  if (!out.grad.all_finite()) {
    for (const auto& tensor : out.grad.layout().tensors()) {
      const auto g = out.grad.tensor(static_cast<std::size_t>(&tensor - out.grad.layout().tensors().data()));
      if (!g.allFinite()) throw Error(ErrorCode::kNonFinite, "non-finite gradient in " + tensor.name);
    }
  }
  return out;
}

template <class S>
double mean_nll(const ModelParams<S>& params, const BitRows& batch) {
  const auto lj = log_joint(params, batch);
  double total = 0.0;
  for (double v : lj) total -= v;
  return total / static_cast<double>(lj.size());
}

// Checkpoints.

namespace {

constexpr char kMagic[] = "qecgpt-ckpt-1\n";

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error(ErrorCode::kBadFile, "truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParams<float>& params, const CheckpointInfo& info) {
  const auto& cfg = params.config();
  nlohmann::json header;
  header["format"] = "qecgpt-ckpt-1";
  header["config"] = {{"seq_len", cfg.seq_len},
                      {"d_model", cfg.d_model},
                      {"n_heads", cfg.n_heads},
                      {"n_layers", cfg.n_layers},
                      {"d_ff", cfg.d_ff}};
  header["activation"] = kActivation;
  header["seed"] = info.seed;
  header["step"] = info.step;
  header["code"] = info.code;
  header["noise"] = info.noise;
  header["dtype"] = "float32le";
  for (const auto& t : params.layout().tensors()) {
    header["tensors"].push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}});
  }
  const std::string text = header.dump();
  out.write(kMagic, sizeof(kMagic) - 1);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<unsigned char> bytes(params.size() * 4);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(params.values()[i]);
    for (int j = 0; j < 4; ++j) bytes[4 * i + j] = static_cast<unsigned char>(bits >> (8 * j));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kBadFile, "checkpoint write failed");
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const CheckpointInfo& info) {
  // Write then rename so a crash never leaves a partial checkpoint behind.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::kBadFile, "cannot open " + tmp.string());
    save_checkpoint(out, params, info);
  }
  std::filesystem::rename(tmp, path);
}

ModelParams<float> load_checkpoint(std::istream& in, CheckpointInfo* info) {
  std::string magic(sizeof(kMagic) - 1, '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kMagic) {
    throw Error(ErrorCode::kBadFile, "not a qecgpt-ckpt-1 checkpoint");
  }
  const std::uint64_t header_len = read_u64(in);
  if (header_len > (std::uint64_t{1} << 30)) throw Error(ErrorCode::kBadFile, "implausible header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(ErrorCode::kBadFile, "truncated checkpoint header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadFile, std::string("checkpoint header: ") + e.what());
  }
  ModelConfig cfg;
  try {
    const auto& c = header.at("config");
    cfg.seq_len = c.at("seq_len").get<std::size_t>();
    cfg.d_model = c.at("d_model").get<std::size_t>();
    cfg.n_heads = c.at("n_heads").get<std::size_t>();
    cfg.n_layers = c.at("n_layers").get<std::size_t>();
    cfg.d_ff = c.at("d_ff").get<std::size_t>();
    if (header.at("activation").get<std::string>() != kActivation) {
      throw Error(ErrorCode::kBadFile, "unsupported activation " + header.at("activation").dump());
    }
    if (info != nullptr) {
      info->seed = header.at("seed").get<std::uint64_t>();
      info->step = header.at("step").get<std::uint64_t>();
      info->code = header.value("code", "");
      info->noise = header.value("noise", "");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadFile, std::string("checkpoint header: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kBadFile, e.what());
  }
  ModelParams<float> params(cfg);
  const auto& tensors = params.layout().tensors();
  const auto& listed = header.at("tensors");
  if (listed.size() != tensors.size()) throw Error(ErrorCode::kBadFile, "tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (listed[i].at("name").get<std::string>() != tensors[i].name ||
        listed[i].at("shape")[0].get<std::size_t>() != tensors[i].rows ||
        listed[i].at("shape")[1].get<std::size_t>() != tensors[i].cols) {
      throw Error(ErrorCode::kBadFile, "tensor " + std::to_string(i) + " does not match the layout");
    }
  }
  std::vector<unsigned char> bytes(params.size() * 4);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw Error(ErrorCode::kBadFile, "truncated checkpoint data");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::uint32_t bits = 0;
    for (int j = 0; j < 4; ++j) bits |= static_cast<std::uint32_t>(bytes[4 * i + j]) << (8 * j);
    params.values()[i] = std::bit_cast<float>(bits);
  }
  return params;
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kBadFile, "cannot open " + path.string());
  return load_checkpoint(in, info);
}

#define QECGPT_INSTANTIATE(S)                                                                         \
  template class ModelParams<S>;                                                                      \
  template class IncrementalForward<S>;                                                               \
  template ModelParams<S> init_params<S>(const ModelConfig&, std::uint64_t);                          \
  template ModelParams<S>::Matrix forward_logits<S>(const ModelParams<S>&, const BitRows&, std::size_t); \
  template std::vector<double> forward<S>(const ModelParams<S>&, const gf2::BitVec&);                 \
  template std::vector<double> log_joint<S>(const ModelParams<S>&, const BitRows&);                   \
  template double log_joint<S>(const ModelParams<S>&, const ElsConfig&);                             \
  template std::vector<double> log_conditional_beta<S>(const ModelParams<S>&, const BitRows&,         \
                                                       std::size_t, std::size_t);                     \
  template double log_conditional_beta<S>(const ModelParams<S>&, const gf2::BitVec&,                  \
                                          const gf2::BitVec&);                                        \
  template BetaGeneration generate_beta<S>(const ModelParams<S>&, const BitRows&, std::size_t,        \
                                           GenerateMode, Rng*);                                       \
  template AlphaSamples sample_alpha<S>(const ModelParams<S>&, const BitRows&, std::size_t,           \
                                        std::size_t, Rng&);                                           \
  template AlphaSamples sample_alpha<S>(const ModelParams<S>&, const gf2::BitVec&,                    \
                                        const gf2::BitVec&, Rng&, std::size_t);                       \
  template NllGradient<S> grad_nll<S>(const ModelParams<S>&, const BitRows&);                         \
  template double mean_nll<S>(const ModelParams<S>&, const BitRows&);

QECGPT_INSTANTIATE(float)
QECGPT_INSTANTIATE(double)
QECGPT_INSTANTIATE(long double)

}  // namespace qecgpt
