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

#include "qecgpt/decoder.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "qecgpt/error.hpp"

namespace qecgpt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double total = 0.0;
  for (double x : v) total += std::exp(x - mx);
  return mx + std::log(total);
}

/// Streaming log-sum-exp.
struct LogAccumulator {
  double max = kNegInf;
  double scaled = 0.0;

  void add(double v) {
    if (v == kNegInf) return;
    if (v > max) {
      scaled = scaled * std::exp(max - v) + 1.0;
      max = v;
    } else {
      scaled += std::exp(v - max);
    }
  }
  double value() const { return max == kNegInf ? kNegInf : max + std::log(scaled); }
};

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

/// Generators as (z, x) masks over n <= 64 qubits.
struct PackedRows {
  std::vector<std::uint64_t> z;
  std::vector<std::uint64_t> x;
};

PackedRows pack(const gf2::BitMatrix& rows, std::size_t n) {
  PackedRows out;
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    std::uint64_t z = 0;
    std::uint64_t x = 0;
    for (std::size_t q = 0; q < n; ++q) {
      if (rows.get(r, q)) z |= std::uint64_t{1} << q;
      if (rows.get(r, n + q)) x |= std::uint64_t{1} << q;
    }
    out.z.push_back(z);
    out.x.push_back(x);
  }
  return out;
}

void check_exact_guard(const CodeTables& code) {
  const std::size_t bits = 2 * code.k + code.m;
  if (bits > DecoderLimits::kExactMaxBits || code.n > 64) {
    throw Error(ErrorCode::kTooLarge, "exact enumeration over 2^" + std::to_string(bits) +
                                          " configurations exceeds the 2^" +
                                          std::to_string(DecoderLimits::kExactMaxBits) + " guard");
  }
}

void check_gamma(const CodeTables& code, const gf2::BitVec& gamma) {
  if (gamma.size() != code.m) {
    throw Error(ErrorCode::kLengthMismatch, "syndrome of length " + std::to_string(gamma.size()) +
                                                " for m=" + std::to_string(code.m));
  }
}

/// Calls visit(class_index, z, x) for every error with syndrome gamma, class
/// by class; within a class alpha runs through a Gray code.
template <class Visit>
void enumerate_errors(const CodeTables& code, const gf2::BitVec& gamma, Visit&& visit) {
  check_exact_guard(code);
  check_gamma(code, gamma);
  const std::size_t n = code.n;
  const auto e = pack(code.pure_errors, n);
  const auto l = pack(code.logicals, n);
  const auto s = pack(code.stabilizers, n);
  std::uint64_t z0 = 0;
  std::uint64_t x0 = 0;
  for (std::size_t i = 0; i < code.m; ++i) {
    if (gamma.get(i)) {
      z0 ^= e.z[i];
      x0 ^= e.x[i];
    }
  }
  const std::size_t classes = std::size_t{1} << (2 * code.k);
  const std::uint64_t alphas = std::uint64_t{1} << code.m;
  for (std::size_t c = 0; c < classes; ++c) {
    std::uint64_t z = z0;
    std::uint64_t x = x0;
    for (std::size_t j = 0; j < 2 * code.k; ++j) {
      if ((c >> (2 * code.k - 1 - j)) & 1) {
        z ^= l.z[j];
        x ^= l.x[j];
      }
    }
    for (std::uint64_t t = 0; t < alphas; ++t) {
      visit(c, z, x);
      if (t + 1 < alphas) {
        const auto flip = static_cast<std::size_t>(std::countr_zero(t + 1));
        z ^= s.z[flip];
        x ^= s.x[flip];
      }
    }
  }
}

PauliVec unpack(std::uint64_t z, std::uint64_t x, std::size_t n) {
  PauliVec p(2 * n);
  for (std::size_t q = 0; q < n; ++q) {
    if ((z >> q) & 1) p.set(q, true);
    if ((x >> q) & 1) p.set(n + q, true);
  }
  return p;
}

/// log p of a depolarizing error with w non-identity qubits.
std::vector<double> depolarizing_weight_table(const DepolarizingModel& model) {
  std::vector<double> out(model.n + 1);
  for (std::size_t w = 0; w <= model.n; ++w) {
    const double id = w == model.n ? 0.0 : static_cast<double>(model.n - w) * std::log1p(-model.p);
    const double err = w == 0 ? 0.0 : static_cast<double>(w) * std::log(model.p / 3.0);
    out[w] = id + err;
  }
  return out;
}

struct ExactTables {
  std::vector<double> mld;
  std::vector<double> best;
};

ExactTables exact_depolarizing(const CodeTables& code, const DepolarizingModel& model,
                               const gf2::BitVec& gamma) {
  if (model.n != code.n) throw Error(ErrorCode::kShapeMismatch, "noise model and code disagree on n");
  const auto logw = depolarizing_weight_table(model);
  const std::size_t classes = std::size_t{1} << (2 * code.k);
  std::vector<std::vector<std::uint64_t>> hist(classes, std::vector<std::uint64_t>(code.n + 1, 0));
  enumerate_errors(code, gamma, [&](std::size_t c, std::uint64_t z, std::uint64_t x) {
    ++hist[c][static_cast<std::size_t>(std::popcount(z | x))];
  });
  ExactTables out{std::vector<double>(classes, kNegInf), std::vector<double>(classes, kNegInf)};
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> terms;
    for (std::size_t w = 0; w <= code.n; ++w) {
      if (hist[c][w] == 0 || logw[w] == kNegInf) continue;
      terms.push_back(std::log(static_cast<double>(hist[c][w])) + logw[w]);
      out.best[c] = std::max(out.best[c], logw[w]);
    }
    out.mld[c] = log_sum_exp(terms);
  }
  return out;
}

ExactTables exact_generic(const CodeTables& code, const ErrorLogProb& logprob, const gf2::BitVec& gamma) {
  const std::size_t classes = std::size_t{1} << (2 * code.k);
  std::vector<LogAccumulator> acc(classes);
  ExactTables out{std::vector<double>(classes, kNegInf), std::vector<double>(classes, kNegInf)};
  enumerate_errors(code, gamma, [&](std::size_t c, std::uint64_t z, std::uint64_t x) {
    const double lp = logprob(unpack(z, x, code.n));
    acc[c].add(lp);
    out.best[c] = std::max(out.best[c], lp);
  });
  for (std::size_t c = 0; c < classes; ++c) out.mld[c] = acc[c].value();
  return out;
}

DecodeResult from_tables(std::vector<double> table, DecodeMethod method, std::size_t k) {
  DecodeResult r;
  r.method = method;
  r.beta_hat = beta_from_index(argmax_first(table), k);
  r.coset_logprob = std::move(table);
  return r;
}

BitRows gamma_rows(const CodeTables& code, const std::vector<gf2::BitVec>& gammas) {
  for (const auto& g : gammas) check_gamma(code, g);
  return to_rows(gammas, code.m);
}

std::string key_of(const gf2::BitVec& v) { return v.to_string(); }

}  // namespace

std::string_view to_string(DecodeMethod method) {
  switch (method) {
    case DecodeMethod::kPretrained: return "pretrained";
    case DecodeMethod::kRefined: return "refined";
    case DecodeMethod::kExactMld: return "exact_mld";
    case DecodeMethod::kExactMinWeight: return "exact_minweight";
    case DecodeMethod::kModelArgmax: return "model_argmax";
  }
  return "unknown";
}

DecodeMethod parse_decode_method(std::string_view name) {
  for (auto m : {DecodeMethod::kPretrained, DecodeMethod::kRefined, DecodeMethod::kExactMld,
                 DecodeMethod::kExactMinWeight, DecodeMethod::kModelArgmax}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::kBadConfig, "unknown decoding method '" + std::string(name) + "'");
}

std::size_t beta_index(const gf2::BitVec& beta) {
  std::size_t idx = 0;
  for (std::size_t j = 0; j < beta.size(); ++j) idx = (idx << 1) | (beta.get(j) ? 1 : 0);
  return idx;
}

gf2::BitVec beta_from_index(std::size_t index, std::size_t k) {
  gf2::BitVec beta(2 * k);
  for (std::size_t j = 0; j < 2 * k; ++j) beta.set(j, (index >> (2 * k - 1 - j)) & 1);
  return beta;
}

RateEstimate RateEstimate::from_counts(std::size_t failures, std::size_t trials) {
  RateEstimate r;
  r.failures = failures;
  r.trials = trials;
  if (trials > 0) {
    r.rate = static_cast<double>(failures) / static_cast<double>(trials);
    r.std_error = std::sqrt(r.rate * (1.0 - r.rate) / static_cast<double>(trials));
  }
  return r;
}

std::vector<double> TransformerModel::logits(const BitRows& x, std::size_t pos) const {
  const auto z = forward_logits(*params_, x, pos + 1);
  std::vector<double> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index r = 0; r < z.rows(); ++r) out[r] = static_cast<double>(z(r, pos));
  return out;
}

std::vector<double> SequenceModel::sample_tail(BitRows& x, std::size_t start, Rng& rng) const {
  const auto rows = static_cast<std::size_t>(x.rows());
  std::vector<double> log_q(rows, 0.0);
  for (std::size_t pos = start; pos < seq_len(); ++pos) {
    const auto z = logits(x, pos);
    for (std::size_t r = 0; r < rows; ++r) {
      const double p1 = 1.0 / (1.0 + std::exp(-z[r]));
      const bool bit = uniform01(rng) < p1;
      x(r, pos) = bit;
      // log q(bit) = -softplus(-z) or -softplus(z).
      const double sz = bit ? -z[r] : z[r];
      log_q[r] -= std::max(sz, 0.0) + std::log1p(std::exp(-std::abs(sz)));
    }
  }
  return log_q;
}

std::vector<double> TransformerModel::sample_tail(BitRows& x, std::size_t start, Rng& rng) const {
  const std::size_t m = seq_len() - start;
  if (start < m || (start - m) % 2 != 0) {
    throw Error(ErrorCode::kShapeMismatch, "sampled tail does not split as [gamma, beta, alpha]");
  }
  auto s = sample_alpha(*params_, x, m, (start - m) / 2, rng);
  x.rightCols(static_cast<Eigen::Index>(m)) = s.alpha;
  return s.log_proposal;
}

ErrorLogProb error_logprob(const NoiseModel& noise) {
  if (const auto* d = std::get_if<DepolarizingModel>(&noise)) {
    const DepolarizingModel model = *d;
    return [model](const PauliVec& e) { return logprob_depolarizing(model, e); };
  }
  throw Error(ErrorCode::kUnevaluableModel,
              describe(noise) + " has no normalised pointwise probability");
}

DecodeResult decode_pretrained(const ModelParams<float>& params, const CodeTables& code,
                               const gf2::BitVec& gamma) {
  return decode_pretrained(params, code, std::vector<gf2::BitVec>{gamma}).front();
}

std::vector<DecodeResult> decode_pretrained(const ModelParams<float>& params, const CodeTables& code,
                                            const std::vector<gf2::BitVec>& gammas) {
  if (params.config().seq_len != 2 * code.n) {
    throw Error(ErrorCode::kShapeMismatch, "model sequence length does not match the code");
  }
  std::vector<DecodeResult> out;
  if (gammas.empty()) return out;
  const auto gen = generate_beta(params, gamma_rows(code, gammas), code.k, GenerateMode::kArgmax);
  out.reserve(gammas.size());
  for (std::size_t b = 0; b < gammas.size(); ++b) {
    DecodeResult r;
    r.method = DecodeMethod::kPretrained;
    r.beta_hat = row_to_bitvec(gen.beta, b, 0, 2 * code.k);
    for (std::size_t j = 0; j < 2 * code.k; ++j) r.bit_logprob.push_back(gen.bit_logprob(b, j));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DecodeResult> decode_model_argmax(const ModelParams<float>& params, const CodeTables& code,
                                              const std::vector<gf2::BitVec>& gammas) {
  if (params.config().seq_len != 2 * code.n) {
    throw Error(ErrorCode::kShapeMismatch, "model sequence length does not match the code");
  }
  if (code.k > DecoderLimits::kRefineMaxK) {
    throw Error(ErrorCode::kTooLarge, "4^k enumeration beyond k=" + std::to_string(DecoderLimits::kRefineMaxK));
  }
  const std::size_t classes = std::size_t{1} << (2 * code.k);
  const std::size_t width = code.m + 2 * code.k;
  std::vector<DecodeResult> out;
  out.reserve(gammas.size());
  // Bounded row blocks of whole syndromes.
  const std::size_t per_block = std::max<std::size_t>(1, 16384 / classes);
  for (std::size_t g0 = 0; g0 < gammas.size(); g0 += per_block) {
    const std::size_t count = std::min(per_block, gammas.size() - g0);
    BitRows rows(static_cast<Eigen::Index>(count * classes), static_cast<Eigen::Index>(width));
    for (std::size_t g = 0; g < count; ++g) {
      check_gamma(code, gammas[g0 + g]);
      for (std::size_t c = 0; c < classes; ++c) {
        const std::size_t r = g * classes + c;
        for (std::size_t i = 0; i < code.m; ++i) rows(r, i) = gammas[g0 + g].get(i);
        for (std::size_t j = 0; j < 2 * code.k; ++j) rows(r, code.m + j) = (c >> (2 * code.k - 1 - j)) & 1;
      }
    }
    const auto lcb = log_conditional_beta(params, rows, code.m, code.k);
    for (std::size_t g = 0; g < count; ++g) {
      std::vector<double> table(lcb.begin() + g * classes, lcb.begin() + (g + 1) * classes);
      out.push_back(from_tables(std::move(table), DecodeMethod::kModelArgmax, code.k));
    }
  }
  return out;
}

std::vector<DecodeResult> refine(const SequenceModel& model, const CodeTables& code,
                                 const ErrorLogProb& logprob, const std::vector<gf2::BitVec>& gammas,
                                 std::size_t n_samples, Rng& rng) {
  if (code.k > DecoderLimits::kRefineMaxK) {
    throw Error(ErrorCode::kTooLarge, "refinement enumerates 4^k classes; k=" + std::to_string(code.k) +
                                          " exceeds " + std::to_string(DecoderLimits::kRefineMaxK));
  }
  if (model.seq_len() != 2 * code.n) {
    throw Error(ErrorCode::kShapeMismatch, "model sequence length does not match the code");
  }
  if (n_samples == 0) throw Error(ErrorCode::kBadConfig, "refinement needs at least one sample");
  const std::size_t classes = std::size_t{1} << (2 * code.k);
  const std::size_t start = code.m + 2 * code.k;
  const std::size_t rows_per_gamma = classes * n_samples;
  const std::size_t per_block = std::max<std::size_t>(1, 4096 / rows_per_gamma);
  const double log_n = std::log(static_cast<double>(n_samples));

  std::vector<DecodeResult> out;
  out.reserve(gammas.size());
  for (std::size_t g0 = 0; g0 < gammas.size(); g0 += per_block) {
    const std::size_t count = std::min(per_block, gammas.size() - g0);
    const std::size_t rows = count * rows_per_gamma;
    BitRows work = BitRows::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(2 * code.n));
    for (std::size_t g = 0; g < count; ++g) {
      check_gamma(code, gammas[g0 + g]);
      for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t s = 0; s < n_samples; ++s) {
          const std::size_t r = (g * classes + c) * n_samples + s;
          for (std::size_t i = 0; i < code.m; ++i) work(r, i) = gammas[g0 + g].get(i);
          for (std::size_t j = 0; j < 2 * code.k; ++j) work(r, code.m + j) = (c >> (2 * code.k - 1 - j)) & 1;
        }
      }
    }
    const auto log_q = model.sample_tail(work, start, rng);
    for (std::size_t g = 0; g < count; ++g) {
      std::vector<double> table(classes);
      for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> weights(n_samples);
        for (std::size_t s = 0; s < n_samples; ++s) {
          const std::size_t r = (g * classes + c) * n_samples + s;
          ElsConfig cfg{gammas[g0 + g], row_to_bitvec(work, r, code.m, 2 * code.k),
                        row_to_bitvec(work, r, start, code.m)};
          weights[s] = logprob(els_to_pauli(code, cfg)) - log_q[r];
        }
        table[c] = log_sum_exp(weights) - log_n;
      }
      out.push_back(from_tables(std::move(table), DecodeMethod::kRefined, code.k));
    }
  }
  return out;
}

DecodeResult refine(const SequenceModel& model, const CodeTables& code, const ErrorLogProb& logprob,
                    const gf2::BitVec& gamma, std::size_t n_samples, Rng& rng) {
  return refine(model, code, logprob, std::vector<gf2::BitVec>{gamma}, n_samples, rng).front();
}

DecodeResult refine(const ModelParams<float>& params, const CodeTables& code, const NoiseModel& noise,
                    const gf2::BitVec& gamma, std::size_t n_samples, Rng& rng) {
  const auto logprob = error_logprob(noise);
  return refine(TransformerModel(params), code, logprob, gamma, n_samples, rng);
}

DecodeResult exact_mld(const CodeTables& code, const NoiseModel& noise, const gf2::BitVec& gamma) {
  if (const auto* d = std::get_if<DepolarizingModel>(&noise)) {
    return from_tables(exact_depolarizing(code, *d, gamma).mld, DecodeMethod::kExactMld, code.k);
  }
  return exact_mld(code, error_logprob(noise), gamma);
}

DecodeResult exact_mld(const CodeTables& code, const ErrorLogProb& logprob, const gf2::BitVec& gamma) {
  return from_tables(exact_generic(code, logprob, gamma).mld, DecodeMethod::kExactMld, code.k);
}

DecodeResult exact_minweight(const CodeTables& code, const NoiseModel& noise, const gf2::BitVec& gamma) {
  if (const auto* d = std::get_if<DepolarizingModel>(&noise)) {
    return from_tables(exact_depolarizing(code, *d, gamma).best, DecodeMethod::kExactMinWeight, code.k);
  }
  return exact_minweight(code, error_logprob(noise), gamma);
}

DecodeResult exact_minweight(const CodeTables& code, const ErrorLogProb& logprob,
                             const gf2::BitVec& gamma) {
  return from_tables(exact_generic(code, logprob, gamma).best, DecodeMethod::kExactMinWeight, code.k);
}

ErrorBatch sample_errors(const CodeTables& code, const NoiseModel& noise, std::size_t trials,
                         std::uint64_t seed) {
  ErrorSampler sampler(noise, derive_seed(seed, "noise"));
  if (qubit_count(noise) != code.n) {
    throw Error(ErrorCode::kShapeMismatch, "noise model and code disagree on qubit count");
  }
  ErrorBatch out;
  out.gamma.reserve(trials);
  out.beta.reserve(trials);
  // FNV-1a over the packed error words.
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const auto& e : sampler.sample(trials)) {
    for (auto w : e.words()) {
      for (int b = 0; b < 8; ++b) {
        hash ^= (w >> (8 * b)) & 0xff;
        hash *= 0x100000001b3ULL;
      }
    }
    auto els = pauli_to_els(code, e);
    out.gamma.push_back(std::move(els.gamma));
    out.beta.push_back(std::move(els.beta));
  }
  out.hash = hash;
  return out;
}

std::vector<gf2::BitVec> decode_syndromes(DecodeMethod method, const CodeTables& code,
                                          const NoiseModel& noise, const ModelParams<float>* params,
                                          const std::vector<gf2::BitVec>& gammas,
                                          const DecodeOptions& options) {
  const bool needs_model = method == DecodeMethod::kPretrained || method == DecodeMethod::kRefined ||
                           method == DecodeMethod::kModelArgmax;
  if (needs_model && params == nullptr) {
    throw Error(ErrorCode::kBadConfig, std::string(to_string(method)) + " decoding needs trained parameters");
  }
  // Unique syndromes in first-appearance order.
  std::unordered_map<std::string, std::size_t> index;
  std::vector<gf2::BitVec> unique;
  std::vector<std::size_t> slot(gammas.size());
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    auto [it, fresh] = index.try_emplace(key_of(gammas[i]), unique.size());
    if (fresh) unique.push_back(gammas[i]);
    slot[i] = it->second;
  }

  std::vector<DecodeResult> decoded;
  switch (method) {
    case DecodeMethod::kPretrained:
      decoded = decode_pretrained(*params, code, unique);
      break;
    case DecodeMethod::kModelArgmax:
      decoded = decode_model_argmax(*params, code, unique);
      break;
    case DecodeMethod::kRefined: {
      const auto logprob = error_logprob(noise);
      Rng rng(derive_seed(options.seed, "refine"));
      decoded = refine(TransformerModel(*params), code, logprob, unique, options.refine_samples, rng);
      break;
    }
    case DecodeMethod::kExactMld:
      for (const auto& g : unique) decoded.push_back(exact_mld(code, noise, g));
      break;
    case DecodeMethod::kExactMinWeight:
      for (const auto& g : unique) decoded.push_back(exact_minweight(code, noise, g));
      break;
  }
  std::vector<gf2::BitVec> out;
  out.reserve(gammas.size());
  for (std::size_t i = 0; i < gammas.size(); ++i) out.push_back(decoded[slot[i]].beta_hat);
  return out;
}

std::vector<LogicalErrorRecord> score(const ErrorBatch& batch, const std::vector<gf2::BitVec>& beta_hat) {
  if (beta_hat.size() != batch.gamma.size()) {
    throw Error(ErrorCode::kLengthMismatch, "decoded and sampled batch sizes differ");
  }
  std::vector<LogicalErrorRecord> out;
  out.reserve(beta_hat.size());
  for (std::size_t i = 0; i < beta_hat.size(); ++i) {
    out.push_back({batch.gamma[i], batch.beta[i], beta_hat[i], beta_hat[i] == batch.beta[i]});
  }
  return out;
}

RateEstimate logical_error_rate(const CodeTables& code, const NoiseModel& noise, DecodeMethod method,
                                std::size_t trials, std::uint64_t seed, const ModelParams<float>* params,
                                const DecodeOptions& options, std::vector<LogicalErrorRecord>* records) {
  const auto batch = sample_errors(code, noise, trials, seed);
  auto recs = score(batch, decode_syndromes(method, code, noise, params, batch.gamma, options));
  std::size_t failures = 0;
  for (const auto& r : recs) failures += !r.success;
  if (records != nullptr) *records = std::move(recs);
  return RateEstimate::from_counts(failures, trials);
}

}  // namespace qecgpt
