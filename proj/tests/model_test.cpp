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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "qecgpt/error.hpp"

namespace qecgpt {
namespace {

ModelConfig small_config(std::size_t seq_len) {
  return ModelConfig{seq_len, 8, 2, 2, 12};
}

// All 2^width bit patterns, bit i of the index at column i.
BitRows all_patterns(std::size_t width) {
  const std::size_t count = std::size_t{1} << width;
  BitRows rows(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t i = 0; i < width; ++i) rows(r, i) = (r >> i) & 1;
  }
  return rows;
}

BitRows random_rows(Rng& rng, std::size_t count, std::size_t width) {
  BitRows rows(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t i = 0; i < width; ++i) rows(r, i) = rng() & 1;
  }
  return rows;
}

// Bigger-than-default weights so the conditionals are far from uniform.
ModelParams<double> random_params(const ModelConfig& cfg, std::uint64_t seed) {
  auto p = init_params<double>(cfg, seed);
  Rng rng(seed + 1000);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (auto& v : p.values()) v += noise(rng);
  return p;
}

TEST(ModelConfig, Validation) {
  EXPECT_NO_THROW((ModelConfig{6, 8, 2, 1, 8}.validate()));
  EXPECT_THROW((ModelConfig{6, 8, 3, 1, 8}.validate()), Error);
  EXPECT_THROW((ModelConfig{0, 8, 2, 1, 8}.validate()), Error);
}

TEST(Layout, SizesAndOrder) {
  const ModelConfig cfg{6, 8, 2, 2, 12};
  const ParamLayout lay(cfg);
  std::size_t expect = 2 * 8 + 6 * 8;
  expect += 2 * (8 + 8 + 8 * 24 + 24 + 64 + 8 + 8 + 8 + 8 * 12 + 12 + 12 * 8 + 8);
  expect += 8 + 8 + 6 * 8 + 6;
  EXPECT_EQ(lay.size(), expect);
  std::size_t offset = 0;
  for (const auto& t : lay.tensors()) {
    EXPECT_EQ(t.offset, offset) << t.name;
    offset += t.rows * t.cols;
  }
  EXPECT_EQ(lay.tensors()[lay.head_bias()].name, "head.bias");
  EXPECT_EQ(lay.tensors()[lay.layer(1, ParamLayout::kFf2Weight)].name, "layer1.ff2.weight");
}

TEST(Forward, ZeroParamsGiveHalf) {
  const ModelParams<double> zero(small_config(6));
  const auto out = forward(zero, gf2::BitVec::from_string("101100"));
  for (double v : out) EXPECT_EQ(v, 0.5);
  ElsConfig c{gf2::BitVec::from_string("10"), gf2::BitVec::from_string("01"),
              gf2::BitVec::from_string("11")};
  EXPECT_NEAR(log_joint(zero, c), -6 * std::log(2.0), 1e-12);
  EXPECT_NEAR(log_conditional_beta(zero, c.beta, c.gamma), -2 * std::log(2.0), 1e-12);
}

TEST(Forward, ShapeMismatch) {
  const auto p = init_params<double>(small_config(6), 1);
  EXPECT_THROW(forward(p, gf2::BitVec(5)), Error);
  EXPECT_THROW(forward_logits(p, BitRows::Zero(2, 6), 7), Error);
  EXPECT_THROW(forward_logits(p, BitRows::Zero(2, 3), 6), Error);
}

TEST(Forward, Causality) {
  const std::size_t t = 10;
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = random_params(small_config(t), seed);
    const BitRows x = random_rows(rng, 1, t);
    const auto base = forward_logits(p, x, t);
    for (std::size_t j = 0; j < t; ++j) {
      BitRows y = x;
      y(0, j) ^= 1;
      const auto moved = forward_logits(p, y, t);
      // Output i conditions on x_<i, so flipping x_j leaves outputs 0..j fixed.
      for (std::size_t i = 0; i <= j; ++i) EXPECT_EQ(moved(0, i), base(0, i)) << "i=" << i << " j=" << j;
      if (j + 1 < t) {
        double change = 0.0;
        for (std::size_t i = j + 1; i < t; ++i) change += std::abs(moved(0, i) - base(0, i));
        EXPECT_GT(change, 0.0);
      }
    }
  }
}

TEST(Forward, PrefixLengthConsistent) {
  const std::size_t t = 8;
  const auto p = random_params(small_config(t), 4);
  Rng rng(5);
  const BitRows x = random_rows(rng, 7, t);
  const auto full = forward_logits(p, x, t);
  for (std::size_t len = 1; len <= t; ++len) {
    const auto part = forward_logits(p, x, len);
    for (Eigen::Index b = 0; b < x.rows(); ++b) {
      for (std::size_t i = 0; i < len; ++i) EXPECT_NEAR(part(b, i), full(b, i), 1e-12);
    }
  }
}

TEST(Forward, IncrementalMatchesFullPass) {
  const std::size_t t = 10;
  const auto p = random_params(small_config(t), 6);
  Rng rng(8);
  const BitRows x = random_rows(rng, 9, t);
  const auto full = forward_logits(p, x, t);
  IncrementalForward<double> inc(p, 9);
  for (std::size_t i = 0; i < t; ++i) {
    const auto z = inc.step(x);
    for (Eigen::Index b = 0; b < x.rows(); ++b) EXPECT_NEAR(z(b), full(b, i), 1e-12);
  }
  EXPECT_THROW(inc.step(x), Error);
}

TEST(Normalization, JointSumsToOne) {
  for (std::size_t t : {2u, 6u, 12u}) {
    const auto p = random_params(small_config(t), 10 + t);
    const auto lj = log_joint(p, all_patterns(t));
    double total = 0.0;
    for (double v : lj) total += std::exp(v);
    EXPECT_NEAR(total, 1.0, 1e-6) << "seq_len=" << t;
  }
}

TEST(Normalization, FloatModelSumsToOne) {
  const auto p = random_params(small_config(10), 77).cast<float>();
  double total = 0.0;
  for (double v : log_joint(p, all_patterns(10))) total += std::exp(v);
  EXPECT_NEAR(total, 1.0, 1e-5);
}

TEST(Normalization, ConditionalBetaSumsToOne) {
  // n = 5, k = 3, m = 2: sequence length 10, beta has 6 bits.
  const std::size_t m = 2;
  const std::size_t k = 3;
  const auto p = random_params(small_config(2 * (m + k)), 21);
  const BitRows betas = all_patterns(2 * k);
  for (std::size_t g = 0; g < (std::size_t{1} << m); ++g) {
    BitRows prefix(betas.rows(), static_cast<Eigen::Index>(m + 2 * k));
    for (Eigen::Index r = 0; r < betas.rows(); ++r) {
      for (std::size_t i = 0; i < m; ++i) prefix(r, i) = (g >> i) & 1;
      prefix.row(r).tail(2 * k) = betas.row(r);
    }
    double total = 0.0;
    for (double v : log_conditional_beta(p, prefix, m, k)) total += std::exp(v);
    EXPECT_NEAR(total, 1.0, 1e-6) << "gamma=" << g;
  }
}

TEST(Normalization, MarginalizationIdentity) {
  // n = 6, k = 1, m = 5: q(beta | gamma) equals the alpha-marginal of the joint.
  const std::size_t m = 5;
  const std::size_t k = 1;
  const std::size_t t = 2 * (m + k);
  const auto p = random_params(small_config(t), 31);
  const BitRows all = all_patterns(t);
  const auto lj = log_joint(p, all);
  const std::size_t gammas = std::size_t{1} << m;
  const std::size_t betas = std::size_t{1} << (2 * k);
  std::vector<double> joint(gammas * betas, 0.0);
  for (Eigen::Index r = 0; r < all.rows(); ++r) {
    const std::size_t idx = static_cast<std::size_t>(r);
    const std::size_t g = idx & (gammas - 1);
    const std::size_t b = (idx >> m) & (betas - 1);
    joint[g * betas + b] += std::exp(lj[idx]);
  }
  BitRows prefix(static_cast<Eigen::Index>(gammas * betas), static_cast<Eigen::Index>(m + 2 * k));
  for (std::size_t g = 0; g < gammas; ++g) {
    for (std::size_t b = 0; b < betas; ++b) {
      for (std::size_t i = 0; i < m; ++i) prefix(g * betas + b, i) = (g >> i) & 1;
      for (std::size_t i = 0; i < 2 * k; ++i) prefix(g * betas + b, m + i) = (b >> i) & 1;
    }
  }
  const auto lcb = log_conditional_beta(p, prefix, m, k);
  for (std::size_t g = 0; g < gammas; ++g) {
    double marginal = 0.0;
    for (std::size_t b = 0; b < betas; ++b) marginal += joint[g * betas + b];
    for (std::size_t b = 0; b < betas; ++b) {
      EXPECT_NEAR(std::exp(lcb[g * betas + b]), joint[g * betas + b] / marginal, 1e-6);
    }
  }
}

TEST(Generate, ZeroParamsTieGoesToZero) {
  const std::size_t m = 4;
  const std::size_t k = 2;
  const ModelParams<float> zero(small_config(2 * (m + k)));
  Rng rng(1);
  const BitRows gamma = random_rows(rng, 9, m);
  reset_forward_pass_count();
  const auto gen = generate_beta(zero, gamma, k, GenerateMode::kArgmax);
  EXPECT_EQ(forward_pass_count(), 2 * k);
  EXPECT_EQ(gen.beta.cast<int>().sum(), 0);
  for (Eigen::Index b = 0; b < gen.bit_logprob.rows(); ++b) {
    for (Eigen::Index j = 0; j < gen.bit_logprob.cols(); ++j) {
      EXPECT_NEAR(gen.bit_logprob(b, j), -std::log(2.0), 1e-6);
    }
  }
}

TEST(Generate, PassCountIndependentOfBatch) {
  for (std::size_t k : {1u, 3u, 5u}) {
    const std::size_t m = 3;
    const auto p = init_params<float>(small_config(2 * (m + k)), k);
    Rng rng(k);
    reset_forward_pass_count();
    generate_beta(p, random_rows(rng, 100, m), k, GenerateMode::kArgmax);
    EXPECT_EQ(forward_pass_count(), 2 * k);
    reset_forward_pass_count();
    generate_beta(p, random_rows(rng, 3, m), k, GenerateMode::kSample, &rng);
    EXPECT_EQ(forward_pass_count(), 2 * k);
  }
}

TEST(Generate, ArgmaxFollowsConditionals) {
  const std::size_t m = 3;
  const std::size_t k = 2;
  const auto p = random_params(small_config(2 * (m + k)), 41);
  Rng rng(2);
  const BitRows gamma = random_rows(rng, 20, m);
  const auto gen = generate_beta(p, gamma, k, GenerateMode::kArgmax);
  for (Eigen::Index b = 0; b < gamma.rows(); ++b) {
    BitRows seq = BitRows::Zero(1, static_cast<Eigen::Index>(2 * (m + k)));
    seq.row(0).head(m) = gamma.row(b);
    seq.row(0).segment(m, 2 * k) = gen.beta.row(b);
    const auto z = forward_logits(p, seq, m + 2 * k);
    for (std::size_t j = 0; j < 2 * k; ++j) {
      EXPECT_EQ(gen.beta(b, j) != 0, z(0, m + j) > 0);
      EXPECT_GE(gen.bit_logprob(b, j), std::log(0.5) - 1e-12);
    }
  }
}

TEST(SampleAlpha, ZeroParamsFairCoins) {
  const std::size_t m = 6;
  const std::size_t k = 1;
  const ModelParams<float> zero(small_config(2 * (m + k)));
  Rng rng(7);
  const std::size_t n = 4000;
  const auto s = sample_alpha(zero, gf2::BitVec(2), gf2::BitVec(m), rng, n);
  ASSERT_EQ(static_cast<std::size_t>(s.alpha.rows()), n);
  ASSERT_EQ(static_cast<std::size_t>(s.alpha.cols()), m);
  const double mean = s.alpha.cast<double>().mean();
  EXPECT_NEAR(mean, 0.5, 3 * std::sqrt(0.25 / (n * m)));
  for (double lq : s.log_proposal) EXPECT_NEAR(lq, -static_cast<double>(m) * std::log(2.0), 1e-5);
}

TEST(SampleAlpha, LogProposalIsJointMinusPrefix) {
  const std::size_t m = 4;
  const std::size_t k = 1;
  const auto p = random_params(small_config(2 * (m + k)), 51);
  Rng rng(8);
  const auto gamma = gf2::BitVec::from_string("1010");
  const auto beta = gf2::BitVec::from_string("01");
  const auto s = sample_alpha(p, beta, gamma, rng, 50);
  const double prefix_lp = [&] {
    ElsConfig zero_alpha{gamma, beta, gf2::BitVec(m)};
    const auto z = forward_logits(p, sequence_rows({zero_alpha}), m + 2 * k);
    double lp = 0.0;
    const auto seq = zero_alpha.sequence();
    for (std::size_t i = 0; i < m + 2 * k; ++i) {
      const double q1 = 1.0 / (1.0 + std::exp(-z(0, i)));
      lp += std::log(seq.get(i) ? q1 : 1.0 - q1);
    }
    return lp;
  }();
  for (Eigen::Index r = 0; r < s.alpha.rows(); ++r) {
    const ElsConfig c{gamma, beta, row_to_bitvec(s.alpha, r, 0, m)};
    EXPECT_NEAR(s.log_proposal[r], log_joint(p, c) - prefix_lp, 1e-9);
  }
}

TEST(SampleAlpha, EmpiricalMatchesConditional) {
  const std::size_t m = 3;
  const std::size_t k = 1;
  const auto p = random_params(small_config(2 * (m + k)), 61);
  Rng rng(9);
  const auto gamma = gf2::BitVec::from_string("011");
  const auto beta = gf2::BitVec::from_string("10");
  const std::size_t n = 20000;
  const auto s = sample_alpha(p, beta, gamma, rng, n);
  std::vector<double> counts(8, 0.0);
  for (Eigen::Index r = 0; r < s.alpha.rows(); ++r) {
    counts[s.alpha(r, 0) + 2 * s.alpha(r, 1) + 4 * s.alpha(r, 2)] += 1;
  }
  std::vector<double> exact(8);
  double total = 0.0;
  for (std::size_t a = 0; a < 8; ++a) {
    gf2::BitVec alpha(m);
    for (std::size_t i = 0; i < m; ++i) alpha.set(i, (a >> i) & 1);
    exact[a] = std::exp(log_joint(p, ElsConfig{gamma, beta, alpha}));
    total += exact[a];
  }
  for (std::size_t a = 0; a < 8; ++a) {
    const double q = exact[a] / total;
    EXPECT_NEAR(counts[a] / n, q, 4 * std::sqrt(q * (1 - q) / n) + 1e-12) << a;
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  // Tiny model: d_model 8, one layer, n = 3.
  const ModelConfig cfg{6, 8, 2, 1, 8};
  auto p = init_params<long double>(cfg, 3);
  Rng rng(10);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (auto& v : p.values()) v += noise(rng);
  const BitRows batch = random_rows(rng, 5, 6);
  const auto g = grad_nll(p, batch);
  EXPECT_NEAR(g.nll, mean_nll(p, batch), 1e-12);

  const long double h = 1e-4L;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto plus = p;
    auto minus = p;
    plus.values()[i] += h;
    minus.values()[i] -= h;
    const double fd = static_cast<double>(
        (static_cast<long double>(mean_nll(plus, batch)) - static_cast<long double>(mean_nll(minus, batch))) /
        (2 * h));
    const double an = static_cast<double>(g.grad.values()[i]);
    const double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
    const double rel = std::abs(fd - an) / scale;
    worst = std::max(worst, rel);
    EXPECT_LT(rel, 1e-4) << p.layout().tensors().size() << " coordinate " << i << " analytic " << an
                         << " numeric " << fd;
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Gradient, DuplicatedBatchSameGradient) {
  const auto p = random_params(small_config(6), 71);
  Rng rng(11);
  const BitRows batch = random_rows(rng, 40, 6);
  BitRows twice(80, 6);
  twice.topRows(40) = batch;
  twice.bottomRows(40) = batch;
  const auto a = grad_nll(p, batch);
  const auto b = grad_nll(p, twice);
  EXPECT_NEAR(a.nll, b.nll, 1e-12);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(a.grad.values()[i], b.grad.values()[i], 1e-12);
}

TEST(Gradient, LogisticOptimumHasZeroGradient) {
  // With every weight zero, output i is sigmoid(head_bias[i]) and the NLL
  // separates into one logistic regression per position.
  ModelParams<double> p(small_config(4));
  BitRows batch = BitRows::Zero(4, 4);
  batch(0, 0) = 1;  // x_0 = 1 in one of four rows
  const std::size_t hb = p.layout().head_bias();
  p.tensor(hb)(0, 0) = std::log(1.0 / 3.0);
  const auto g = grad_nll(p, batch);
  EXPECT_NEAR(g.grad.tensor(hb)(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(g.grad.tensor(hb)(0, 1), 0.5, 1e-15);
}

TEST(Gradient, EmptyBatchRejected) {
  const ModelParams<double> p(small_config(4));
  EXPECT_THROW(grad_nll(p, BitRows(0, 4)), Error);
}

TEST(Gradient, NonFiniteDetected) {
  auto p = init_params<double>(small_config(4), 1);
  p.tensor(p.layout().head_bias())(0, 2) = std::numeric_limits<double>::quiet_NaN();
  try {
    grad_nll(p, BitRows::Zero(2, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
}

TEST(Init, DeterministicPerSeed) {
  const auto a = init_params<float>(small_config(8), 5);
  const auto b = init_params<float>(small_config(8), 5);
  const auto c = init_params<float>(small_config(8), 6);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_NE(a.values(), c.values());
  EXPECT_TRUE(a.all_finite());
}

TEST(Checkpoint, RoundTripBitExact) {
  const auto p = random_params(small_config(8), 81).cast<float>();
  std::stringstream buf;
  save_checkpoint(buf, p, CheckpointInfo{17, 1234, "repetition:4", "depolarizing(p=0.1)"});
  CheckpointInfo info;
  const auto q = load_checkpoint(buf, &info);
  EXPECT_EQ(q.config(), p.config());
  EXPECT_EQ(q.values(), p.values());
  EXPECT_EQ(info.seed, 17u);
  EXPECT_EQ(info.step, 1234u);
  EXPECT_EQ(info.code, "repetition:4");
  Rng rng(12);
  const BitRows batch = random_rows(rng, 30, 8);
  EXPECT_EQ(mean_nll(p, batch), mean_nll(q, batch));
}

TEST(Checkpoint, RejectsCorruption) {
  std::stringstream bad("not-a-checkpoint");
  EXPECT_THROW(load_checkpoint(bad), Error);

  const auto p = init_params<float>(small_config(4), 1);
  std::stringstream buf;
  save_checkpoint(buf, p, {});
  const std::string full = buf.str();
  std::stringstream truncated(full.substr(0, full.size() - 3));
  try {
    load_checkpoint(truncated);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadFile);
  }
}

}  // namespace
}  // namespace qecgpt
