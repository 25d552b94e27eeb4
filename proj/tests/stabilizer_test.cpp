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

#include "qecgpt/stabilizer.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "qecgpt/error.hpp"

namespace qecgpt {
namespace {

using gf2::BitMatrix;
using gf2::BitVec;

PauliVec random_pauli(std::mt19937_64& rng, std::size_t n) {
  PauliVec p(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) p.set(i, rng() & 1);
  return p;
}

std::vector<std::string> all_builtin_specs() {
  return {"surface:3", "surface:5", "rotated_surface:3", "rotated_surface:5", "toric:3",
          "toric:4",   "repetition:3", "repetition:4", "repetition:5", "repetition:7"};
}

TEST(BuildCode, Dimensions) {
  const auto s3 = build_code(CodeSpec::parse("surface:3"));
  EXPECT_EQ(s3.n, 13u);
  EXPECT_EQ(s3.k, 1u);
  EXPECT_EQ(s3.m, 12u);
  const auto s5 = build_code(CodeSpec::parse("surface5"));
  EXPECT_EQ(s5.n, 41u);
  EXPECT_EQ(s5.k, 1u);
  const auto r3 = build_code(CodeSpec::parse("rotated_surface:3"));
  EXPECT_EQ(r3.n, 9u);
  EXPECT_EQ(r3.k, 1u);
  const auto t3 = build_code(CodeSpec::parse("toric:3"));
  EXPECT_EQ(t3.n, 18u);
  EXPECT_EQ(t3.k, 2u);
  EXPECT_EQ(t3.m, 16u);
}

TEST(BuildCode, RepetitionChecks) {
  const auto r = build_code(CodeSpec::parse("repetition:3"));
  EXPECT_EQ(r.k, 1u);
  EXPECT_EQ(r.stabilizers, (BitMatrix{{1, 1, 0, 0, 0, 0}, {0, 1, 1, 0, 0, 0}}));
}

TEST(BuildCode, EvenDistanceRejected) {
  EXPECT_THROW(build_code(CodeSpec::parse("surface:4")), Error);
  EXPECT_THROW(CodeSpec::parse("hexagon:3"), Error);
}

TEST(BuildCode, AllInvariantsHoldForBuiltins) {
  for (const auto& spec : all_builtin_specs()) {
    const auto code = build_code(CodeSpec::parse(spec));
    const auto report = check_invariants(code);
    EXPECT_TRUE(report.ok()) << spec << "\n" << report.describe();
  }
}

TEST(PureErrors, RepetitionThree) {
  const auto h = repetition_code_checks(3);
  const auto me = find_pure_errors(h);
  ASSERT_EQ(me.rows(), 2u);
  // e_1 is X_1; e_2 is whichever solution the zero-free-variable rule picks,
  // and the defining identities are the oracle.
  EXPECT_EQ(pauli_to_string(me.row(0)), "XII");
  EXPECT_EQ(gf2::symplectic_gram(h, me), BitMatrix::identity(2));
  EXPECT_TRUE(gf2::symplectic_gram(me, me).is_zero());
}

TEST(PureErrors, RejectsDependentChecks) {
  auto h = repetition_code_checks(3);
  h.append_row(h.row(0) ^ h.row(1));
  try {
    find_pure_errors(h);
    FAIL() << "expected RankDeficient";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankDeficient);
  }
}

TEST(Logicals, RepetitionThreePair) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  ASSERT_EQ(code.logicals.rows(), 2u);
  const auto& lx = code.logicals.row(0);
  const auto& lz = code.logicals.row(1);
  EXPECT_TRUE(gf2::symplectic_product(lx, lz));
  for (std::size_t i = 0; i < code.m; ++i) {
    EXPECT_FALSE(gf2::symplectic_product(lx, code.stabilizers.row(i)));
    EXPECT_FALSE(gf2::symplectic_product(lz, code.stabilizers.row(i)));
    EXPECT_FALSE(gf2::symplectic_product(lx, code.pure_errors.row(i)));
    EXPECT_FALSE(gf2::symplectic_product(lz, code.pure_errors.row(i)));
  }
}

TEST(Logicals, ToricHasTwoPairs) {
  const auto code = build_code(CodeSpec::parse("toric:3"));
  EXPECT_EQ(code.logicals.rows(), 4u);
  EXPECT_TRUE(check_invariants(code).logicals_paired);
}

TEST(Syndrome, Examples) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  EXPECT_EQ(syndrome(code, pauli_from_string("IXI")), (BitVec{1, 1}));
  EXPECT_EQ(syndrome(code, pauli_from_string("III")), (BitVec{0, 0}));
  EXPECT_EQ(syndrome(code, pauli_from_string("ZII")), (BitVec{0, 0}));
  EXPECT_THROW(syndrome(code, pauli_from_string("II")), Error);
}

TEST(Syndrome, InvariantUnderStabilizersAndLogicals) {
  std::mt19937_64 rng(17);
  for (const auto& spec : all_builtin_specs()) {
    const auto code = build_code(CodeSpec::parse(spec));
    for (int t = 0; t < 50; ++t) {
      const auto e = random_pauli(rng, code.n);
      PauliVec s(2 * code.n);
      for (std::size_t i = 0; i < code.m; ++i) {
        if (rng() & 1) s ^= code.stabilizers.row(i);
      }
      PauliVec l(2 * code.n);
      for (std::size_t j = 0; j < 2 * code.k; ++j) {
        if (rng() & 1) l ^= code.logicals.row(j);
      }
      ASSERT_EQ(syndrome(code, e ^ s), syndrome(code, e));
      ASSERT_EQ(syndrome(code, e ^ l), syndrome(code, e));
    }
  }
}

TEST(Els, Examples) {
  const auto code = build_code(CodeSpec::parse("repetition:3"));
  const auto zero = pauli_to_els(code, pauli_from_string("III"));
  EXPECT_TRUE(zero.gamma.is_zero() && zero.beta.is_zero() && zero.alpha.is_zero());
  const auto x1 = pauli_to_els(code, pauli_from_string("XII"));
  EXPECT_EQ(x1.gamma, (BitVec{1, 0}));
  EXPECT_EQ(x1.beta, (BitVec{0, 0}));
  EXPECT_EQ(x1.alpha, (BitVec{0, 0}));
  EXPECT_EQ(pauli_to_string(els_to_pauli(code, {BitVec{1, 0}, BitVec{0, 0}, BitVec{0, 0}})), "XII");
  EXPECT_EQ(pauli_to_string(els_to_pauli(code, {BitVec(2), BitVec(2), BitVec(2)})), "III");
  EXPECT_THROW(els_to_pauli(code, {BitVec(3), BitVec(2), BitVec(2)}), Error);
}

TEST(Els, ExhaustiveRoundTripSmallCodes) {
  for (const char* spec : {"repetition:3", "repetition:4", "repetition:5"}) {
    const auto code = build_code(CodeSpec::parse(spec));
    const std::size_t bits = 2 * code.n;
    std::set<std::string> seen;
    for (std::uint64_t v = 0; v < (std::uint64_t{1} << bits); ++v) {
      PauliVec e(bits);
      for (std::size_t i = 0; i < bits; ++i) e.set(i, (v >> i) & 1);
      const auto c = pauli_to_els(code, e);
      ASSERT_EQ(els_to_pauli(code, c), e);
      // Config -> Pauli -> config on the same enumeration.
      const auto as_config = ElsConfig::from_sequence(e, code.m, code.k);
      ASSERT_EQ(pauli_to_els(code, els_to_pauli(code, as_config)), as_config);
      seen.insert(c.sequence().to_string());
    }
    EXPECT_EQ(seen.size(), std::size_t{1} << bits);
  }
}

TEST(Els, RandomRoundTripLargerCodes) {
  std::mt19937_64 rng(23);
  for (const auto& spec : all_builtin_specs()) {
    const auto code = build_code(CodeSpec::parse(spec));
    for (int t = 0; t < 1000; ++t) {
      const auto e = random_pauli(rng, code.n);
      ASSERT_EQ(els_to_pauli(code, pauli_to_els(code, e)), e) << spec;
    }
  }
}

TEST(Els, CosetOfStabilizersIsDegenerate) {
  const auto code = build_code(CodeSpec::parse("surface:3"));
  std::mt19937_64 rng(29);
  ElsConfig c{BitVec(code.m), BitVec(2 * code.k), BitVec(code.m)};
  for (std::size_t i = 0; i < code.m; ++i) c.gamma.set(i, rng() & 1);
  c.beta.set(0, true);
  std::set<std::string> distinct;
  for (std::uint64_t a = 0; a < (std::uint64_t{1} << code.m); ++a) {
    for (std::size_t i = 0; i < code.m; ++i) c.alpha.set(i, (a >> i) & 1);
    const auto e = els_to_pauli(code, c);
    ASSERT_EQ(syndrome(code, e), c.gamma);
    distinct.insert(e.to_string());
  }
  EXPECT_EQ(distinct.size(), std::size_t{1} << code.m);
}

TEST(Puncture, SurfaceThree) {
  const auto base = build_code(CodeSpec::parse("surface:3"));
  const auto k3 = puncture(base, 2, 1);
  EXPECT_EQ(k3.k, 3u);
  EXPECT_EQ(k3.m, 10u);
  EXPECT_TRUE(check_invariants(k3).ok()) << check_invariants(k3).describe();
  const auto k7 = puncture(base, 6, 1);
  EXPECT_EQ(k7.k, 7u);
  EXPECT_EQ(std::size_t{1} << (2 * k7.k), 16384u);
  EXPECT_TRUE(check_invariants(k7).ok());
  const auto same = puncture(base, 0, 1);
  EXPECT_EQ(same.n, base.n);
  EXPECT_EQ(same.k, base.k);
  EXPECT_EQ(same.stabilizers, base.stabilizers);
}

TEST(Puncture, RandomPuncturesKeepInvariants) {
  const auto base = build_code(CodeSpec::parse("surface:3"));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto code = puncture(base, 1 + seed % 7, seed);
    ASSERT_TRUE(check_invariants(code).ok()) << code.name;
  }
  const auto spec = CodeSpec::parse("surface:3+puncture:2@5");
  EXPECT_EQ(spec.to_string(), "surface:3+puncture:2@5");
  EXPECT_EQ(build_code(spec).k, 3u);
}

TEST(ParityCheckFile, RoundTrip) {
  const auto code = build_code(CodeSpec::parse("rotated_surface:3"));
  std::stringstream buffer;
  write_parity_check(buffer, code);
  std::size_t k = 0;
  const auto h = read_parity_check(buffer, &k);
  EXPECT_EQ(k, 1u);
  EXPECT_EQ(h, code.stabilizers);
}

TEST(ParityCheckFile, CommentsAndBlankLines) {
  std::istringstream in("# repetition\n\n3 1\n110000  # Z1 Z2\n\n011000\n");
  const auto h = read_parity_check(in);
  EXPECT_EQ(h, repetition_code_checks(3));
}

TEST(ParityCheckFile, MalformedInputs) {
  auto expect_code = [](const std::string& text, ErrorCode code) {
    std::istringstream in(text);
    try {
      tables_from_checks(read_parity_check(in), "test");
      ADD_FAILURE() << "no error for:\n" << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  expect_code("", ErrorCode::kBadFile);
  expect_code("3\n110000\n011000\n", ErrorCode::kBadFile);
  expect_code("3 1\n11000\n011000\n", ErrorCode::kBadFile);
  expect_code("3 1\n110000\n", ErrorCode::kBadFile);
  expect_code("3 1\n110002\n011000\n", ErrorCode::kBadFile);
  expect_code("3 1\n110000\n000100\n", ErrorCode::kBadFile);  // Z1Z2 vs X1 anticommute
  expect_code("3 1\n110000\n110000\n", ErrorCode::kRankDeficient);
}

}  // namespace
}  // namespace qecgpt
