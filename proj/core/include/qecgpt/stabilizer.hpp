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
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "qecgpt/gf2.hpp"

namespace qecgpt {

/// An n-qubit Pauli operator modulo phase: 2n bits in (z|x) layout, so qubit i
/// is I=00, X=01, Z=10, Y=11 when read as the pair (bit i, bit n+i).
using PauliVec = gf2::BitVec;

/// Builds a Pauli vector from a string over {I,X,Y,Z}.
PauliVec pauli_from_string(std::string_view ops);
std::string pauli_to_string(const PauliVec& p);

/// The three generator families of an error: syndrome gamma (m bits), logical
/// powers beta (2k bits, ordered x1, z1, ..., xk, zk) and stabilizer powers
/// alpha (m bits). The model consumes them in the order [gamma, beta, alpha].
struct ElsConfig {
  gf2::BitVec gamma;
  gf2::BitVec beta;
  gf2::BitVec alpha;

  gf2::BitVec sequence() const { return gamma.concat(beta).concat(alpha); }
  static ElsConfig from_sequence(const gf2::BitVec& seq, std::size_t m, std::size_t k);
  friend bool operator==(const ElsConfig&, const ElsConfig&) = default;
};

/// Stabilizer, pure-error and logical generators for one code.
///
/// Rows of `stabilizers` are g_1..g_m, rows of `pure_errors` are e_1..e_m with
/// <g_i, e_j> = delta_ij, and rows of `logicals` are l_x1, l_z1, ..., l_xk,
/// l_zk. The *_swapped members hold each row with its halves exchanged so
/// that the symplectic product with an error is a plain dot product.
struct CodeTables {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t m = 0;
  gf2::BitMatrix stabilizers;
  gf2::BitMatrix pure_errors;
  gf2::BitMatrix logicals;
  /// Human-readable provenance, e.g. "surface:3" or "surface:3+puncture:2@7".
  std::string name;

  gf2::BitMatrix stabilizers_swapped;
  gf2::BitMatrix pure_errors_swapped;
  gf2::BitMatrix logicals_swapped;
};

enum class CodeKind { kSurface, kRotatedSurface, kToric, kRepetition, kFile };

/// Description of a code to build: a lattice family with its size, or a
/// parity-check file. `puncture` random stabilizers are removed afterwards.
struct CodeSpec {
  CodeKind kind = CodeKind::kSurface;
  std::size_t size = 3;
  std::filesystem::path path;
  std::size_t puncture = 0;
  std::uint64_t puncture_seed = 0;

  /// Parses "surface3", "surface:3", "rotated_surface:5", "toric:3",
  /// "repetition:5", "rep5", "file:<path>", optionally followed by
  /// "+puncture:<count>@<seed>".
  static CodeSpec parse(std::string_view text);
  std::string to_string() const;
};

CodeTables build_code(const CodeSpec& spec);

/// Planar surface code with n = d^2 + (d-1)^2 qubits and k = 1.
gf2::BitMatrix surface_code_checks(std::size_t d);
/// Rotated surface code with n = d^2 qubits and k = 1.
gf2::BitMatrix rotated_surface_code_checks(std::size_t d);
/// Toric code with n = 2 d^2 qubits and k = 2 (one dependent check of each
/// type is dropped).
gf2::BitMatrix toric_code_checks(std::size_t d);
/// Bit-flip repetition code: Z_i Z_{i+1}.
gf2::BitMatrix repetition_code_checks(std::size_t n);

/// Completes a full-rank, self-commuting check matrix into CodeTables.
/// Throws Error(kRankDeficient) or Error(kBadFile) for non-commuting checks.
CodeTables tables_from_checks(gf2::BitMatrix checks, std::string name);

/// Pure-error generators: solves (H Lambda) e_i^T = u_i on the echelon form of
/// (H Lambda | I) with free variables at zero, then repairs mutual
/// commutation by adding stabilizer rows.
gf2::BitMatrix find_pure_errors(const gf2::BitMatrix& checks);

/// Logical generators: a one-hot kernel basis of [H; M_E] Lambda, rearranged
/// by symplectic Gram-Schmidt into anticommuting (l_x, l_z) pairs.
gf2::BitMatrix find_logicals(const gf2::BitMatrix& checks, const gf2::BitMatrix& pure_errors);

gf2::BitVec syndrome(const CodeTables& code, const PauliVec& error);
ElsConfig pauli_to_els(const CodeTables& code, const PauliVec& error);
PauliVec els_to_pauli(const CodeTables& code, const ElsConfig& config);

/// Removes `remove` uniformly random stabilizer generators and rebuilds the
/// pure errors and logicals from scratch.
CodeTables puncture(const CodeTables& code, std::size_t remove, std::uint64_t seed);

/// Outcome of the five defining matrix identities plus the rank check.
struct InvariantReport {
  bool full_rank = false;
  bool stabilizers_commute = false;
  bool pure_errors_dual = false;
  bool pure_errors_commute = false;
  bool logicals_commute_with_group = false;
  bool logicals_paired = false;

  bool ok() const {
    return full_rank && stabilizers_commute && pure_errors_dual && pure_errors_commute &&
           logicals_commute_with_group && logicals_paired;
  }
  std::string describe() const;
};

InvariantReport check_invariants(const CodeTables& code);

/// Parity-check text format: a "n k" line, then m = n - k rows of 2n
/// characters in (z|x) layout. Blank lines and '#' comments are ignored.
gf2::BitMatrix read_parity_check(std::istream& in, std::size_t* k_out = nullptr);
gf2::BitMatrix read_parity_check_file(const std::filesystem::path& path,
                                      std::size_t* k_out = nullptr);
void write_parity_check(std::ostream& out, const CodeTables& code);

}  // namespace qecgpt
