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

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace qecgpt::gf2 {

/// Dense bit vector over GF(2), packed into 64-bit words. Bits past `size()`
/// in the last word are always zero.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}
  BitVec(std::initializer_list<int> bits);

  /// Parses a string of '0'/'1' characters.
  static BitVec from_string(std::string_view bits);
  static BitVec unit(std::size_t size, std::size_t index);

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  bool get(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool value) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (value) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }
  void flip(std::size_t i) noexcept { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }
  bool operator[](std::size_t i) const noexcept { return get(i); }

  BitVec& operator^=(const BitVec& other);
  friend BitVec operator^(BitVec a, const BitVec& b) { return a ^= b; }
  friend bool operator==(const BitVec& a, const BitVec& b) = default;

  /// Parity of the bitwise AND, i.e. the standard GF(2) dot product.
  bool dot(const BitVec& other) const;
  std::size_t weight() const noexcept;
  bool is_zero() const noexcept;
  /// Index of the lowest set bit, or size() if none.
  std::size_t first_set() const noexcept;

  /// Bits [start, start + len) as a new vector.
  BitVec slice(std::size_t start, std::size_t len) const;
  /// Concatenation of this vector followed by `tail`.
  BitVec concat(const BitVec& tail) const;
  /// Exchanges the first and second halves; `size()` must be even. For a Pauli
  /// vector in (z|x) layout this yields (x|z), so that a.swap_halves().dot(b)
  /// is the symplectic product.
  BitVec swap_halves() const;

  std::string to_string() const;

  const std::vector<std::uint64_t>& words() const noexcept { return words_; }
  std::vector<std::uint64_t>& words() noexcept { return words_; }

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Row-major dense matrix over GF(2); rows are BitVecs of equal length.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols) : cols_(cols), rows_(rows, BitVec(cols)) {}
  BitMatrix(std::initializer_list<std::initializer_list<int>> rows);

  static BitMatrix identity(std::size_t n);
  static BitMatrix from_rows(std::vector<BitVec> rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_.size(); }
  std::size_t cols() const noexcept { return cols_; }

  bool get(std::size_t r, std::size_t c) const noexcept { return rows_[r].get(c); }
  void set(std::size_t r, std::size_t c, bool value) noexcept { rows_[r].set(c, value); }

  const BitVec& row(std::size_t r) const noexcept { return rows_[r]; }
  BitVec& row(std::size_t r) noexcept { return rows_[r]; }
  const std::vector<BitVec>& row_vectors() const noexcept { return rows_; }

  void append_row(BitVec row);
  void swap_rows(std::size_t a, std::size_t b) noexcept { std::swap(rows_[a], rows_[b]); }

  BitMatrix transpose() const;
  /// Vertical stack of this matrix over `below`.
  BitMatrix stack(const BitMatrix& below) const;
  /// Horizontal concatenation [this | right].
  BitMatrix hconcat(const BitMatrix& right) const;
  BitMatrix columns(std::size_t start, std::size_t len) const;

  /// Matrix-vector product over GF(2).
  BitVec multiply(const BitVec& x) const;
  /// this * other^T, i.e. entry (i, j) is row(i).dot(other.row(j)).
  BitMatrix multiply_transposed(const BitMatrix& other) const;
  /// Applies the block swap of the symplectic form to every row.
  BitMatrix swap_halves() const;

  bool is_zero() const noexcept;
  friend bool operator==(const BitMatrix& a, const BitMatrix& b) = default;

  std::string to_string() const;

 private:
  std::size_t cols_ = 0;
  std::vector<BitVec> rows_;
};

struct Echelon {
  BitMatrix echelon;
  std::vector<std::size_t> pivots;
};

/// Gauss-Jordan elimination. The result is in reduced row echelon form, which
/// is in particular a row echelon form. Zero rows are kept at the bottom.
Echelon gaussian_eliminate(const BitMatrix& m);

std::size_t rank(const BitMatrix& m);

/// Solves A x = b for A in row echelon form by back substitution. Free
/// variables are fixed to zero. Throws Error(kInconsistent) when b has support
/// on a zero row of A and Error(kShapeMismatch) when A is not in echelon form.
BitVec solve(const BitMatrix& echelon, const BitVec& b);

/// Basis of {x : M x = 0}, one row per free column; each row is produced by
/// setting exactly one free variable to 1.
BitMatrix kernel_basis(const BitMatrix& m);

/// Symplectic form on Pauli vectors in (z|x) layout:
/// <a, b> = a_z . b_x + a_x . b_z (mod 2). Throws Error(kLengthMismatch).
bool symplectic_product(const BitVec& a, const BitVec& b);

/// Matrix of pairwise symplectic products, entry (i, j) = <a_i, b_j>.
BitMatrix symplectic_gram(const BitMatrix& a, const BitMatrix& b);

}  // namespace qecgpt::gf2
