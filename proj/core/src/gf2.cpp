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

#include "qecgpt/gf2.hpp"

#include <bit>

#include "qecgpt/error.hpp"

namespace qecgpt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kInconsistent: return "Inconsistent";
    case ErrorCode::kBadFile: return "BadFile";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kDegenerateKernel: return "DegenerateKernel";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kUnevaluableModel: return "UnevaluableModel";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kUnpairedData: return "UnpairedData";
    case ErrorCode::kBadConfig: return "BadConfig";
  }
  return "Unknown";
}

}  // namespace qecgpt

namespace qecgpt::gf2 {

BitVec::BitVec(std::initializer_list<int> bits) : BitVec(bits.size()) {
  std::size_t i = 0;
  for (int b : bits) set(i++, b != 0);
}

BitVec BitVec::from_string(std::string_view bits) {
  BitVec v(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      v.set(i, true);
    } else if (bits[i] != '0') {
      throw Error(ErrorCode::kBadFile, "invalid bit character '" + std::string(1, bits[i]) + "'");
    }
  }
  return v;
}

BitVec BitVec::unit(std::size_t size, std::size_t index) {
  BitVec v(size);
  v.set(index, true);
  return v;
}

BitVec& BitVec::operator^=(const BitVec& other) {
  if (other.size_ != size_) {
    throw Error(ErrorCode::kLengthMismatch,
                "xor of lengths " + std::to_string(size_) + " and " + std::to_string(other.size_));
  }
  for (std::size_t w = 0; w < words_.size(); ++w) words_[w] ^= other.words_[w];
  return *this;
}

bool BitVec::dot(const BitVec& other) const {
  if (other.size_ != size_) {
    throw Error(ErrorCode::kLengthMismatch,
                "dot of lengths " + std::to_string(size_) + " and " + std::to_string(other.size_));
  }
  std::uint64_t acc = 0;
  for (std::size_t w = 0; w < words_.size(); ++w) acc ^= words_[w] & other.words_[w];
  return std::popcount(acc) & 1;
}

std::size_t BitVec::weight() const noexcept {
  std::size_t total = 0;
  for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

bool BitVec::is_zero() const noexcept {
  for (auto w : words_) {
    if (w != 0) return false;
  }
  return true;
}

std::size_t BitVec::first_set() const noexcept {
  for (std::size_t w = 0; w < words_.size(); ++w) {
    if (words_[w] != 0) return w * 64 + static_cast<std::size_t>(std::countr_zero(words_[w]));
  }
  return size_;
}

BitVec BitVec::slice(std::size_t start, std::size_t len) const {
  BitVec out(len);
  for (std::size_t i = 0; i < len; ++i) {
    if (get(start + i)) out.set(i, true);
  }
  return out;
}

BitVec BitVec::concat(const BitVec& tail) const {
  BitVec out(size_ + tail.size_);
  out.words_.assign(out.words_.size(), 0);
  for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] = words_[w];
  for (std::size_t i = 0; i < tail.size_; ++i) {
    if (tail.get(i)) out.set(size_ + i, true);
  }
  return out;
}

BitVec BitVec::swap_halves() const {
  if (size_ % 2 != 0) throw Error(ErrorCode::kLengthMismatch, "swap_halves on odd length");
  const std::size_t n = size_ / 2;
  BitVec out(size_);
  for (std::size_t i = 0; i < n; ++i) {
    if (get(i)) out.set(n + i, true);
    if (get(n + i)) out.set(i, true);
  }
  return out;
}

std::string BitVec::to_string() const {
  std::string s(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if (get(i)) s[i] = '1';
  }
  return s;
}

BitMatrix::BitMatrix(std::initializer_list<std::initializer_list<int>> rows) {
  cols_ = rows.size() == 0 ? 0 : rows.begin()->size();
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(ErrorCode::kShapeMismatch, "ragged matrix literal");
    rows_.emplace_back(r);
  }
}

BitMatrix BitMatrix::identity(std::size_t n) {
  BitMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.set(i, i, true);
  return m;
}

BitMatrix BitMatrix::from_rows(std::vector<BitVec> rows, std::size_t cols) {
  BitMatrix m;
  m.cols_ = cols;
  for (auto& r : rows) m.append_row(std::move(r));
  return m;
}

void BitMatrix::append_row(BitVec row) {
  if (row.size() != cols_) {
    throw Error(ErrorCode::kShapeMismatch,
                "row of length " + std::to_string(row.size()) + " in matrix with " +
                    std::to_string(cols_) + " columns");
  }
  rows_.push_back(std::move(row));
}

BitMatrix BitMatrix::transpose() const {
  BitMatrix t(cols_, rows());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      if (get(r, c)) t.set(c, r, true);
    }
  }
  return t;
}

BitMatrix BitMatrix::stack(const BitMatrix& below) const {
  if (below.rows() > 0 && rows() > 0 && below.cols_ != cols_) {
    throw Error(ErrorCode::kShapeMismatch, "stack of matrices with different widths");
  }
  BitMatrix out = *this;
  if (rows() == 0) out.cols_ = below.cols_;
  for (const auto& r : below.rows_) out.append_row(r);
  return out;
}

BitMatrix BitMatrix::hconcat(const BitMatrix& right) const {
  if (right.rows() != rows()) throw Error(ErrorCode::kShapeMismatch, "hconcat row mismatch");
  BitMatrix out;
  out.cols_ = cols_ + right.cols_;
  for (std::size_t r = 0; r < rows(); ++r) out.rows_.push_back(rows_[r].concat(right.rows_[r]));
  return out;
}

BitMatrix BitMatrix::columns(std::size_t start, std::size_t len) const {
  BitMatrix out;
  out.cols_ = len;
  for (const auto& r : rows_) out.rows_.push_back(r.slice(start, len));
  return out;
}

BitVec BitMatrix::multiply(const BitVec& x) const {
  BitVec out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out.set(r, rows_[r].dot(x));
  return out;
}

BitMatrix BitMatrix::multiply_transposed(const BitMatrix& other) const {
  BitMatrix out(rows(), other.rows());
  for (std::size_t i = 0; i < rows(); ++i) {
    for (std::size_t j = 0; j < other.rows(); ++j) out.set(i, j, rows_[i].dot(other.rows_[j]));
  }
  return out;
}

BitMatrix BitMatrix::swap_halves() const {
  BitMatrix out;
  out.cols_ = cols_;
  for (const auto& r : rows_) out.rows_.push_back(r.swap_halves());
  return out;
}

bool BitMatrix::is_zero() const noexcept {
  for (const auto& r : rows_) {
    if (!r.is_zero()) return false;
  }
  return true;
}

std::string BitMatrix::to_string() const {
  std::string s;
  for (const auto& r : rows_) {
    s += r.to_string();
    s += '\n';
  }
  return s;
}

Echelon gaussian_eliminate(const BitMatrix& m) {
  Echelon out{m, {}};
  BitMatrix& a = out.echelon;
  std::size_t lead = 0;
  for (std::size_t c = 0; c < a.cols() && lead < a.rows(); ++c) {
    std::size_t pivot = lead;
    while (pivot < a.rows() && !a.get(pivot, c)) ++pivot;
    if (pivot == a.rows()) continue;
    a.swap_rows(lead, pivot);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      if (r != lead && a.get(r, c)) a.row(r) ^= a.row(lead);
    }
    out.pivots.push_back(c);
    ++lead;
  }
  return out;
}

std::size_t rank(const BitMatrix& m) { return gaussian_eliminate(m).pivots.size(); }

BitVec solve(const BitMatrix& echelon, const BitVec& b) {
  if (b.size() != echelon.rows()) {
    throw Error(ErrorCode::kLengthMismatch, "right-hand side length " + std::to_string(b.size()) +
                                                " for " + std::to_string(echelon.rows()) + " rows");
  }
  // Leading column of every row; zero rows must trail non-zero ones.
  std::vector<std::size_t> lead(echelon.rows());
  std::size_t previous = 0;
  bool seen_zero = false;
  for (std::size_t r = 0; r < echelon.rows(); ++r) {
    lead[r] = echelon.row(r).first_set();
    const bool zero = lead[r] == echelon.cols();
    if (zero) {
      seen_zero = true;
      if (b.get(r)) throw Error(ErrorCode::kInconsistent, "row " + std::to_string(r) + " reads 0 = 1");
      continue;
    }
    if (seen_zero || (r > 0 && lead[r] <= previous)) {
      throw Error(ErrorCode::kShapeMismatch, "matrix is not in row echelon form");
    }
    previous = lead[r];
  }
  BitVec x(echelon.cols());
  for (std::size_t r = echelon.rows(); r-- > 0;) {
    if (lead[r] == echelon.cols()) continue;
    // x[lead] = b_r + sum over later columns; x[lead] itself is still zero.
    x.set(lead[r], b.get(r) ^ echelon.row(r).dot(x));
  }
  return x;
}

BitMatrix kernel_basis(const BitMatrix& m) {
  const Echelon e = gaussian_eliminate(m);
  std::vector<bool> is_pivot(m.cols(), false);
  for (auto p : e.pivots) is_pivot[p] = true;
  BitMatrix basis(0, m.cols());
  for (std::size_t free = 0; free < m.cols(); ++free) {
    if (is_pivot[free]) continue;
    BitVec x = BitVec::unit(m.cols(), free);
    // Reduced form: pivot variable r equals the entry of its row in the free column.
    for (std::size_t r = 0; r < e.pivots.size(); ++r) {
      if (e.echelon.get(r, free)) x.set(e.pivots[r], true);
    }
    basis.append_row(std::move(x));
  }
  return basis;
}

bool symplectic_product(const BitVec& a, const BitVec& b) {
  if (a.size() != b.size() || a.size() % 2 != 0) {
    throw Error(ErrorCode::kLengthMismatch, "symplectic product of lengths " +
                                                std::to_string(a.size()) + " and " +
                                                std::to_string(b.size()));
  }
  return a.swap_halves().dot(b);
}

BitMatrix symplectic_gram(const BitMatrix& a, const BitMatrix& b) {
  if (a.cols() != b.cols() || a.cols() % 2 != 0) {
    throw Error(ErrorCode::kLengthMismatch, "symplectic gram of mismatched widths");
  }
  return a.swap_halves().multiply_transposed(b);
}

}  // namespace qecgpt::gf2
