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

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "qecgpt/error.hpp"

namespace qecgpt {

using gf2::BitMatrix;
using gf2::BitVec;

PauliVec pauli_from_string(std::string_view ops) {
  const std::size_t n = ops.size();
  PauliVec p(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (ops[i]) {
      case 'I': break;
      case 'X': p.set(n + i, true); break;
      case 'Z': p.set(i, true); break;
      case 'Y':
        p.set(i, true);
        p.set(n + i, true);
        break;
      default:
        throw Error(ErrorCode::kShapeMismatch, "invalid Pauli character '" + std::string(1, ops[i]) + "'");
    }
  }
  return p;
}

std::string pauli_to_string(const PauliVec& p) {
  const std::size_t n = p.size() / 2;
  std::string s(n, 'I');
  for (std::size_t i = 0; i < n; ++i) {
    const bool z = p.get(i);
    const bool x = p.get(n + i);
    s[i] = z ? (x ? 'Y' : 'Z') : (x ? 'X' : 'I');
  }
  return s;
}

ElsConfig ElsConfig::from_sequence(const BitVec& seq, std::size_t m, std::size_t k) {
  if (seq.size() != 2 * m + 2 * k) {
    throw Error(ErrorCode::kLengthMismatch, "sequence of length " + std::to_string(seq.size()) +
                                                " for m=" + std::to_string(m) +
                                                ", k=" + std::to_string(k));
  }
  return {seq.slice(0, m), seq.slice(m, 2 * k), seq.slice(m + 2 * k, m)};
}

// ---------------------------------------------------------------------------
// Lattice constructions

namespace {

struct CheckBuilder {
  std::size_t n;
  BitMatrix checks;

  explicit CheckBuilder(std::size_t qubits) : n(qubits), checks(0, 2 * qubits) {}

  void add(const std::vector<std::size_t>& support, bool x_type) {
    BitVec row(2 * n);
    for (auto q : support) row.set(x_type ? n + q : q, true);
    checks.append_row(std::move(row));
  }
};

void require_odd_distance(std::size_t d, const char* family) {
  if (d < 2 || d % 2 == 0) {
    throw Error(ErrorCode::kBadConfig,
                std::string(family) + " code needs an odd distance >= 3, got " + std::to_string(d));
  }
}

}  // namespace

BitMatrix surface_code_checks(std::size_t d) {
  require_odd_distance(d, "surface");
  // Cells of a (2d-1) x (2d-1) grid: even-parity cells hold qubits, odd rows
  // and even columns hold Z checks, even rows and odd columns hold X checks.
  const std::size_t side = 2 * d - 1;
  std::vector<long> index(side * side, -1);
  std::size_t n = 0;
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      if ((r + c) % 2 == 0) index[r * side + c] = static_cast<long>(n++);
    }
  }
  CheckBuilder b(n);
  auto neighbours = [&](std::size_t r, std::size_t c) {
    std::vector<std::size_t> support;
    const long dr[] = {-1, 1, 0, 0};
    const long dc[] = {0, 0, -1, 1};
    for (int t = 0; t < 4; ++t) {
      const long rr = static_cast<long>(r) + dr[t];
      const long cc = static_cast<long>(c) + dc[t];
      if (rr < 0 || cc < 0 || rr >= static_cast<long>(side) || cc >= static_cast<long>(side)) continue;
      support.push_back(static_cast<std::size_t>(index[static_cast<std::size_t>(rr) * side + static_cast<std::size_t>(cc)]));
    }
    std::sort(support.begin(), support.end());
    return support;
  };
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      if ((r + c) % 2 == 0) continue;
      b.add(neighbours(r, c), /*x_type=*/r % 2 == 0);
    }
  }
  return b.checks;
}

BitMatrix rotated_surface_code_checks(std::size_t d) {
  require_odd_distance(d, "rotated surface");
  const std::size_t n = d * d;
  CheckBuilder b(n);
  // Plaquette (a, b) covers qubits (a..a+1, b..b+1) for a, b in [-1, d-1];
  // it is X-type when a + b is even. Boundary plaquettes are kept only on the
  // top/bottom edges for X and on the left/right edges for Z.
  const long D = static_cast<long>(d);
  for (long a = -1; a < D; ++a) {
    for (long c = -1; c < D; ++c) {
      const bool x_type = ((a + c) % 2 + 2) % 2 == 0;
      const bool top_bottom = a == -1 || a == D - 1;
      const bool left_right = c == -1 || c == D - 1;
      if (top_bottom && left_right) continue;
      if (top_bottom && !x_type) continue;
      if (left_right && x_type) continue;
      std::vector<std::size_t> support;
      for (long i = a; i <= a + 1; ++i) {
        for (long j = c; j <= c + 1; ++j) {
          if (i >= 0 && j >= 0 && i < D && j < D) support.push_back(static_cast<std::size_t>(i * D + j));
        }
      }
      b.add(support, x_type);
    }
  }
  return b.checks;
}

BitMatrix toric_code_checks(std::size_t d) {
  if (d < 2) throw Error(ErrorCode::kBadConfig, "toric code needs d >= 2");
  const std::size_t n = 2 * d * d;
  CheckBuilder b(n);
  auto h = [d](std::size_t i, std::size_t j) { return (i % d) * d + (j % d); };
  auto v = [d](std::size_t i, std::size_t j) { return d * d + (i % d) * d + (j % d); };
  // Vertex stars (X) and plaquettes (Z); the last of each is the product of
  // the others and is dropped.
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i == d - 1 && j == d - 1) continue;
      b.add({h(i, j), h(i, j + d - 1), v(i, j), v(i + d - 1, j)}, /*x_type=*/true);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i == d - 1 && j == d - 1) continue;
      b.add({h(i, j), h(i + 1, j), v(i, j), v(i, j + 1)}, /*x_type=*/false);
    }
  }
  return b.checks;
}

BitMatrix repetition_code_checks(std::size_t n) {
  if (n < 2) throw Error(ErrorCode::kBadConfig, "repetition code needs n >= 2");
  CheckBuilder b(n);
  for (std::size_t i = 0; i + 1 < n; ++i) b.add({i, i + 1}, /*x_type=*/false);
  return b.checks;
}

// ---------------------------------------------------------------------------
// Pure errors and logicals

BitMatrix find_pure_errors(const BitMatrix& checks) {
  const std::size_t m = checks.rows();
  const std::size_t width = checks.cols();
  const gf2::Echelon e = gf2::gaussian_eliminate(checks.swap_halves().hconcat(BitMatrix::identity(m)));
  if (e.pivots.size() != m || (m > 0 && e.pivots.back() >= width)) {
    throw Error(ErrorCode::kRankDeficient, "stabilizer generators are linearly dependent");
  }
  const BitMatrix a = e.echelon.columns(0, width);
  const BitMatrix b = e.echelon.columns(width, m);

  BitMatrix pure(0, width);
  for (std::size_t i = 0; i < m; ++i) {
    BitVec rhs(m);
    for (std::size_t r = 0; r < m; ++r) rhs.set(r, b.get(r, i));
    pure.append_row(gf2::solve(a, rhs));
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (gf2::symplectic_product(pure.row(i), pure.row(j))) pure.row(i) ^= checks.row(j);
    }
  }
  return pure;
}

BitMatrix find_logicals(const BitMatrix& checks, const BitMatrix& pure_errors) {
  const std::size_t width = checks.cols();
  BitMatrix l = gf2::kernel_basis(checks.stack(pure_errors).swap_halves());
  const std::size_t expected = width - 2 * checks.rows();
  if (l.rows() != expected || expected % 2 != 0) {
    throw Error(ErrorCode::kDegenerateKernel, "kernel dimension " + std::to_string(l.rows()) +
                                                  ", expected " + std::to_string(expected));
  }
  const std::size_t rows = l.rows();
  for (std::size_t a = 0; a < rows; a += 2) {
    std::size_t partner = a + 1;
    while (partner < rows && !gf2::symplectic_product(l.row(a), l.row(partner))) ++partner;
    if (partner == rows) {
      throw Error(ErrorCode::kDegenerateKernel, "logical row " + std::to_string(a) + " has no partner");
    }
    l.swap_rows(a + 1, partner);
    for (std::size_t j = a + 2; j < rows; ++j) {
      const bool with_x = gf2::symplectic_product(l.row(j), l.row(a));
      const bool with_z = gf2::symplectic_product(l.row(j), l.row(a + 1));
      if (with_z) l.row(j) ^= l.row(a);
      if (with_x) l.row(j) ^= l.row(a + 1);
    }
  }
  return l;
}

CodeTables tables_from_checks(BitMatrix checks, std::string name) {
  if (checks.cols() % 2 != 0 || checks.cols() == 0) {
    throw Error(ErrorCode::kBadFile, "check rows must have even, non-zero length");
  }
  if (!gf2::symplectic_gram(checks, checks).is_zero()) {
    throw Error(ErrorCode::kBadFile, "stabilizer generators do not commute");
  }
  if (gf2::rank(checks) != checks.rows()) {
    throw Error(ErrorCode::kRankDeficient, "stabilizer generators are linearly dependent");
  }
  CodeTables t;
  t.n = checks.cols() / 2;
  t.m = checks.rows();
  t.k = t.n - t.m;
  t.name = std::move(name);
  t.pure_errors = find_pure_errors(checks);
  t.logicals = find_logicals(checks, t.pure_errors);
  t.stabilizers = std::move(checks);
  t.stabilizers_swapped = t.stabilizers.swap_halves();
  t.pure_errors_swapped = t.pure_errors.swap_halves();
  t.logicals_swapped = t.logicals.swap_halves();
  return t;
}

// ---------------------------------------------------------------------------
// ELS mapping

namespace {

void require_length(const CodeTables& code, const PauliVec& e) {
  if (e.size() != 2 * code.n) {
    throw Error(ErrorCode::kLengthMismatch, "Pauli of length " + std::to_string(e.size()) +
                                                " for n=" + std::to_string(code.n));
  }
}

}  // namespace

BitVec syndrome(const CodeTables& code, const PauliVec& error) {
  require_length(code, error);
  return code.stabilizers_swapped.multiply(error);
}

ElsConfig pauli_to_els(const CodeTables& code, const PauliVec& error) {
  require_length(code, error);
  ElsConfig c{BitVec(code.m), BitVec(2 * code.k), BitVec(code.m)};
  for (std::size_t i = 0; i < code.m; ++i) {
    c.gamma.set(i, code.stabilizers_swapped.row(i).dot(error));
    c.alpha.set(i, code.pure_errors_swapped.row(i).dot(error));
  }
  // The l_x power is detected by l_z and vice versa.
  for (std::size_t i = 0; i < code.k; ++i) {
    c.beta.set(2 * i, code.logicals_swapped.row(2 * i + 1).dot(error));
    c.beta.set(2 * i + 1, code.logicals_swapped.row(2 * i).dot(error));
  }
  return c;
}

PauliVec els_to_pauli(const CodeTables& code, const ElsConfig& config) {
  if (config.gamma.size() != code.m || config.beta.size() != 2 * code.k ||
      config.alpha.size() != code.m) {
    throw Error(ErrorCode::kLengthMismatch, "ELS configuration does not match code dimensions");
  }
  PauliVec e(2 * code.n);
  for (std::size_t i = 0; i < code.m; ++i) {
    if (config.gamma.get(i)) e ^= code.pure_errors.row(i);
    if (config.alpha.get(i)) e ^= code.stabilizers.row(i);
  }
  for (std::size_t j = 0; j < 2 * code.k; ++j) {
    if (config.beta.get(j)) e ^= code.logicals.row(j);
  }
  return e;
}

CodeTables puncture(const CodeTables& code, std::size_t remove, std::uint64_t seed) {
  if (remove >= code.m && code.m > 0) {
    throw Error(ErrorCode::kBadConfig, "cannot remove " + std::to_string(remove) + " of " +
                                           std::to_string(code.m) + " stabilizers");
  }
  std::vector<std::size_t> order(code.m);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < remove; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, code.m - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<bool> dropped(code.m, false);
  for (std::size_t i = 0; i < remove; ++i) dropped[order[i]] = true;
  BitMatrix kept(0, 2 * code.n);
  for (std::size_t i = 0; i < code.m; ++i) {
    if (!dropped[i]) kept.append_row(code.stabilizers.row(i));
  }
  std::string name = code.name;
  if (remove > 0) name += "+puncture:" + std::to_string(remove) + "@" + std::to_string(seed);
  return tables_from_checks(std::move(kept), std::move(name));
}

// ---------------------------------------------------------------------------
// Invariants

InvariantReport check_invariants(const CodeTables& code) {
  InvariantReport r;
  const std::size_t two_k = 2 * code.k;
  r.full_rank = code.stabilizers.rows() == code.m && gf2::rank(code.stabilizers) == code.m &&
                code.n == code.m + code.k;
  r.stabilizers_commute = gf2::symplectic_gram(code.stabilizers, code.stabilizers).is_zero();
  r.pure_errors_dual =
      code.pure_errors.rows() == code.m &&
      gf2::symplectic_gram(code.stabilizers, code.pure_errors) == BitMatrix::identity(code.m);
  r.pure_errors_commute = gf2::symplectic_gram(code.pure_errors, code.pure_errors).is_zero();
  r.logicals_commute_with_group =
      code.logicals.rows() == two_k &&
      gf2::symplectic_gram(code.stabilizers, code.logicals).is_zero() &&
      gf2::symplectic_gram(code.pure_errors, code.logicals).is_zero();
  BitMatrix pairing(two_k, two_k);
  for (std::size_t i = 0; i < code.k; ++i) {
    pairing.set(2 * i, 2 * i + 1, true);
    pairing.set(2 * i + 1, 2 * i, true);
  }
  r.logicals_paired = code.logicals.rows() == two_k &&
                      gf2::symplectic_gram(code.logicals, code.logicals) == pairing;
  return r;
}

std::string InvariantReport::describe() const {
  std::ostringstream s;
  auto line = [&](const char* what, bool ok) { s << (ok ? "  ok    " : "  FAIL  ") << what << '\n'; };
  line("rank(H) = m", full_rank);
  line("H L H^T = 0", stabilizers_commute);
  line("H L M_E^T = I", pure_errors_dual);
  line("M_E L M_E^T = 0", pure_errors_commute);
  line("H L M_L^T = 0, M_E L M_L^T = 0", logicals_commute_with_group);
  line("M_L L M_L^T = pairing", logicals_paired);
  return s.str();
}

// ---------------------------------------------------------------------------
// Code specs and files

namespace {

std::size_t parse_count(std::string_view text, std::string_view what) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (text.empty() || res.ec != std::errc() || res.ptr != end) {
    throw Error(ErrorCode::kBadConfig, "invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

struct FamilyName {
  std::string_view name;
  CodeKind kind;
};

constexpr FamilyName kFamilies[] = {
    {"rotated_surface", CodeKind::kRotatedSurface},
    {"rsurface", CodeKind::kRotatedSurface},
    {"surface", CodeKind::kSurface},
    {"toric", CodeKind::kToric},
    {"repetition", CodeKind::kRepetition},
    {"rep", CodeKind::kRepetition},
};

}  // namespace

CodeSpec CodeSpec::parse(std::string_view text) {
  CodeSpec spec;
  std::string_view base = text;
  if (const auto plus = text.find("+puncture:"); plus != std::string_view::npos) {
    base = text.substr(0, plus);
    std::string_view rest = text.substr(plus + 10);
    const auto at = rest.find('@');
    spec.puncture = parse_count(rest.substr(0, at), "puncture count");
    if (at != std::string_view::npos) spec.puncture_seed = parse_count(rest.substr(at + 1), "puncture seed");
  }
  if (base.starts_with("file:")) {
    spec.kind = CodeKind::kFile;
    spec.path = std::string(base.substr(5));
    return spec;
  }
  for (const auto& f : kFamilies) {
    if (!base.starts_with(f.name)) continue;
    std::string_view size = base.substr(f.name.size());
    if (size.starts_with(':')) size.remove_prefix(1);
    spec.kind = f.kind;
    spec.size = parse_count(size, "code size");
    return spec;
  }
  throw Error(ErrorCode::kBadConfig, "unknown code '" + std::string(text) + "'");
}

std::string CodeSpec::to_string() const {
  std::string s;
  switch (kind) {
    case CodeKind::kSurface: s = "surface:" + std::to_string(size); break;
    case CodeKind::kRotatedSurface: s = "rotated_surface:" + std::to_string(size); break;
    case CodeKind::kToric: s = "toric:" + std::to_string(size); break;
    case CodeKind::kRepetition: s = "repetition:" + std::to_string(size); break;
    case CodeKind::kFile: s = "file:" + path.string(); break;
  }
  if (puncture > 0) s += "+puncture:" + std::to_string(puncture) + "@" + std::to_string(puncture_seed);
  return s;
}

CodeTables build_code(const CodeSpec& spec) {
  CodeSpec base = spec;
  base.puncture = 0;
  BitMatrix checks;
  switch (spec.kind) {
    case CodeKind::kSurface: checks = surface_code_checks(spec.size); break;
    case CodeKind::kRotatedSurface: checks = rotated_surface_code_checks(spec.size); break;
    case CodeKind::kToric: checks = toric_code_checks(spec.size); break;
    case CodeKind::kRepetition: checks = repetition_code_checks(spec.size); break;
    case CodeKind::kFile: checks = read_parity_check_file(spec.path); break;
  }
  CodeTables code = tables_from_checks(std::move(checks), base.to_string());
  if (spec.puncture > 0) code = puncture(code, spec.puncture, spec.puncture_seed);
  return code;
}

BitMatrix read_parity_check(std::istream& in, std::size_t* k_out) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  bool have_header = false;
  BitMatrix checks;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string_view content(line.data() + first, last - first + 1);
    if (!have_header) {
      std::istringstream header{std::string(content)};
      std::string extra;
      if (!(header >> n >> k) || (header >> extra) || n == 0 || k > n) {
        throw Error(ErrorCode::kBadFile, "line " + std::to_string(line_no) + ": expected \"n k\" header");
      }
      checks = BitMatrix(0, 2 * n);
      have_header = true;
      continue;
    }
    if (content.size() != 2 * n) {
      throw Error(ErrorCode::kBadFile, "line " + std::to_string(line_no) + ": expected " +
                                           std::to_string(2 * n) + " bits, got " +
                                           std::to_string(content.size()));
    }
    try {
      checks.append_row(BitVec::from_string(content));
    } catch (const Error&) {
      throw Error(ErrorCode::kBadFile, "line " + std::to_string(line_no) + ": non-binary character");
    }
  }
  if (!have_header) throw Error(ErrorCode::kBadFile, "missing \"n k\" header");
  if (checks.rows() != n - k) {
    throw Error(ErrorCode::kBadFile, "expected " + std::to_string(n - k) + " check rows, found " +
                                         std::to_string(checks.rows()));
  }
  if (k_out != nullptr) *k_out = k;
  return checks;
}

BitMatrix read_parity_check_file(const std::filesystem::path& path, std::size_t* k_out) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kBadFile, "cannot open " + path.string());
  return read_parity_check(in, k_out);
}

void write_parity_check(std::ostream& out, const CodeTables& code) {
  out << "# " << code.name << '\n' << code.n << ' ' << code.k << '\n';
  out << code.stabilizers.to_string();
}

}  // namespace qecgpt
