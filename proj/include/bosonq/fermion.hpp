#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fock.hpp"

// Second-quantized molecular Hamiltonians from ingested integrals, the
// Jordan-Wigner transformation, Pauli-sum algebra, and the dense
// exact-diagonalization (FCI) oracle.
//
// Conventions used throughout:
//  - spin-orbital ordering chi_{2p} = (phi_p, alpha), chi_{2p+1} = (phi_p, beta)
//  - occupation basis index n = sum_p b_p 2^{M-1-p} (mode 0 most significant),
//    so qubit 0 is the leftmost tensor factor of a Pauli word
//  - a^dag_p -> (X_p - iY_p)/2 (x) Z-string on q < p; the resulting number
//    operator is (I - Z_p)/2 with occupied <-> |1>

namespace bosonq::fermion {

struct ParseError : std::runtime_error {
  ParseError(int line, const std::string& what)
      : std::runtime_error("FCIDUMP line " + std::to_string(line) + ": " + what) {}
};

struct MolecularIntegrals {
  double h_nuc = 0.0;
  int n_spatial = 0;
  int n_electrons = 0;
  int ms2 = 0;
  Eigen::MatrixXd one_body;       // h_pq over spatial orbitals, symmetric
  std::vector<double> two_body;   // physicist <pq|rs> over spatial orbitals

  int n_spin_orbitals() const { return 2 * n_spatial; }

  double phys(int p, int q, int r, int s) const {
    const int n = n_spatial;
    return two_body[size_t(((p * n + q) * n + r) * n + s)];
  }
  double& phys(int p, int q, int r, int s) {
    const int n = n_spatial;
    return two_body[size_t(((p * n + q) * n + r) * n + s)];
  }

  // spin-orbital matrix elements; p = 2*spatial + spin
  double one_body_so(int p, int q) const {
    if ((p & 1) != (q & 1)) return 0.0;
    return one_body(p >> 1, q >> 1);
  }
  // <pq|rs>: electron 1 carries (p, s), electron 2 carries (q, r)
  double two_body_so(int p, int q, int r, int s) const {
    if ((p & 1) != (s & 1) || (q & 1) != (r & 1)) return 0.0;
    return phys(p >> 1, q >> 1, r >> 1, s >> 1);
  }
};

// ---------------------------------------------------------------------------
// FCIDUMP subset: header `&FCI NORB=n,NELEC=e,MS2=s` terminated by `&END` or
// `/`; body lines `value i j k l` (1-based, chemist order); `0 0 0 0` row is
// the nuclear repulsion, `i j 0 0` rows are one-body elements.
// ---------------------------------------------------------------------------

inline MolecularIntegrals load_fcidump(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  int norb = -1, nelec = -1, ms2 = 0;

  // header
  bool header_done = false;
  while (!header_done && std::getline(in, line)) {
    ++lineno;
    std::string s = line;
    if (lineno == 1) {
      auto amp = s.find("&FCI");
      if (amp == std::string::npos) throw ParseError(lineno, "missing &FCI header");
      s = s.substr(amp + 4);
    }
    // terminators may share a line with key=value pairs
    for (const char* term : {"&END", "/"}) {
      auto pos = s.find(term);
      if (pos != std::string::npos) {
        s = s.substr(0, pos);
        header_done = true;
      }
    }
    std::string token;
    std::istringstream fields(s);
    while (std::getline(fields, token, ',')) {
      auto eq = token.find('=');
      if (eq == std::string::npos) {
        if (token.find_first_not_of(" \t\r") == std::string::npos) continue;
        throw ParseError(lineno, "malformed header token '" + token + "'");
      }
      std::string key = token.substr(0, eq);
      key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
      const long value = std::strtol(token.c_str() + eq + 1, nullptr, 10);
      if (key == "NORB") norb = int(value);
      else if (key == "NELEC") nelec = int(value);
      else if (key == "MS2") ms2 = int(value);
      else throw ParseError(lineno, "unknown header key '" + key + "'");
    }
  }
  if (!header_done) throw ParseError(lineno, "header never terminated by &END or /");
  if (norb < 1) throw ParseError(lineno, "missing or invalid NORB");

  MolecularIntegrals out;
  out.n_spatial = norb;
  out.n_electrons = std::max(nelec, 0);
  out.ms2 = ms2;
  out.one_body = Eigen::MatrixXd::Zero(norb, norb);
  out.two_body.assign(size_t(norb) * norb * norb * norb, 0.0);

  // chemist-order storage, converted to physicist below
  std::vector<double> chem(out.two_body.size(), 0.0);
  auto chem_at = [&](int i, int j, int k, int l) -> double& {
    return chem[size_t(((i * norb + j) * norb + k) * norb + l)];
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    double value;
    int i, j, k, l;
    if (!(fields >> value >> i >> j >> k >> l))
      throw ParseError(lineno, "expected `value i j k l`");
    for (int idx : {i, j, k, l})
      if (idx < 0 || idx > norb) throw ParseError(lineno, "orbital index out of range");
    if (i == 0 && j == 0 && k == 0 && l == 0) {
      out.h_nuc = value;
    } else if (k == 0 && l == 0) {
      if (i == 0 || j == 0) throw ParseError(lineno, "one-body row with a zero index");
      out.one_body(i - 1, j - 1) = value;
      out.one_body(j - 1, i - 1) = value;
    } else if (i == 0 || j == 0 || k == 0 || l == 0) {
      throw ParseError(lineno, "mixed zero/nonzero indices");
    } else {
      const int a = i - 1, b = j - 1, c = k - 1, d = l - 1;
      // 8-fold symmetry completion of real-orbital (ij|kl)
      chem_at(a, b, c, d) = chem_at(b, a, c, d) = chem_at(a, b, d, c) =
          chem_at(b, a, d, c) = chem_at(c, d, a, b) = chem_at(d, c, a, b) =
              chem_at(c, d, b, a) = chem_at(d, c, b, a) = value;
    }
  }

  // physicist <pq|rs> = chemist (ps|qr)
  for (int p = 0; p < norb; ++p)
    for (int q = 0; q < norb; ++q)
      for (int r = 0; r < norb; ++r)
        for (int s = 0; s < norb; ++s)
          out.phys(p, q, r, s) = chem_at(p, s, q, r);
  return out;
}

inline MolecularIntegrals load_fcidump_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open FCIDUMP file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return load_fcidump(buf.str());
}

// ---------------------------------------------------------------------------
// Fermionic operator sums (normal-ordered storage)
// ---------------------------------------------------------------------------

struct FermionTerm {
  Complex coeff;
  std::vector<int> create;      // applied left of the annihilators
  std::vector<int> annihilate;  // in written order
};

struct FermionOperatorSum {
  int n_modes = 0;
  std::vector<FermionTerm> terms;
};

/// H = h_nuc + sum_pq h_pq c_p^dag c_q + 1/2 sum_pqrs <pq|rs> c_p^dag c_q^dag c_r c_s
inline FermionOperatorSum build_molecular_hamiltonian(const MolecularIntegrals& ints) {
  const int m = ints.n_spin_orbitals();
  FermionOperatorSum h;
  h.n_modes = m;
  if (ints.h_nuc != 0.0) h.terms.push_back({ints.h_nuc, {}, {}});
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < m; ++q) {
      const double v = ints.one_body_so(p, q);
      if (std::abs(v) > 1e-14) h.terms.push_back({v, {p}, {q}});
    }
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < m; ++q) {
      if (p == q) continue;
      for (int r = 0; r < m; ++r)
        for (int s = 0; s < m; ++s) {
          if (r == s) continue;
          const double v = ints.two_body_so(p, q, r, s);
          if (std::abs(v) > 1e-14) h.terms.push_back({0.5 * v, {p, q}, {r, s}});
        }
    }
  return h;
}

// Occupation-number application with fermionic signs. Bit b_p lives at
// position M-1-p of the basis index so mode 0 is the most significant bit.

namespace detail {

inline bool occ_bit(std::uint32_t state, int p, int m) {
  return (state >> (m - 1 - p)) & 1u;
}

inline int parity_below(std::uint32_t state, int p, int m) {
  // number of occupied modes with index < p
  int count = 0;
  for (int q = 0; q < p; ++q) count += occ_bit(state, q, m) ? 1 : 0;
  return count;
}

}  // namespace detail

/// Dense matrix of the operator sum over the full 2^M occupation basis.
inline ComplexMatrix operator_matrix_occupation(const FermionOperatorSum& op) {
  const int m = op.n_modes;
  if (m > 16) throw std::invalid_argument("operator_matrix_occupation: too many modes");
  const std::uint32_t dim = 1u << m;
  ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
  for (std::uint32_t col = 0; col < dim; ++col) {
    for (const auto& term : op.terms) {
      std::uint32_t state = col;
      double sign = 1.0;
      bool dead = false;
      for (auto it = term.annihilate.rbegin(); it != term.annihilate.rend(); ++it) {
        if (!detail::occ_bit(state, *it, m)) { dead = true; break; }
        if (detail::parity_below(state, *it, m) & 1) sign = -sign;
        state &= ~(1u << (m - 1 - *it));
      }
      if (dead) continue;
      for (auto it = term.create.rbegin(); it != term.create.rend(); ++it) {
        if (detail::occ_bit(state, *it, m)) { dead = true; break; }
        if (detail::parity_below(state, *it, m) & 1) sign = -sign;
        state |= 1u << (m - 1 - *it);
      }
      if (dead) continue;
      h(state, col) += sign * term.coeff;
    }
  }
  return h;
}

/// Determinants of n_electrons in op.n_modes spin-orbitals, as strictly
/// increasing index lists in lexicographic order.
inline std::vector<std::vector<int>> enumerate_determinants(int m, int n) {
  std::vector<std::vector<int>> dets;
  std::vector<int> cur(n);
  std::function<void(int, int)> rec = [&](int start, int k) {
    if (k == n) { dets.push_back(cur); return; }
    for (int p = start; p < m; ++p) {
      cur[size_t(k)] = p;
      rec(p + 1, k + 1);
    }
  };
  if (n == 0) dets.push_back({});
  else rec(0, 0);
  return dets;
}

inline std::uint32_t determinant_to_index(const std::vector<int>& det, int m) {
  std::uint32_t state = 0;
  for (int p : det) state |= 1u << (m - 1 - p);
  return state;
}

/// FCI matrix over the fixed-particle-number determinant basis, in the
/// order produced by enumerate_determinants.
inline ComplexMatrix fci_matrix(const FermionOperatorSum& op, int n_electrons) {
  const int m = op.n_modes;
  const auto dets = enumerate_determinants(m, n_electrons);
  const ComplexMatrix full = operator_matrix_occupation(op);
  ComplexMatrix h(dets.size(), dets.size());
  for (size_t i = 0; i < dets.size(); ++i)
    for (size_t j = 0; j < dets.size(); ++j)
      h(i, j) = full(determinant_to_index(dets[i], m), determinant_to_index(dets[j], m));
  return h;
}

// ---------------------------------------------------------------------------
// Pauli words and sums
// ---------------------------------------------------------------------------

enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

inline char pauli_char(Pauli p) { return "IXYZ"[int(p)]; }

inline Pauli pauli_from_char(char c) {
  switch (c) {
    case 'I': return Pauli::I;
    case 'X': return Pauli::X;
    case 'Y': return Pauli::Y;
    case 'Z': return Pauli::Z;
    default: throw std::invalid_argument(std::string("invalid Pauli letter '") + c + "'");
  }
}

struct PauliWord {
  std::vector<Pauli> letters;

  PauliWord() = default;
  explicit PauliWord(int n_qubits) : letters(size_t(n_qubits), Pauli::I) {}
  explicit PauliWord(const std::string& s) {
    letters.reserve(s.size());
    for (char c : s) letters.push_back(pauli_from_char(c));
  }

  int n_qubits() const { return int(letters.size()); }
  bool is_identity() const {
    return std::all_of(letters.begin(), letters.end(),
                       [](Pauli p) { return p == Pauli::I; });
  }
  std::string str() const {
    std::string s;
    for (Pauli p : letters) s.push_back(pauli_char(p));
    return s;
  }
  bool operator==(const PauliWord& o) const { return letters == o.letters; }
  bool operator<(const PauliWord& o) const { return letters < o.letters; }
};

/// Single-letter product: returns (phase, letter) with P_a P_b = phase * letter.
inline std::pair<Complex, Pauli> pauli_mul(Pauli a, Pauli b) {
  if (a == Pauli::I) return {1.0, b};
  if (b == Pauli::I) return {1.0, a};
  if (a == b) return {1.0, Pauli::I};
  static const Complex i(0.0, 1.0);
  const int ia = int(a), ib = int(b);
  // XY=iZ, YZ=iX, ZX=iY and the reversed products pick up a minus sign
  const Pauli c = Pauli(6 - ia - ib);
  const bool cyclic = (ib - ia + 3) % 3 == 1;
  return {cyclic ? i : -i, c};
}

inline std::pair<Complex, PauliWord> pauli_word_mul(const PauliWord& a, const PauliWord& b) {
  if (a.n_qubits() != b.n_qubits())
    throw std::invalid_argument("pauli_word_mul: qubit count mismatch");
  PauliWord out(a.n_qubits());
  Complex phase = 1.0;
  for (size_t k = 0; k < a.letters.size(); ++k) {
    auto [ph, c] = pauli_mul(a.letters[k], b.letters[k]);
    phase *= ph;
    out.letters[k] = c;
  }
  return {phase, out};
}

struct PauliTerm {
  Complex coeff;
  PauliWord word;
};

struct PauliSum {
  int n_qubits = 0;
  std::vector<PauliTerm> terms;

  /// Merge duplicate words, drop coefficients below `drop_tol`, sort by word.
  void canonicalize(double drop_tol = 1e-12) {
    std::map<PauliWord, Complex> acc;
    for (const auto& t : terms) acc[t.word] += t.coeff;
    terms.clear();
    for (auto& [word, coeff] : acc)
      if (std::abs(coeff) > drop_tol) terms.push_back({coeff, word});
  }

  Complex coefficient_of(const std::string& word) const {
    for (const auto& t : terms)
      if (t.word.str() == word) return t.coeff;
    return 0.0;
  }

  double max_imag() const {
    double m = 0.0;
    for (const auto& t : terms) m = std::max(m, std::abs(t.coeff.imag()));
    return m;
  }
};

inline PauliSum pauli_sum_mul(const PauliSum& a, const PauliSum& b, double drop_tol = 1e-14) {
  PauliSum out;
  out.n_qubits = a.n_qubits;
  for (const auto& ta : a.terms)
    for (const auto& tb : b.terms) {
      auto [phase, word] = pauli_word_mul(ta.word, tb.word);
      out.terms.push_back({ta.coeff * tb.coeff * phase, word});
    }
  out.canonicalize(drop_tol);
  return out;
}

inline PauliSum pauli_sum_add(const PauliSum& a, const PauliSum& b, double drop_tol = 1e-14) {
  PauliSum out = a;
  out.terms.insert(out.terms.end(), b.terms.begin(), b.terms.end());
  out.canonicalize(drop_tol);
  return out;
}

// ---------------------------------------------------------------------------
// Jordan-Wigner transformation
// ---------------------------------------------------------------------------

namespace detail {

/// JW image of a single ladder operator: (X_p -/+ iY_p)/2 (x) Z-string on q<p.
inline PauliSum jw_ladder(int p, bool creation, int n_qubits) {
  PauliSum out;
  out.n_qubits = n_qubits;
  PauliWord wx(n_qubits), wy(n_qubits);
  for (int q = 0; q < p; ++q) {
    wx.letters[size_t(q)] = Pauli::Z;
    wy.letters[size_t(q)] = Pauli::Z;
  }
  wx.letters[size_t(p)] = Pauli::X;
  wy.letters[size_t(p)] = Pauli::Y;
  const Complex iy = creation ? Complex(0.0, -0.5) : Complex(0.0, 0.5);
  out.terms.push_back({0.5, wx});
  out.terms.push_back({iy, wy});
  return out;
}

}  // namespace detail

inline PauliSum jordan_wigner(const FermionOperatorSum& op, double drop_tol = 1e-12) {
  PauliSum out;
  out.n_qubits = op.n_modes;
  for (const auto& term : op.terms) {
    PauliSum prod;
    prod.n_qubits = op.n_modes;
    prod.terms.push_back({term.coeff, PauliWord(op.n_modes)});
    for (int p : term.create)
      prod = pauli_sum_mul(prod, detail::jw_ladder(p, true, op.n_modes), 1e-16);
    for (int q : term.annihilate)
      prod = pauli_sum_mul(prod, detail::jw_ladder(q, false, op.n_modes), 1e-16);
    out.terms.insert(out.terms.end(), prod.terms.begin(), prod.terms.end());
  }
  out.canonicalize(drop_tol);
  return out;
}

// ---------------------------------------------------------------------------
// Grouping of equal-coefficient words
// ---------------------------------------------------------------------------

struct PauliGroup {
  double coefficient = 0.0;                          // shared coefficient g_mu
  std::vector<std::pair<double, PauliWord>> members; // relative sign, word
};

struct GroupedPauliSum {
  int n_qubits = 0;
  double constant = 0.0;  // identity-word share
  std::vector<PauliGroup> groups;
};

/// Words with equal coefficients (up to sign, within `tol`) merged into
/// grouped operators; the identity word becomes the constant.
inline GroupedPauliSum group_pauli_sum(const PauliSum& sum, double tol = 1e-12) {
  GroupedPauliSum out;
  out.n_qubits = sum.n_qubits;
  PauliSum canon = sum;
  canon.canonicalize(tol);
  if (canon.max_imag() > 1e-10)
    throw std::invalid_argument("group_pauli_sum: coefficients must be real");
  for (const auto& t : canon.terms) {
    const double c = t.coeff.real();
    if (t.word.is_identity()) {
      out.constant += c;
      continue;
    }
    bool placed = false;
    for (auto& g : out.groups) {
      if (std::abs(c - g.coefficient) <= tol) {
        g.members.push_back({1.0, t.word});
        placed = true;
        break;
      }
      if (std::abs(c + g.coefficient) <= tol) {
        g.members.push_back({-1.0, t.word});
        placed = true;
        break;
      }
    }
    if (!placed) out.groups.push_back({c, {{1.0, t.word}}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrices and diagonalization
// ---------------------------------------------------------------------------

inline ComplexMatrix pauli_letter_matrix(Pauli p) {
  ComplexMatrix m(2, 2);
  switch (p) {
    case Pauli::I: m << 1, 0, 0, 1; break;
    case Pauli::X: m << 0, 1, 1, 0; break;
    case Pauli::Y: m << 0, Complex(0, -1), Complex(0, 1), 0; break;
    case Pauli::Z: m << 1, 0, 0, -1; break;
  }
  return m;
}

/// Dense matrix of a Pauli word; qubit 0 is the leftmost tensor factor.
inline ComplexMatrix pauli_word_matrix(const PauliWord& w) {
  ComplexMatrix m = ComplexMatrix::Identity(1, 1);
  for (Pauli p : w.letters) m = fock::kron(m, pauli_letter_matrix(p));
  return m;
}

inline ComplexMatrix pauli_sum_to_matrix(const PauliSum& sum) {
  if (sum.n_qubits > 12) throw std::invalid_argument("pauli_sum_to_matrix: dimension overflow");
  const Eigen::Index dim = Eigen::Index(1) << sum.n_qubits;
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (const auto& t : sum.terms) m += t.coeff * pauli_word_matrix(t.word);
  return m;
}

inline ComplexMatrix grouped_sum_to_matrix(const GroupedPauliSum& g) {
  const Eigen::Index dim = Eigen::Index(1) << g.n_qubits;
  ComplexMatrix m = g.constant * ComplexMatrix::Identity(dim, dim);
  for (const auto& grp : g.groups)
    for (const auto& [sign, word] : grp.members)
      m += grp.coefficient * sign * pauli_word_matrix(word);
  return m;
}

struct GroundState {
  double energy = 0.0;
  StateVector vector;
};

/// Lowest eigenpair of a Hermitian matrix. Degenerate lowest levels return
/// the eigenvalue once with whichever spanning eigenvector the solver picks.
inline GroundState exact_ground_state(const ComplexMatrix& h, double herm_tol = 1e-10) {
  if (h.rows() != h.cols()) throw std::invalid_argument("exact_ground_state: not square");
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > herm_tol)
    throw std::invalid_argument("exact_ground_state: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  GroundState g;
  g.energy = es.eigenvalues()(0);
  g.vector = es.eigenvectors().col(0);
  return g;
}

// ---------------------------------------------------------------------------
// Symmetry operators (particle number and total spin)
// ---------------------------------------------------------------------------

/// N as a Pauli sum: sum_p (I - Z_p)/2 under the occupied <-> |1> convention.
inline PauliSum number_operator_qubit(int m) {
  PauliSum out;
  out.n_qubits = m;
  out.terms.push_back({0.5 * m, PauliWord(m)});
  for (int p = 0; p < m; ++p) {
    PauliWord w(m);
    w.letters[size_t(p)] = Pauli::Z;
    out.terms.push_back({-0.5, w});
  }
  out.canonicalize(1e-15);
  return out;
}

/// S^2 = S_- S_+ + S_z (S_z + 1), built fermionically and JW-transformed.
/// Requires the interleaved (alpha, beta) spin-orbital ordering.
inline PauliSum total_spin_squared_qubit(int m) {
  if (m % 2 != 0) throw std::invalid_argument("total_spin_squared_qubit: odd mode count");
  FermionOperatorSum s_plus, s_minus, s_z;
  s_plus.n_modes = s_minus.n_modes = s_z.n_modes = m;
  for (int p = 0; p < m / 2; ++p) {
    s_plus.terms.push_back({1.0, {2 * p}, {2 * p + 1}});   // beta -> alpha
    s_minus.terms.push_back({1.0, {2 * p + 1}, {2 * p}});
    s_z.terms.push_back({0.5, {2 * p}, {2 * p}});
    s_z.terms.push_back({-0.5, {2 * p + 1}, {2 * p + 1}});
  }
  const PauliSum jw_plus = jordan_wigner(s_plus, 1e-16);
  const PauliSum jw_minus = jordan_wigner(s_minus, 1e-16);
  const PauliSum jw_z = jordan_wigner(s_z, 1e-16);
  PauliSum one;
  one.n_qubits = m;
  one.terms.push_back({1.0, PauliWord(m)});
  PauliSum out = pauli_sum_add(pauli_sum_mul(jw_minus, jw_plus),
                               pauli_sum_mul(jw_z, pauli_sum_add(jw_z, one)));
  out.canonicalize(1e-12);
  return out;
}

struct SymmetryOperators {
  PauliSum number;
  PauliSum spin_squared;
};

inline SymmetryOperators symmetry_operators(int m) {
  if (m % 2 != 0) throw std::invalid_argument("symmetry_operators: odd mode count");
  return {number_operator_qubit(m), total_spin_squared_qubit(m)};
}

}  // namespace bosonq::fermion
