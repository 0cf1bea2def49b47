#pragma once

#include <array>
#include <vector>

#include "fermion.hpp"
#include "fock.hpp"

// Direct (ancilla-free) fermion -> boson mapping: an N-electron determinant
// becomes an N-mode Fock state, and bilinear fermionic operators become Fock
// projector expressions. Implemented for the state map at arbitrary N and
// for the operator map at N = 1 and N = 2.

namespace bosonq::dms {

struct DeterminantIndex {
  std::vector<int> occupied;  // strictly increasing spin-orbital indices
  int n_spin_orbitals = 0;
};

struct BosonFockIndex {
  std::vector<int> levels;  // q_1 .. q_N
  int max_level = 0;        // highest reachable level, M - N
};

inline void validate(const DeterminantIndex& d) {
  for (size_t i = 0; i < d.occupied.size(); ++i) {
    if (d.occupied[i] < 0 || d.occupied[i] >= d.n_spin_orbitals)
      throw std::invalid_argument("DeterminantIndex: index out of range");
    if (i > 0 && d.occupied[i] <= d.occupied[i - 1])
      throw std::invalid_argument("DeterminantIndex: indices must strictly increase");
  }
}

/// q_N = p_1 and q_j = p_{N-j+1} - p_{N-j} - 1 for j < N.
inline BosonFockIndex fermion_to_boson_state(const DeterminantIndex& d) {
  validate(d);
  const int n = int(d.occupied.size());
  BosonFockIndex b;
  b.max_level = d.n_spin_orbitals - n;
  b.levels.assign(size_t(n), 0);
  if (n == 0) return b;
  b.levels[size_t(n - 1)] = d.occupied[0];
  for (int j = 1; j < n; ++j)
    b.levels[size_t(j - 1)] = d.occupied[size_t(n - j)] - d.occupied[size_t(n - j - 1)] - 1;
  return b;
}

/// Exact inverse: p_1 = q_N, p_{k+1} = p_k + q_{N-k} + 1.
inline DeterminantIndex boson_to_fermion_state(const BosonFockIndex& b) {
  const int n = int(b.levels.size());
  DeterminantIndex d;
  d.n_spin_orbitals = b.max_level + n;
  d.occupied.assign(size_t(n), 0);
  if (n == 0) return d;
  d.occupied[0] = b.levels[size_t(n - 1)];
  for (int k = 1; k < n; ++k)
    d.occupied[size_t(k)] = d.occupied[size_t(k - 1)] + b.levels[size_t(n - 1 - k)] + 1;
  validate(d);
  return d;
}

// ---------------------------------------------------------------------------
// Operator mapping, N = 1: E_{pq} = c_p^dag c_q acts as |p><q| on one mode.
// ---------------------------------------------------------------------------

inline ComplexMatrix map_bilinear_n1(int row, int col, int cutoff) {
  if (row < 0 || col < 0 || row >= cutoff || col >= cutoff)
    throw std::invalid_argument("map_bilinear_n1: index out of range");
  return fock::ketbra(cutoff, row, col);
}

// ---------------------------------------------------------------------------
// Operator mapping, N = 2: projector form on two modes with `cutoff` levels
// each (two-mode index j*cutoff + k for |j,k>). Sums truncate at the highest
// representable level.
// ---------------------------------------------------------------------------

inline ComplexMatrix map_bilinear_n2(int row, int col, int cutoff) {
  if (row < 0 || col < 0 || row > cutoff || col > cutoff)
    throw std::invalid_argument("map_bilinear_n2: index out of range");
  const int L = cutoff;
  ComplexMatrix m = ComplexMatrix::Zero(L * L, L * L);
  auto idx = [L](int j, int k) { return j * L + k; };
  auto in_range = [L](int v) { return v >= 0 && v < L; };

  if (row < col) return map_bilinear_n2(col, row, cutoff).adjoint();

  const int shift = row - col;  // excitation distance
  const int base = col;
  if (shift == 0) {
    // I (x) |p><p| + sum_{j+k=p-1} |j,k><j,k|
    if (in_range(base))
      for (int j = 0; j < L; ++j) m(idx(j, base), idx(j, base)) += 1.0;
    for (int j = 0; j <= base - 1; ++j) {
      const int k = base - 1 - j;
      if (in_range(j) && in_range(k)) m(idx(j, k), idx(j, k)) += 1.0;
    }
    return m;
  }
  // transfer within the first mode: sum_{j+k=q-1} |j+p, k><j, k|
  for (int j = 0; j <= base - 1; ++j) {
    const int k = base - 1 - j;
    if (in_range(j) && in_range(k) && in_range(j + shift))
      m(idx(j + shift, k), idx(j, k)) += 1.0;
  }
  // cross-mode transfer: sum_j |j, q+p><j+p, q|
  if (in_range(base) && in_range(base + shift))
    for (int j = 0; j + shift < L; ++j)
      m(idx(j, base + shift), idx(j + shift, base)) += 1.0;
  // correction: - sum_{j=0}^{p-2} |p-2-j, q+j+1><j, q|
  for (int j = 0; j <= shift - 2; ++j) {
    const int bra_j = j, bra_k = base;
    const int ket_j = shift - 2 - j, ket_k = base + j + 1;
    if (in_range(bra_j) && in_range(bra_k) && in_range(ket_j) && in_range(ket_k))
      m(idx(ket_j, ket_k), idx(bra_j, bra_k)) -= 1.0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Closed-form bosonic H2 Hamiltonian (two qutrits, 6 physical states)
// ---------------------------------------------------------------------------

struct BosonicHamiltonianH2 {
  std::array<double, 5> w{};  // w1..w5
  double h_nuc = 0.0;
  ComplexMatrix matrix;  // 9x9; unphysical |1,2>, |2,1>, |2,2> stay zero

  // two-qutrit indices of |00>,|01>,|02>,|10>,|11>,|20>
  static constexpr std::array<int, 6> physical = {0, 1, 2, 3, 4, 6};

  ComplexMatrix physical_block() const {
    ComplexMatrix b(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) b(i, j) = matrix(physical[size_t(i)], physical[size_t(j)]);
    return b;
  }
};

inline BosonicHamiltonianH2 build_h2_bosonic_hamiltonian(const fermion::MolecularIntegrals& ints) {
  if (ints.n_spatial != 2)
    throw std::invalid_argument("build_h2_bosonic_hamiltonian: expected 2 spatial orbitals");
  BosonicHamiltonianH2 out;
  const double h00 = ints.one_body_so(0, 0);
  const double h11 = ints.one_body_so(1, 1);
  const double h22 = ints.one_body_so(2, 2);
  out.w[0] = h00 + h11 + ints.two_body_so(0, 1, 1, 0);            // w1
  out.w[1] = 2.0 * h22 + ints.two_body_so(2, 3, 3, 2);            // w2
  out.w[2] = h00 + h22 + ints.two_body_so(0, 2, 2, 0);            // w3
  out.w[3] = out.w[2] - ints.two_body_so(0, 2, 0, 2);             // w4
  out.w[4] = ints.two_body_so(0, 2, 0, 2);                        // w5
  out.h_nuc = ints.h_nuc;

  ComplexMatrix& h = out.matrix;
  h = ComplexMatrix::Zero(9, 9);
  auto idx = [](int j, int k) { return 3 * j + k; };
  h(idx(0, 0), idx(0, 0)) = out.w[0];
  h(idx(0, 2), idx(0, 2)) = out.w[1];
  h(idx(0, 1), idx(0, 1)) = out.w[2];
  h(idx(2, 0), idx(2, 0)) = out.w[2];
  h(idx(1, 0), idx(1, 0)) = out.w[3];
  h(idx(1, 1), idx(1, 1)) = out.w[3];
  h(idx(0, 0), idx(0, 2)) = out.w[4];
  h(idx(0, 2), idx(0, 0)) = out.w[4];
  h(idx(2, 0), idx(0, 1)) = -out.w[4];
  h(idx(0, 1), idx(2, 0)) = -out.w[4];
  for (int p : BosonicHamiltonianH2::physical) h(p, p) += ints.h_nuc;
  return out;
}

/// DMS image of the H2 Hamiltonian assembled termwise from its bilinear form
/// (products of map_bilinear_n2 matrices). Valid on the physical block.
inline ComplexMatrix h2_bilinear_image(const fermion::MolecularIntegrals& ints) {
  if (ints.n_spatial != 2)
    throw std::invalid_argument("h2_bilinear_image: expected 2 spatial orbitals");
  const int L = 3;
  auto E = [&](int r, int c) { return map_bilinear_n2(r, c, L); };
  auto so2 = [&](int p, int q, int r, int s) { return ints.two_body_so(p, q, r, s); };
  const double h00 = ints.one_body_so(0, 0), h11 = ints.one_body_so(1, 1);
  const double h22 = ints.one_body_so(2, 2), h33 = ints.one_body_so(3, 3);

  ComplexMatrix h = ComplexMatrix::Zero(L * L, L * L);
  h += (h00 + so2(0, 1, 1, 0) + so2(0, 3, 3, 0) + so2(0, 2, 2, 0) - so2(0, 2, 0, 2)) * E(0, 0);
  h += (h11 + so2(1, 2, 2, 1) + so2(1, 3, 3, 1) - so2(1, 3, 1, 3)) * E(1, 1);
  h += (h22 + so2(2, 3, 3, 2)) * E(2, 2);
  h += h33 * E(3, 3);
  h -= so2(0, 1, 1, 0) * (E(0, 1) * E(1, 0));
  h -= so2(2, 3, 3, 2) * (E(2, 3) * E(3, 2));
  h -= so2(0, 3, 3, 0) * (E(0, 3) * E(3, 0));
  h -= so2(1, 2, 2, 1) * (E(1, 2) * E(2, 1));
  h -= (so2(0, 2, 2, 0) - so2(0, 2, 0, 2)) * (E(0, 2) * E(2, 0));
  h -= (so2(1, 3, 3, 1) - so2(1, 3, 1, 3)) * (E(1, 3) * E(3, 1));
  const ComplexMatrix t1 = E(0, 1) * E(3, 2);
  const ComplexMatrix t2 = E(0, 3) * E(1, 2);
  h -= so2(0, 3, 1, 2) * (t1 + t1.adjoint());
  h -= so2(0, 1, 3, 2) * (t2 + t2.adjoint());
  for (int p : BosonicHamiltonianH2::physical) h(p, p) += ints.h_nuc;
  return h;
}

/// Fermionic N=2 FCI matrix reordered into the mapped two-mode Fock basis
/// ordering used by BosonicHamiltonianH2::physical_block.
inline ComplexMatrix h2_fci_matrix_in_boson_order(const fermion::MolecularIntegrals& ints) {
  const auto hamil = fermion::build_molecular_hamiltonian(ints);
  const auto dets = fermion::enumerate_determinants(4, 2);
  ComplexMatrix fci = fermion::fci_matrix(hamil, 2);
  // position of each determinant in the bosonic physical ordering
  std::vector<int> order;
  for (int pi : BosonicHamiltonianH2::physical) {
    const int j = pi / 3, k = pi % 3;
    const DeterminantIndex det = boson_to_fermion_state({{j, k}, 2});
    for (size_t d = 0; d < dets.size(); ++d)
      if (dets[d] == det.occupied) order.push_back(int(d));
  }
  ComplexMatrix out(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) out(i, j) = fci(order[size_t(i)], order[size_t(j)]);
  return out;
}

/// Fermionic-side ladder matrices over the determinant basis of (n, m),
/// built from the state map; used to check that the mapping preserves the
/// canonical commutation relations away from the truncation boundary.
inline ComplexMatrix mapped_ladder_matrix(int mode /*1-based*/, bool creation, int m, int n) {
  const auto dets = fermion::enumerate_determinants(m, n);
  const Eigen::Index dim = Eigen::Index(dets.size());
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  std::map<std::vector<int>, int> pos;
  for (size_t i = 0; i < dets.size(); ++i) pos[dets[i]] = int(i);
  for (size_t i = 0; i < dets.size(); ++i) {
    BosonFockIndex b = fermion_to_boson_state({dets[i], m});
    const int level = b.levels[size_t(mode - 1)];
    int level_sum = 0;
    for (int q : b.levels) level_sum += q;
    double amp;
    if (creation) {
      // the level sum bounds the highest determinant index; images beyond
      // the spin-orbital range fall outside the determinant space
      if (level_sum + 1 > b.max_level) continue;
      amp = std::sqrt(double(level + 1));
      b.levels[size_t(mode - 1)] = level + 1;
    } else {
      if (level == 0) continue;
      amp = std::sqrt(double(level));
      b.levels[size_t(mode - 1)] = level - 1;
    }
    const DeterminantIndex d2 = boson_to_fermion_state(b);
    auto it = pos.find(d2.occupied);
    if (it == pos.end()) continue;
    out(it->second, Eigen::Index(i)) = amp;
  }
  return out;
}

}  // namespace bosonq::dms
