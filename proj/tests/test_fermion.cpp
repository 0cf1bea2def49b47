#include <bosonq/fermion.hpp>
#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace bosonq;
using namespace bosonq::fermion;

namespace {

MolecularIntegrals h2_fixture() {
  static MolecularIntegrals ints = load_fcidump_file(testsup::data_path("h2_0.7414.fcidump"));
  return ints;
}

}  // namespace

TEST_CASE("load_fcidump") {
  SECTION("minimal one-orbital file with only the nuclear record") {
    const auto ints = load_fcidump("&FCI NORB=1,NELEC=2,MS2=0,\n&END\n 0.5 0 0 0 0\n");
    REQUIRE(ints.n_spatial == 1);
    REQUIRE(ints.h_nuc == 0.5);
    REQUIRE(ints.one_body.cwiseAbs().maxCoeff() == 0.0);
    for (double v : ints.two_body) REQUIRE(v == 0.0);
  }
  SECTION("H2 fixture has two orbitals and nonzero two-body integrals") {
    const auto ints = h2_fixture();
    REQUIRE(ints.n_spatial == 2);
    REQUIRE(ints.n_electrons == 2);
    double max_two = 0.0;
    for (double v : ints.two_body) max_two = std::max(max_two, std::abs(v));
    REQUIRE(max_two > 0.1);
  }
  SECTION("symmetry completion: storing (21|21) populates all eight images") {
    const auto ints = load_fcidump(
        "&FCI NORB=2,NELEC=2,MS2=0,\n&END\n 0.25 2 1 2 1\n 0.0 0 0 0 0\n");
    // <pq|rs> = (ps|qr): <01|01> = (01|10) = stored value by symmetry
    REQUIRE(ints.phys(0, 1, 0, 1) == 0.25);
    REQUIRE(ints.phys(1, 0, 1, 0) == 0.25);
    REQUIRE(ints.phys(0, 1, 1, 0) == 0.0);
  }
  SECTION("parse errors carry line numbers") {
    REQUIRE_THROWS_WITH(load_fcidump("&FCI NOPE=1\n&END\n"),
                        Catch::Matchers::ContainsSubstring("line 1"));
    REQUIRE_THROWS_WITH(load_fcidump("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n 1.0 5 1 0 0\n"),
                        Catch::Matchers::ContainsSubstring("line 3"));
    REQUIRE_THROWS_AS(load_fcidump("no header\n"), ParseError);
  }
  SECTION("header terminated by a slash") {
    const auto ints = load_fcidump("&FCI NORB=1,NELEC=1,MS2=1,\n/\n-0.25 1 1 0 0\n");
    REQUIRE(ints.one_body(0, 0) == -0.25);
  }
}

TEST_CASE("build_molecular_hamiltonian") {
  SECTION("zero integrals with h_nuc give a single identity term") {
    MolecularIntegrals ints;
    ints.n_spatial = 1;
    ints.h_nuc = 1.0;
    ints.one_body = Eigen::MatrixXd::Zero(1, 1);
    ints.two_body.assign(1, 0.0);
    const auto h = build_molecular_hamiltonian(ints);
    REQUIRE(h.terms.size() == 1);
    REQUIRE(h.terms[0].create.empty());
    REQUIRE(h.terms[0].coeff == Complex(1.0, 0.0));
  }
  SECTION("H2 fixture Hamiltonian matches the explicit 13-term form") {
    const auto ints = h2_fixture();
    const auto h = build_molecular_hamiltonian(ints);
    const ComplexMatrix full = operator_matrix_occupation(h);

    auto so2 = [&](int p, int q, int r, int s) { return ints.two_body_so(p, q, r, s); };
    FermionOperatorSum ref;
    ref.n_modes = 4;
    ref.terms.push_back({ints.h_nuc, {}, {}});
    for (int p = 0; p < 4; ++p) ref.terms.push_back({ints.one_body_so(p, p), {p}, {p}});
    ref.terms.push_back({so2(0, 1, 1, 0), {0, 1}, {1, 0}});
    ref.terms.push_back({so2(2, 3, 3, 2), {2, 3}, {3, 2}});
    ref.terms.push_back({so2(0, 3, 3, 0), {0, 3}, {3, 0}});
    ref.terms.push_back({so2(1, 2, 2, 1), {1, 2}, {2, 1}});
    ref.terms.push_back({so2(0, 2, 2, 0) - so2(0, 2, 0, 2), {0, 2}, {2, 0}});
    ref.terms.push_back({so2(1, 3, 3, 1) - so2(1, 3, 1, 3), {1, 3}, {3, 1}});
    ref.terms.push_back({so2(0, 3, 1, 2), {0, 3}, {1, 2}});
    ref.terms.push_back({so2(0, 3, 1, 2), {2, 1}, {3, 0}});
    ref.terms.push_back({so2(0, 1, 3, 2), {0, 1}, {3, 2}});
    ref.terms.push_back({so2(0, 1, 3, 2), {2, 3}, {1, 0}});
    const ComplexMatrix full_ref = operator_matrix_occupation(ref);
    REQUIRE((full - full_ref).cwiseAbs().maxCoeff() < 1e-11);
  }
  SECTION("hermiticity of the occupation-space matrix") {
    const auto h = build_molecular_hamiltonian(h2_fixture());
    const ComplexMatrix m = operator_matrix_occupation(h);
    REQUIRE((m - m.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pauli word algebra") {
  SECTION("XY = iZ and YX = -iZ") {
    auto [p1, w1] = pauli_mul(Pauli::X, Pauli::Y);
    REQUIRE(w1 == Pauli::Z);
    REQUIRE(std::abs(p1 - Complex(0, 1)) < 1e-15);
    auto [p2, w2] = pauli_mul(Pauli::Y, Pauli::X);
    REQUIRE(w2 == Pauli::Z);
    REQUIRE(std::abs(p2 - Complex(0, -1)) < 1e-15);
  }
  SECTION("word products agree with dense matrices") {
    optim::Rng rng(17);
    const std::string alphabet = "IXYZ";
    for (int trial = 0; trial < 20; ++trial) {
      std::string a, b;
      for (int q = 0; q < 3; ++q) {
        a.push_back(alphabet[size_t(rng.uniform() * 4)]);
        b.push_back(alphabet[size_t(rng.uniform() * 4)]);
      }
      auto [phase, w] = pauli_word_mul(PauliWord(a), PauliWord(b));
      const ComplexMatrix lhs = pauli_word_matrix(PauliWord(a)) * pauli_word_matrix(PauliWord(b));
      const ComplexMatrix rhs = phase * pauli_word_matrix(w);
      REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-13);
    }
  }
}

TEST_CASE("jordan_wigner") {
  SECTION("creation operator on one mode maps to (X - iY)/2") {
    FermionOperatorSum op;
    op.n_modes = 1;
    op.terms.push_back({1.0, {0}, {}});
    const PauliSum p = jordan_wigner(op, 1e-16);
    REQUIRE(p.terms.size() == 2);
    REQUIRE(std::abs(p.coefficient_of("X") - Complex(0.5, 0.0)) < 1e-15);
    REQUIRE(std::abs(p.coefficient_of("Y") - Complex(0.0, -0.5)) < 1e-15);
  }
  SECTION("number operator image has eigenvalue 1 on the occupied state") {
    FermionOperatorSum op;
    op.n_modes = 2;
    op.terms.push_back({1.0, {0}, {0}});
    const ComplexMatrix m = pauli_sum_to_matrix(jordan_wigner(op));
    // occupied mode 0 = bit b_0 = 1 = basis index 2 on two qubits
    REQUIRE(std::abs(m(2, 2) - 1.0) < 1e-14);
    REQUIRE(std::abs(m(0, 0)) < 1e-14);
    // matches the occupation-space construction exactly
    REQUIRE((m - operator_matrix_occupation(op)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("JWT image equals the occupation-space matrix for the H2 Hamiltonian") {
    const auto h = build_molecular_hamiltonian(h2_fixture());
    const ComplexMatrix jw = pauli_sum_to_matrix(jordan_wigner(h));
    const ComplexMatrix occ = operator_matrix_occupation(h);
    REQUIRE((jw - occ).cwiseAbs().maxCoeff() < 1e-11);
  }
  SECTION("H2 Hamiltonian has exactly 15 words with real coefficients") {
    const PauliSum p = jordan_wigner(build_molecular_hamiltonian(h2_fixture()));
    REQUIRE(p.terms.size() == 15);
    REQUIRE(p.max_imag() < 1e-14);
    const auto ints = h2_fixture();
    // coefficient of Z0 Z1 is <01|10>/4
    REQUIRE(std::abs(p.coefficient_of("ZZII").real() - 0.25 * ints.two_body_so(0, 1, 1, 0)) <
            1e-12);
  }
  SECTION("CAR: {a_p, a_q^dag} = delta_pq on 4 modes") {
    const int m = 4;
    for (int p = 0; p < m; ++p)
      for (int q = 0; q < m; ++q) {
        FermionOperatorSum ap, cq;
        ap.n_modes = cq.n_modes = m;
        ap.terms.push_back({1.0, {}, {p}});
        cq.terms.push_back({1.0, {q}, {}});
        const PauliSum jp = jordan_wigner(ap, 1e-16), jq = jordan_wigner(cq, 1e-16);
        const PauliSum anti = pauli_sum_add(pauli_sum_mul(jp, jq), pauli_sum_mul(jq, jp));
        const ComplexMatrix am = pauli_sum_to_matrix(anti);
        const ComplexMatrix expect =
            (p == q) ? ComplexMatrix(fock::identity(16)) : ComplexMatrix(ComplexMatrix::Zero(16, 16));
        REQUIRE((am - expect).cwiseAbs().maxCoeff() < 1e-12);
      }
  }
}

TEST_CASE("group_pauli_sum") {
  SECTION("H2 Hamiltonian groups into 8 coefficient classes") {
    const PauliSum p = jordan_wigner(build_molecular_hamiltonian(h2_fixture()));
    const GroupedPauliSum g = group_pauli_sum(p);
    REQUIRE(g.groups.size() == 7);  // plus the identity constant
    REQUIRE(g.constant != 0.0);
    // one group holds the four XXYY-type words with the +,+,-,- sign pattern
    bool found = false;
    for (const auto& grp : g.groups) {
      if (grp.members.size() == 4) {
        found = true;
        int plus = 0, minus = 0;
        for (const auto& [sign, word] : grp.members) {
          (sign > 0 ? plus : minus)++;
          const std::string s = word.str();
          REQUIRE(s.find_first_not_of("XY") == std::string::npos);
        }
        REQUIRE(plus == 2);
        REQUIRE(minus == 2);
      }
    }
    REQUIRE(found);
    // grouping preserves the matrix
    REQUIRE((grouped_sum_to_matrix(g) - pauli_sum_to_matrix(p)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("all-distinct coefficients group trivially") {
    PauliSum p;
    p.n_qubits = 2;
    p.terms.push_back({1.0, PauliWord("XI")});
    p.terms.push_back({2.0, PauliWord("IZ")});
    REQUIRE(group_pauli_sum(p).groups.size() == 2);
  }
  SECTION("duplicate words merge before grouping") {
    PauliSum p;
    p.n_qubits = 1;
    p.terms.push_back({1.0, PauliWord("Z")});
    p.terms.push_back({1.5, PauliWord("Z")});
    const auto g = group_pauli_sum(p);
    REQUIRE(g.groups.size() == 1);
    REQUIRE(g.groups[0].coefficient == 2.5);
  }
}

TEST_CASE("pauli_sum_to_matrix") {
  SECTION("Z on one qubit") {
    PauliSum p;
    p.n_qubits = 1;
    p.terms.push_back({1.0, PauliWord("Z")});
    const ComplexMatrix m = pauli_sum_to_matrix(p);
    REQUIRE(std::abs(m(0, 0) - 1.0) < 1e-15);
    REQUIRE(std::abs(m(1, 1) + 1.0) < 1e-15);
  }
  SECTION("Z0 + Z1 = diag(2, 0, 0, -2)") {
    PauliSum p;
    p.n_qubits = 2;
    p.terms.push_back({1.0, PauliWord("ZI")});
    p.terms.push_back({1.0, PauliWord("IZ")});
    const ComplexMatrix m = pauli_sum_to_matrix(p);
    REQUIRE(std::abs(m(0, 0) - 2.0) < 1e-15);
    REQUIRE(std::abs(m(1, 1)) < 1e-15);
    REQUIRE(std::abs(m(2, 2)) < 1e-15);
    REQUIRE(std::abs(m(3, 3) + 2.0) < 1e-15);
  }
  SECTION("real-coefficient sums give Hermitian matrices") {
    const PauliSum p = jordan_wigner(build_molecular_hamiltonian(h2_fixture()));
    const ComplexMatrix m = pauli_sum_to_matrix(p);
    REQUIRE((m - m.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("exact_ground_state") {
  SECTION("diag(3,1,2) has ground energy 1 at e1") {
    ComplexMatrix m = ComplexMatrix::Zero(3, 3);
    m(0, 0) = 3;
    m(1, 1) = 1;
    m(2, 2) = 2;
    const auto g = exact_ground_state(m);
    REQUIRE(g.energy == 1.0);
    REQUIRE(std::abs(std::abs(g.vector(1)) - 1.0) < 1e-14);
  }
  SECTION("H2 fixture FCI energy matches the reference") {
    const ComplexMatrix m =
        pauli_sum_to_matrix(jordan_wigner(build_molecular_hamiltonian(h2_fixture())));
    const auto g = exact_ground_state(m);
    REQUIRE(std::abs(g.energy - (-1.1372701747)) < 1e-7);
  }
  SECTION("non-Hermitian input is rejected") {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 1) = 1.0;
    REQUIRE_THROWS_AS(exact_ground_state(m), std::invalid_argument);
  }
  SECTION("degenerate ground level returns the eigenvalue once") {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    const auto g = exact_ground_state(m);
    REQUIRE(g.energy == 0.0);
    REQUIRE(std::abs(g.vector.norm() - 1.0) < 1e-14);
  }
}

TEST_CASE("JWT spectrum equals determinant-space FCI per particle sector") {
  const auto h = build_molecular_hamiltonian(h2_fixture());
  const ComplexMatrix full = pauli_sum_to_matrix(jordan_wigner(h));
  for (int n = 0; n <= 4; ++n) {
    const auto dets = enumerate_determinants(4, n);
    ComplexMatrix sector(dets.size(), dets.size());
    for (size_t i = 0; i < dets.size(); ++i)
      for (size_t j = 0; j < dets.size(); ++j)
        sector(i, j) =
            full(determinant_to_index(dets[i], 4), determinant_to_index(dets[j], 4));
    const ComplexMatrix direct = fci_matrix(h, n);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> a(sector), b(direct);
    REQUIRE((a.eigenvalues() - b.eigenvalues()).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("symmetry operators") {
  SECTION("number operator expectation on a one-electron state, M=2") {
    const PauliSum n = number_operator_qubit(2);
    const ComplexMatrix m = pauli_sum_to_matrix(n);
    // occupied mode 0: index 2 (bit for mode 0 is most significant)
    REQUIRE(std::abs(m(2, 2) - 1.0) < 1e-13);
  }
  SECTION("number eigenvalue 2 on the Fermi-vacuum image, M=4") {
    const ComplexMatrix m = pauli_sum_to_matrix(number_operator_qubit(4));
    const std::uint32_t idx = determinant_to_index({0, 1}, 4);
    REQUIRE(std::abs(m(idx, idx) - 2.0) < 1e-13);
  }
  SECTION("S^2 annihilates the doubly-occupied singlet determinant") {
    const auto ops = symmetry_operators(4);
    const ComplexMatrix s2 = pauli_sum_to_matrix(ops.spin_squared);
    const std::uint32_t idx = determinant_to_index({0, 1}, 4);
    const StateVector v = fock::basis_state(16, idx);
    REQUIRE((s2 * v).norm() < 1e-12);
  }
  SECTION("S^2 gives S(S+1) = 2 on a triplet state") {
    const auto ops = symmetry_operators(4);
    const ComplexMatrix s2 = pauli_sum_to_matrix(ops.spin_squared);
    // alpha-alpha determinant [0, 2] is a pure triplet (S = 1, M_s = 1)
    const StateVector v = fock::basis_state(16, determinant_to_index({0, 2}, 4));
    REQUIRE(((s2 * v) - 2.0 * v).norm() < 1e-12);
  }
  SECTION("odd mode count is rejected") {
    REQUIRE_THROWS_AS(symmetry_operators(3), std::invalid_argument);
  }
}
