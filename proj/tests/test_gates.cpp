#include <bosonq/gates.hpp>
#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace bosonq;
using namespace bosonq::gates;

namespace {
const Complex kI(0.0, 1.0);

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}
}  // namespace

TEST_CASE("rotation") {
  SECTION("zero angle is the identity") {
    REQUIRE((rotation(0.0, 1.23) - fock::identity(2)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SECTION("rotation(pi, 0) = -iX") {
    ComplexMatrix x(2, 2);
    x << 0, 1, 1, 0;
    REQUIRE((rotation(M_PI, 0.0) - (-kI * x)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SECTION("inverse composition") {
    REQUIRE((rotation(0.7, 0.3) * rotation(-0.7, 0.3) - fock::identity(2))
                .cwiseAbs()
                .maxCoeff() < 1e-15);
  }
}

TEST_CASE("displacement") {
  SECTION("zero amplitude is the identity") {
    REQUIRE((displacement(0.0, 8) - fock::identity(8)).cwiseAbs().maxCoeff() < 1e-13);
  }
  SECTION("coherent-state amplitudes <n|D(beta)|0>") {
    const Complex beta(0.5, 0.0);
    const ComplexMatrix d = displacement(beta, 20);
    for (int n = 0; n <= 5; ++n) {
      const Complex expect =
          std::exp(-0.5 * std::norm(beta)) * std::pow(beta, n) / std::sqrt(factorial(n));
      REQUIRE(std::abs(d(n, 0) - expect) < 1e-8);
    }
  }
  SECTION("D(beta) D(-beta) = I within truncation error") {
    const Complex beta(0.6, -0.8);  // |beta| = 1
    const ComplexMatrix prod = displacement(beta, 32) * displacement(-beta, 32);
    REQUIRE((prod - fock::identity(32)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("conditional displacement") {
  const Complex beta(0.4, 0.2);
  const int l = 12;
  SECTION("matches the exponential form exp(i Z (x) A(beta))") {
    const ComplexMatrix bdag = fock::boson_create(l);
    const ComplexMatrix gen = beta * bdag - std::conj(beta) * bdag.adjoint();
    ComplexMatrix z(2, 2);
    z << 1, 0, 0, -1;
    const ComplexMatrix viaexp = fock::matexp(fock::kron(z, gen));
    REQUIRE((conditional_displacement(beta, l) - viaexp).cwiseAbs().maxCoeff() < 1e-10);
  }
  SECTION("beta = 0 is the identity") {
    REQUIRE((conditional_displacement(0.0, l) - fock::identity(2 * l)).cwiseAbs().maxCoeff() <
            1e-13);
  }
  SECTION("off-diagonal qubit blocks vanish") {
    const ComplexMatrix cd = conditional_displacement(beta, l);
    REQUIRE(cd.topRightCorner(l, l).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(cd.bottomLeftCorner(l, l).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("ecd") {
  const int l = 10;
  SECTION("ECD(beta) = (X (x) I) CD(beta/2)") {
    const Complex beta(0.3, -0.5);
    ComplexMatrix x(2, 2);
    x << 0, 1, 1, 0;
    const ComplexMatrix ref =
        fock::kron(x, fock::identity(l)) * conditional_displacement(beta / 2.0, l);
    REQUIRE((ecd(beta, l) - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("block matrix form of the ECD-rotation gate") {
    const Complex beta(0.25, 0.15);
    const double theta = 0.9, phi = -1.1;
    const ComplexMatrix u = ecd_rotation(beta, theta, phi, l);
    const ComplexMatrix dp = displacement(beta / 2.0, l), dm = displacement(-beta / 2.0, l);
    ComplexMatrix ref(2 * l, 2 * l);
    ref.topLeftCorner(l, l) = std::exp(kI * (phi - M_PI / 2.0)) * std::sin(theta / 2.0) * dm;
    ref.topRightCorner(l, l) = std::cos(theta / 2.0) * dm;
    ref.bottomLeftCorner(l, l) = std::cos(theta / 2.0) * dp;
    ref.bottomRightCorner(l, l) =
        -std::exp(-kI * (phi - M_PI / 2.0)) * std::sin(theta / 2.0) * dp;
    REQUIRE((u - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("beta = 0, theta = 0 gives X (x) I") {
    ComplexMatrix x(2, 2);
    x << 0, 1, 1, 0;
    REQUIRE((ecd(0.0, l) - fock::kron(x, fock::identity(l))).cwiseAbs().maxCoeff() < 1e-13);
  }
  SECTION("unitarity") {
    const ComplexMatrix e = ecd(Complex(0.4, 0.1), 24);
    REQUIRE((e * e.adjoint() - fock::identity(48)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("snap") {
  SECTION("zero phases give the identity") {
    REQUIRE((snap(std::vector<double>(5, 0.0), 5) - fock::identity(5)).cwiseAbs().maxCoeff() ==
            0.0);
  }
  SECTION("single pi phase") {
    std::vector<double> t(4, 0.0);
    t[0] = M_PI;
    const ComplexMatrix s = snap(t, 4);
    REQUIRE(std::abs(s(0, 0) + 1.0) < 1e-15);
    REQUIRE(std::abs(s(1, 1) - 1.0) < 1e-15);
  }
  SECTION("unitary and diagonal for random phases, L = 16") {
    optim::Rng rng(4);
    std::vector<double> t(16);
    for (auto& v : t) v = rng.uniform(-M_PI, M_PI);
    const ComplexMatrix s = snap(t, 16);
    REQUIRE(fock::is_unitary(s, 1e-12));
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j)
        if (i != j) REQUIRE(std::abs(s(i, j)) == 0.0);
  }
  SECTION("length mismatch throws") {
    REQUIRE_THROWS_AS(snap(std::vector<double>(3, 0.0), 4), std::invalid_argument);
  }
  SECTION("qubit form embeds S on the ancilla-|0> branch") {
    std::vector<double> t{0.1, -0.4};
    const ComplexMatrix q = snap_qubit_form(t, 2);
    REQUIRE((q.topLeftCorner(2, 2) - snap(t, 2)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((q.bottomRightCorner(2, 2) - fock::identity(2)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("beam splitter") {
  SECTION("zero angle is the identity") {
    REQUIRE((beam_splitter(0.0, 0.3, 4, 4) - fock::identity(16)).cwiseAbs().maxCoeff() < 1e-13);
  }
  SECTION("BS(pi, pi/2) swaps |1,0> and |0,1> up to a unit phase") {
    const ComplexMatrix bs = beam_splitter(M_PI, M_PI / 2.0, 4, 4);
    const StateVector in = fock::basis_state(16, 1 * 4 + 0);
    const StateVector out = bs * in;
    REQUIRE(std::abs(std::abs(out(0 * 4 + 1)) - 1.0) < 1e-10);
  }
  SECTION("photon number is conserved") {
    const ComplexMatrix bs = beam_splitter(0.7, 0.2, 5, 5);
    const ComplexMatrix total = fock::kron(fock::number_operator(5), fock::identity(5)) +
                                fock::kron(fock::identity(5), fock::number_operator(5));
    REQUIRE((bs * total - total * bs).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("controlled_embed") {
  SECTION("identity embeds to the identity") {
    REQUIRE((controlled_embed(fock::identity(3)) - fock::identity(6)).cwiseAbs().maxCoeff() ==
            0.0);
  }
  SECTION("controlled X is the CNOT matrix") {
    ComplexMatrix x(2, 2);
    x << 0, 1, 1, 0;
    const ComplexMatrix c = controlled_embed(x);
    ComplexMatrix cnot = ComplexMatrix::Zero(4, 4);
    cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
    REQUIRE((c - cnot).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("squaring commutes with the embedding") {
    optim::Rng rng(8);
    const ComplexMatrix u = testsup::random_unitary(rng, 4);
    REQUIRE((controlled_embed(u) * controlled_embed(u) - controlled_embed((u * u).eval()))
                .cwiseAbs()
                .maxCoeff() < 1e-12);
  }
}

TEST_CASE("compile_controlled_ecd") {
  const int l = 8;
  SECTION("beta = 0 collapses to a controlled bit flip") {
    const auto compiled = compile_controlled_ecd(0.0, l);
    const ComplexMatrix ref = controlled_embed(ecd(0.0, l));
    REQUIRE((compiled.matrix - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("random amplitudes reproduce the direct controlled-ECD") {
    for (Complex beta : {Complex(0.3, 0.1), Complex(-1.2, 0.0)}) {
      const auto compiled = compile_controlled_ecd(beta, l);
      REQUIRE((compiled.matrix - controlled_embed(ecd(beta, l))).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SECTION("circuit has exactly three elements") {
    REQUIRE(compile_controlled_ecd(Complex(0.2, 0.2), l).circuit.gates.size() == 3);
  }
}

TEST_CASE("controlled_snap_circuit") {
  const int l = 4;
  std::vector<double> t{0.3, -0.8, 1.2, 0.05};
  SECTION("zero phases act as the identity") {
    const auto c = controlled_snap_circuit(std::vector<double>(size_t(l), 0.0), l);
    REQUIRE((c.matrix - fock::identity(4 * l)).cwiseAbs().maxCoeff() < 1e-13);
  }
  SECTION("ancilla-|0> restriction equals the controlled SNAP") {
    const auto c = controlled_snap_circuit(t, l);
    const ComplexMatrix restricted = restrict_ancilla_zero(c.matrix, l);
    REQUIRE((restricted - controlled_embed(snap(t, l))).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("ancilla prepared in |0> returns to |0>") {
    const auto c = controlled_snap_circuit(t, l);
    optim::Rng rng(5);
    // random (control, mode) state with the ancilla in |0>
    StateVector in = StateVector::Zero(4 * l);
    for (int ctrl = 0; ctrl < 2; ++ctrl)
      for (int n = 0; n < l; ++n)
        in(ctrl * 2 * l + 0 * l + n) = Complex(rng.normal(), rng.normal());
    in.normalize();
    const StateVector out = c.matrix * in;
    // amplitude on ancilla-|1> components stays zero
    for (int ctrl = 0; ctrl < 2; ++ctrl)
      for (int n = 0; n < l; ++n) REQUIRE(std::abs(out(ctrl * 2 * l + l + n)) < 1e-13);
  }
}

TEST_CASE("gate constructors are unitary at safe cutoffs") {
  optim::Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const Complex beta(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    const int l = int(8.0 * std::norm(beta)) + 16;
    REQUIRE(fock::unitarity_defect(displacement(beta, l)) < 1e-10);
    REQUIRE(fock::unitarity_defect(ecd(beta, l)) < 1e-10);
    REQUIRE(fock::unitarity_defect(
                ecd_rotation(beta, rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI), l)) <
            1e-10);
  }
}

TEST_CASE("composition order: a three-gate fixture") {
  // right-to-left products: the first listed gate acts first
  const int l = 6;
  std::vector<double> t(size_t(l), 0.0);
  t[1] = M_PI / 2.0;
  const ComplexMatrix d = displacement(0.3, l);
  const ComplexMatrix s = snap(t, l);
  const StateVector start = fock::basis_state(l, 0);
  // apply D, then S, then D^dag by hand
  const StateVector byhand = d.adjoint() * (s * (d * start));
  const ComplexMatrix prod = d.adjoint() * s * d;
  REQUIRE(((prod * start) - byhand).norm() < 1e-13);
}

TEST_CASE("circuit serialization") {
  const auto c = compile_controlled_ecd(Complex(0.1, -0.2), 4);
  const auto j = circuit_to_json(c.circuit);
  REQUIRE(j.at("application_order") == "ascending");
  REQUIRE(j.at("gates").size() == 3);
  REQUIRE(j.at("gates")[0].at("kind") == "conditional_displacement");
  REQUIRE(j.at("gates")[1].at("kind") == "controlled_x");
  REQUIRE(j.at("gates")[0].at("order") == 0);
  const auto beta = j.at("gates")[0].at("params").at("beta");
  REQUIRE(beta[0].get<double>() == 0.025);
  REQUIRE(beta[1].get<double>() == -0.05);
}
