#include <cstdio>
#include <filesystem>
#include <fstream>

#include <bosonq/compiler.hpp>
#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace bosonq;
using namespace bosonq::compiler;

namespace {

EcdChain random_chain(optim::Rng& rng, int depth, int cutoff, double beta_scale = 1.0) {
  EcdChain c;
  c.depth = depth;
  c.cutoff = cutoff;
  for (int k = 0; k < depth; ++k) {
    c.beta.push_back(Complex(rng.uniform(-beta_scale, beta_scale),
                             rng.uniform(-beta_scale, beta_scale)));
    c.theta.push_back(rng.uniform(-M_PI, M_PI));
    c.phi.push_back(rng.uniform(-M_PI, M_PI));
  }
  return c;
}

SnapChain random_snap(optim::Rng& rng, int depth, int cutoff) {
  SnapChain c;
  c.depth = depth;
  c.cutoff = cutoff;
  c.alpha.assign(size_t(depth), 0.0);
  c.theta.assign(size_t(depth), std::vector<double>(size_t(cutoff), 0.0));
  for (auto& a : c.alpha) a = rng.uniform(-0.5, 0.5);
  for (auto& row : c.theta)
    for (auto& t : row) t = rng.uniform(-M_PI, M_PI);
  return c;
}

}  // namespace

TEST_CASE("ecd_chain_unitary") {
  SECTION("depth 0 is the identity") {
    EcdChain c{0, 8, {}, {}, {}};
    REQUIRE((ecd_chain_unitary(c) - fock::identity(16)).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("depth 1 at beta = 0, theta = 0 is X (x) I") {
    EcdChain c{1, 8, {0.0}, {0.0}, {0.0}};
    ComplexMatrix x(2, 2);
    x << 0, 1, 1, 0;
    REQUIRE((ecd_chain_unitary(c) - fock::kron(x, fock::identity(8))).cwiseAbs().maxCoeff() <
            1e-13);
  }
  SECTION("random depth-10 chains are unitary at L = 16") {
    optim::Rng rng(21);
    for (int trial = 0; trial < 3; ++trial) {
      const EcdChain c = random_chain(rng, 10, 16, 2.0);
      REQUIRE(fock::unitarity_defect(ecd_chain_unitary(c)) < 1e-8);
    }
  }
}

TEST_CASE("lcu_matrix") {
  optim::Rng rng(5);
  const EcdChain c = random_chain(rng, 4, 8);
  SECTION("single unit-weight term reduces to the chain") {
    LcuDecomposition d{{1.0}, {c}};
    REQUIRE((lcu_matrix(d) - ecd_chain_unitary(c)).cwiseAbs().maxCoeff() < 1e-13);
  }
  SECTION("opposite weights on identical chains cancel") {
    LcuDecomposition d{{1.0, -1.0}, {c, c}};
    REQUIRE(lcu_matrix(d).cwiseAbs().maxCoeff() < 1e-13);
  }
  SECTION("linearity in the weights") {
    const EcdChain c2 = random_chain(rng, 4, 8);
    LcuDecomposition d1{{0.3, 0.0}, {c, c2}};
    LcuDecomposition d2{{0.0, -1.7}, {c, c2}};
    LcuDecomposition d3{{0.3, -1.7}, {c, c2}};
    REQUIRE((lcu_matrix(d1) + lcu_matrix(d2) - lcu_matrix(d3)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("losses") {
  SECTION("snap loss vanishes for an identity chain against the identity") {
    SnapChain c{1, 4, {0.0}, {std::vector<double>(4, 0.0)}};
    REQUIRE(loss_snap(c, fock::identity(4)) == 0.0);
  }
  SECTION("ecd loss vanishes when the block matches the target") {
    // an even-depth all-zero chain has an identity ancilla-|0> block
    EcdChain c{2, 4, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
    LcuDecomposition d{{1.0}, {c}};
    REQUIRE(loss_ecd(d, fock::identity(4)) < 1e-26);
  }
  SECTION("losses are strictly positive when blocks differ") {
    optim::Rng rng(3);
    const SnapChain c = random_snap(rng, 3, 8);
    REQUIRE(loss_snap(c, fock::identity(8)) > 0.0);
  }
  SECTION("loss value is reproducible bit for bit") {
    optim::Rng rng(12);
    LcuDecomposition d;
    for (int j = 0; j < 3; ++j) {
      d.chains.push_back(random_chain(rng, 5, 16));
      d.lambda.push_back(rng.uniform(-1.0, 1.0));
    }
    fermion::PauliSum p;
    p.n_qubits = 4;
    p.terms.push_back({1.0, fermion::PauliWord("ZIII")});
    p.terms.push_back({1.0, fermion::PauliWord("IZII")});
    const ComplexMatrix target = fermion::pauli_sum_to_matrix(p);
    REQUIRE(loss_ecd(d, target) == loss_ecd(d, target));
  }
  SECTION("dimension mismatch is rejected") {
    SnapChain c{1, 4, {0.0}, {std::vector<double>(4, 0.0)}};
    REQUIRE_THROWS_AS(loss_snap(c, fock::identity(8)), std::invalid_argument);
  }
}

TEST_CASE("residual Jacobians match finite differences") {
  optim::Rng rng(77);
  SECTION("snap") {
    const int nd = 3, l = 4;
    SnapChain c = random_snap(rng, nd, l);
    const ComplexMatrix target = word_target("XY");
    Eigen::VectorXd r0;
    Eigen::MatrixXd jac;
    snap_residual(c, target, r0, &jac);
    const Eigen::VectorXd x = pack_snap(c);
    for (int i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x, xm = x;
      Eigen::VectorXd rp, rm;
      xp(i) += 1e-6;
      xm(i) -= 1e-6;
      snap_residual(unpack_snap(xp, nd, l), target, rp, nullptr);
      snap_residual(unpack_snap(xm, nd, l), target, rm, nullptr);
      REQUIRE(((rp - rm) / 2e-6 - jac.col(i)).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
  SECTION("ecd lcu") {
    const int nt = 2, nd = 2, l = 4;
    LcuDecomposition d;
    for (int j = 0; j < nt; ++j) {
      d.chains.push_back(random_chain(rng, nd, l));
      d.lambda.push_back(rng.uniform(-1.0, 1.0));
    }
    const ComplexMatrix target = word_target("ZX");
    Eigen::VectorXd r0;
    Eigen::MatrixXd jac;
    lcu_residual(d, target, r0, &jac);
    const Eigen::VectorXd x = pack_lcu(d);
    for (int i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x, xm = x;
      Eigen::VectorXd rp, rm;
      xp(i) += 1e-6;
      xm(i) -= 1e-6;
      lcu_residual(unpack_lcu(xp, nt, nd, l), target, rp, nullptr);
      lcu_residual(unpack_lcu(xm, nt, nd, l), target, rm, nullptr);
      REQUIRE(((rp - rm) / 2e-6 - jac.col(i)).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
}

TEST_CASE("compile_target") {
  SECTION("ZIII via snap reaches the gate") {
    CompileHyper hyper;
    hyper.depth = 16;
    hyper.seed = 11;
    const auto res = compile_target(word_target("ZIII"), CompileMethod::Snap, hyper);
    REQUIRE(res.converged);
    REQUIRE(res.final_loss <= 1e-8);
    // the reported loss is the recomputed loss of the returned parameters
    REQUIRE(loss_snap(res.snap, word_target("ZIII")) == res.final_loss);
  }
  SECTION("Z0 + Z1 via ecd_lcu reaches the gate") {
    fermion::PauliSum p;
    p.n_qubits = 4;
    p.terms.push_back({1.0, fermion::PauliWord("ZIII")});
    p.terms.push_back({1.0, fermion::PauliWord("IZII")});
    const ComplexMatrix target = fermion::pauli_sum_to_matrix(p);
    CompileHyper hyper;
    hyper.depth = 10;
    hyper.n_terms = 15;
    hyper.seed = 11;
    const auto res = compile_target(target, CompileMethod::EcdLcu, hyper);
    REQUIRE(res.converged);
    REQUIRE(res.final_loss <= 1e-8);
    REQUIRE(int(res.lcu.chains.size()) == 15);
    REQUIRE(loss_ecd(res.lcu, target) == res.final_loss);
    // Hermitian target: the block is Hermitian up to twice the loss radius
    const ComplexMatrix block = res.block_matrix();
    const double bound = 2.0 * std::sqrt(16.0 * 16.0 * res.final_loss);
    REQUIRE(std::sqrt((block - block.adjoint()).squaredNorm()) <= bound + 1e-14);
  }
  SECTION("identity target short-circuits with zero loss") {
    CompileHyper hyper;
    hyper.depth = 16;
    const auto res = compile_target(fock::identity(4), CompileMethod::Snap, hyper);
    REQUIRE(res.final_loss == 0.0);
    REQUIRE(res.iterations == 0);
  }
  SECTION("identical seeds reproduce identical results") {
    CompileHyper hyper;
    hyper.depth = 4;
    hyper.seed = 31;
    const auto a = compile_target(word_target("Y"), CompileMethod::Snap, hyper);
    const auto b = compile_target(word_target("Y"), CompileMethod::Snap, hyper);
    REQUIRE(a.final_loss == b.final_loss);
    REQUIRE(a.snap.alpha == b.snap.alpha);
    REQUIRE(a.snap.theta == b.snap.theta);
  }
  SECTION("invalid dimensions are rejected") {
    REQUIRE_THROWS_AS(compile_target(fock::identity(3), CompileMethod::Snap, {}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(compile_target(fock::identity(32), CompileMethod::Snap, {}),
                      std::invalid_argument);
  }
}

TEST_CASE("pauli word enumeration") {
  REQUIRE(all_pauli_words(1).size() == 3);
  REQUIRE(all_pauli_words(2).size() == 15);
  REQUIRE(all_pauli_words(4).size() == 255);
  for (const auto& w : all_pauli_words(2))
    REQUIRE(w.find_first_not_of("IXYZ") == std::string::npos);
}

TEST_CASE("parameter library") {
  CompileHyper hyper;
  hyper.depth = 6;
  hyper.seed = 5;
  const ParamLibrary lib = build_pauli_library(2, CompileMethod::Snap, hyper);

  SECTION("covers every non-trivial word of one and two qubits") {
    REQUIRE(lib.entries.size() == 18);
    for (const auto& w : all_pauli_words(2)) REQUIRE(lib.contains(w));
    for (const auto& w : all_pauli_words(1)) REQUIRE(lib.contains(w));
  }
  SECTION("every stored loss is below the declared threshold") {
    for (const auto& [word, res] : lib.entries) {
      INFO("word " << word);
      REQUIRE(res.final_loss <= lib.threshold);
      REQUIRE(res.converged);
    }
  }
  SECTION("save -> load roundtrip is bit-identical") {
    const std::string path = (std::filesystem::temp_directory_path() / "bq_lib.json").string();
    save_library(lib, path);
    const ParamLibrary loaded = load_library(path);
    REQUIRE(library_checksum(loaded) == library_checksum(lib));
    const std::string path2 = path + "2";
    save_library(loaded, path2);
    std::ifstream f1(path), f2(path2);
    const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(!s1.empty());
    REQUIRE(s1 == s2);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
  }
  SECTION("checksum corruption is detected on load") {
    nlohmann::json j = library_to_json(lib);
    j["entries"]["XX"]["params"]["alpha"][0] = 0.123456;
    const std::string path =
        (std::filesystem::temp_directory_path() / "bq_lib_bad.json").string();
    std::ofstream(path) << j.dump();
    REQUIRE_THROWS_WITH(load_library(path), Catch::Matchers::ContainsSubstring("checksum"));
    std::filesystem::remove(path);
  }
  SECTION("stored-loss drift is detected on load") {
    ParamLibrary tweaked = lib;
    tweaked.entries.at("XX").final_loss += 1e-3;
    nlohmann::json j = library_to_json(tweaked);  // checksum covers the drifted loss
    const std::string path =
        (std::filesystem::temp_directory_path() / "bq_lib_drift.json").string();
    std::ofstream(path) << j.dump();
    REQUIRE_THROWS_WITH(load_library(path, 18), Catch::Matchers::ContainsSubstring("loss"));
    std::filesystem::remove(path);
  }
  SECTION("per-word seeding makes the build reproducible") {
    const ParamLibrary again = build_pauli_library(2, CompileMethod::Snap, hyper);
    REQUIRE(library_checksum(again) == library_checksum(lib));
  }
}
