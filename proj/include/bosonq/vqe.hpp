#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "compiler.hpp"
#include "fermion.hpp"
#include "fock.hpp"
#include "gates.hpp"
#include "optim.hpp"

// Trial-state preparation, expectation evaluation (direct and emulated
// Hadamard test), constrained costs, the VQE outer loop, PES scans, and
// subspace tomography. Energy gradients are computed analytically by
// back-propagating through the ansatz layers.

namespace bosonq::vqe {

// ---------------------------------------------------------------------------
// Trial ansatzes. Parameter layouts (layer-major):
//   EcdRot          per layer [Re beta, Im beta, theta, phi]; single mode,
//                   state prepared on qubit (x) mode and projected onto the
//                   qubit-|0> block, renormalized
//   SnapDisp        per layer [alpha, theta_0 .. theta_{L-1}]
//   MultimodeBsSnap per layer, for each mode j [alpha_j, theta_j(L_j)], then
//                   for each pair j<k in ascending order [beta_jk, phi_jk];
//                   displacement+SNAP act first, then the beam splitters
//   DmsEcdTwoMode   per block [Re beta, Im beta, theta, phi]; qubit (x) two
//                   qutrits with the ECD acting on (qubit, mode 2); returns
//                   the full (unprojected) 18-dim state
//   DmsQutrit       single parameter theta; two qutrits, rotation within the
//                   {|0>, |2>} subspace of mode 2
// ---------------------------------------------------------------------------

enum class AnsatzKind { EcdRot, SnapDisp, MultimodeBsSnap, DmsEcdTwoMode, DmsQutrit };

struct TrialAnsatz {
  AnsatzKind kind = AnsatzKind::SnapDisp;
  int depth = 1;
  std::vector<int> cutoffs;  // per-mode Fock cutoffs

  int parameter_count() const {
    switch (kind) {
      case AnsatzKind::EcdRot: return 4 * depth;
      case AnsatzKind::SnapDisp: return depth * (1 + cutoffs.at(0));
      case AnsatzKind::MultimodeBsSnap: {
        int per_layer = 0;
        for (int l : cutoffs) per_layer += 1 + l;
        const int n = int(cutoffs.size());
        per_layer += n * (n - 1);  // (beta, phi) per pair
        return depth * per_layer;
      }
      case AnsatzKind::DmsEcdTwoMode: return 4 * depth;
      case AnsatzKind::DmsQutrit: return 1;
    }
    return 0;
  }

  /// Dimension of the returned trial state.
  Eigen::Index state_dim() const {
    switch (kind) {
      case AnsatzKind::EcdRot: return cutoffs.at(0);
      case AnsatzKind::SnapDisp: return cutoffs.at(0);
      case AnsatzKind::MultimodeBsSnap: {
        Eigen::Index d = 1;
        for (int l : cutoffs) d *= l;
        return d;
      }
      case AnsatzKind::DmsEcdTwoMode: return 2 * 9;
      case AnsatzKind::DmsQutrit: return 9;
    }
    return 0;
  }
};

namespace detail {

// Generic differentiable layer stack: dense layer matrices with per-parameter
// derivative matrices. Dimensions here are small (<= 512), so materializing
// the layer matrices per evaluation is cheaper than clever operator dispatch.
struct LayerStack {
  StateVector initial;
  std::vector<ComplexMatrix> layers;
  std::vector<std::vector<ComplexMatrix>> derivs;  // derivs[k][i]: layer k, local param i
  bool project_first_block = false;  // keep the first `block` amplitudes
  Eigen::Index block = 0;
};

inline ComplexMatrix displacement_real(double alpha, int cutoff) {
  const auto& de = compiler::detail::disp_eigen(cutoff);
  StateVector e(cutoff);
  const Complex i(0.0, 1.0);
  for (int n = 0; n < cutoff; ++n) e(n) = std::exp(i * (alpha * de.lam(n)));
  return de.v * e.asDiagonal() * de.v.adjoint();
}

/// Beam splitter together with d/d beta and d/d phi.
struct BsWithGrad {
  ComplexMatrix mat, dbeta, dphi;
};

inline BsWithGrad beam_splitter_with_grad(double beta, double phi, int l1, int l2) {
  struct BsEigen {
    ComplexMatrix v;
    Eigen::VectorXd lam;
    ComplexMatrix n1;  // number operator of mode 1 on the product space
  };
  static std::map<std::pair<int, int>, BsEigen> cache;
  static std::mutex mu;
  const std::pair<int, int> key{l1, l2};
  BsEigen* be;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it == cache.end()) {
      BsEigen fresh;
      const ComplexMatrix hop =
          fock::kron(fock::boson_create(l1), fock::boson_annihilate(l2));
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((hop + hop.adjoint()).eval());
      fresh.v = es.eigenvectors();
      fresh.lam = es.eigenvalues();
      fresh.n1 = fock::kron(fock::number_operator(l1), fock::identity(l2));
      it = cache.emplace(key, std::move(fresh)).first;
    }
    be = &it->second;
  }
  const Complex i(0.0, 1.0);
  const Eigen::Index d = be->v.rows();
  StateVector phase(d), e(d), de_dbeta(d);
  // BS(beta, phi) = e^{i phi N1} V e^{i (beta/2) Lam} V^dag e^{-i phi N1}
  for (Eigen::Index n = 0; n < d; ++n) {
    e(n) = std::exp(i * (0.5 * beta * be->lam(n)));
    de_dbeta(n) = i * 0.5 * be->lam(n) * e(n);
  }
  StateVector pdiag(d);
  for (Eigen::Index n = 0; n < d; ++n)
    pdiag(n) = std::exp(i * (phi * be->n1(n, n).real()));
  const ComplexMatrix core = be->v * e.asDiagonal() * be->v.adjoint();
  BsWithGrad out;
  out.mat = pdiag.asDiagonal() * core * pdiag.conjugate().asDiagonal();
  out.dbeta = pdiag.asDiagonal() * (be->v * de_dbeta.asDiagonal() * be->v.adjoint()) *
              pdiag.conjugate().asDiagonal();
  out.dphi = i * (be->n1 * out.mat - out.mat * be->n1);
  return out;
}

/// Embed an operator on (qubit, last mode) into (qubit, middle, last).
inline ComplexMatrix embed_qubit_last(const ComplexMatrix& m, int mid, int last) {
  ComplexMatrix out = ComplexMatrix::Zero(2 * mid * last, 2 * mid * last);
  for (int q = 0; q < 2; ++q)
    for (int qp = 0; qp < 2; ++qp)
      out.block(q * mid * last, qp * mid * last, mid * last, mid * last) =
          fock::kron(fock::identity(mid), m.block(q * last, qp * last, last, last));
  return out;
}

inline LayerStack build_stack(const TrialAnsatz& ansatz, const Eigen::VectorXd& x) {
  if (x.size() != ansatz.parameter_count())
    throw std::invalid_argument("trial ansatz: wrong parameter count");
  LayerStack st;
  const Complex i(0.0, 1.0);
  switch (ansatz.kind) {
    case AnsatzKind::EcdRot: {
      const int l = ansatz.cutoffs.at(0);
      st.initial = fock::basis_state(2 * l, 0);
      st.project_first_block = true;
      st.block = l;
      for (int k = 0; k < ansatz.depth; ++k) {
        const Complex beta(x(4 * k), x(4 * k + 1));
        auto layer = compiler::detail::ecd_layer_with_grad(beta, x(4 * k + 2), x(4 * k + 3), l);
        st.layers.push_back(layer.mat);
        st.derivs.push_back({layer.grad[0], layer.grad[1], layer.grad[2], layer.grad[3]});
      }
      break;
    }
    case AnsatzKind::SnapDisp: {
      const int l = ansatz.cutoffs.at(0);
      const auto& de = compiler::detail::disp_eigen(l);
      st.initial = fock::basis_state(l, 0);
      int at = 0;
      for (int k = 0; k < ansatz.depth; ++k) {
        const double alpha = x(at++);
        StateVector s(l);
        for (int n = 0; n < l; ++n) s(n) = std::exp(i * x(at + n));
        at += l;
        const ComplexMatrix d = displacement_real(alpha, l);
        const ComplexMatrix layer = s.asDiagonal() * d;
        std::vector<ComplexMatrix> dv;
        dv.push_back(s.asDiagonal() * (de.gen * d));  // d/d alpha
        for (int n = 0; n < l; ++n) {
          ComplexMatrix dn = ComplexMatrix::Zero(l, l);
          dn.row(n) = i * layer.row(n);
          dv.push_back(std::move(dn));
        }
        st.layers.push_back(layer);
        st.derivs.push_back(std::move(dv));
      }
      break;
    }
    case AnsatzKind::MultimodeBsSnap: {
      const auto& ls = ansatz.cutoffs;
      const int nmodes = int(ls.size());
      Eigen::Index dim = 1;
      for (int l : ls) dim *= l;
      st.initial = fock::basis_state(dim, 0);
      int at = 0;
      for (int k = 0; k < ansatz.depth; ++k) {
        (void)k;
        // one-mode displacement + SNAP factors, assembled as a product-space
        // matrix mode by mode
        ComplexMatrix layer = fock::identity(dim);
        std::vector<ComplexMatrix> dv;
        std::vector<ComplexMatrix> mode_ops;  // embedded S_j D_j per mode
        for (int j = 0; j < nmodes; ++j) {
          const int l = ls[size_t(j)];
          const auto& de = compiler::detail::disp_eigen(l);
          const double alpha = x(at++);
          StateVector s(l);
          for (int n = 0; n < l; ++n) s(n) = std::exp(i * x(at + n));
          at += l;
          const ComplexMatrix d = displacement_real(alpha, l);
          const ComplexMatrix sd = s.asDiagonal() * d;
          auto embed = [&](const ComplexMatrix& m) {
            ComplexMatrix full = fock::identity(1);
            for (int jj = 0; jj < nmodes; ++jj)
              full = fock::kron(full, jj == j ? m : fock::identity(ls[size_t(jj)]));
            return full;
          };
          mode_ops.push_back(embed(sd));
          dv.push_back(embed((s.asDiagonal() * (de.gen * d)).eval()));
          for (int n = 0; n < l; ++n) {
            ComplexMatrix dn = ComplexMatrix::Zero(l, l);
            dn.row(n) = i * sd.row(n);
            dv.push_back(embed(dn));
          }
        }
        for (const auto& op : mode_ops) layer = op * layer;
        // derivative embeddings above miss the other-mode factors; multiply
        // them in (mode operators commute across distinct modes)
        size_t dv_at = 0;
        for (int j = 0; j < nmodes; ++j) {
          for (int cnt = 0; cnt < 1 + ls[size_t(j)]; ++cnt) {
            ComplexMatrix fixed = dv[dv_at];
            for (int jj = 0; jj < nmodes; ++jj)
              if (jj != j) fixed = mode_ops[size_t(jj)] * fixed;
            dv[dv_at++] = std::move(fixed);
          }
        }
        // beam splitters, ascending pair order
        for (int j = 0; j < nmodes; ++j)
          for (int kk = j + 1; kk < nmodes; ++kk) {
            const double beta = x(at++);
            const double phi = x(at++);
            // operators on the (j, kk) pair embedded into the full space;
            // only implemented for two modes, where the pair is the space
            if (nmodes != 2)
              throw std::invalid_argument("MultimodeBsSnap: only two modes supported");
            auto bs = beam_splitter_with_grad(beta, phi, ls[0], ls[1]);
            for (auto& dmat : dv) dmat = bs.mat * dmat;
            dv.push_back(bs.dbeta * layer);
            dv.push_back(bs.dphi * layer);
            layer = bs.mat * layer;
          }
        st.layers.push_back(layer);
        st.derivs.push_back(std::move(dv));
      }
      break;
    }
    case AnsatzKind::DmsEcdTwoMode: {
      const int l = 3;
      st.initial = fock::basis_state(2 * 9, 0);
      for (int k = 0; k < ansatz.depth; ++k) {
        const Complex beta(x(4 * k), x(4 * k + 1));
        auto sub = compiler::detail::ecd_layer_with_grad(beta, x(4 * k + 2), x(4 * k + 3), l);
        st.layers.push_back(embed_qubit_last(sub.mat, 3, 3));
        st.derivs.push_back({embed_qubit_last(sub.grad[0], 3, 3),
                             embed_qubit_last(sub.grad[1], 3, 3),
                             embed_qubit_last(sub.grad[2], 3, 3),
                             embed_qubit_last(sub.grad[3], 3, 3)});
      }
      break;
    }
    case AnsatzKind::DmsQutrit: {
      st.initial = fock::basis_state(9, 0);
      // generator -i|0><2| + i|2><0| on the second qutrit
      ComplexMatrix g = ComplexMatrix::Zero(3, 3);
      g(0, 2) = Complex(0.0, -1.0);
      g(2, 0) = Complex(0.0, 1.0);
      const ComplexMatrix gen = fock::kron(fock::identity(3), g);
      const ComplexMatrix u = fock::matexp((Complex(0.0, -2.0) * x(0)) * gen);
      st.layers.push_back(u);
      st.derivs.push_back({(Complex(0.0, -2.0) * gen * u).eval()});
      break;
    }
  }
  return st;
}

struct ForwardResult {
  std::vector<StateVector> states;  // states[k] = layers[0..k-1] applied
  StateVector trial;                // post-projection, unit norm
  double projection_norm_sq = 1.0;
};

inline ForwardResult forward(const LayerStack& st) {
  ForwardResult f;
  f.states.reserve(st.layers.size() + 1);
  f.states.push_back(st.initial);
  for (const auto& l : st.layers) f.states.push_back(l * f.states.back());
  const StateVector& full = f.states.back();
  if (st.project_first_block) {
    const StateVector head = full.head(st.block);
    f.projection_norm_sq = head.squaredNorm();
    if (f.projection_norm_sq < 1e-12)
      throw std::runtime_error("trial state projection is numerically degenerate");
    f.trial = head / std::sqrt(f.projection_norm_sq);
  } else {
    f.trial = full;
  }
  return f;
}

}  // namespace detail

inline StateVector prepare_trial_state(const TrialAnsatz& ansatz, const Eigen::VectorXd& params) {
  return detail::forward(detail::build_stack(ansatz, params)).trial;
}

// ---------------------------------------------------------------------------
// Hadamard-test expectation
// ---------------------------------------------------------------------------

/// Exact emulation: ancilla-probability difference p0 - p1 of the
/// H - controlled-U - H circuit, which equals Re <psi|U|psi>.
inline double hadamard_expectation_exact(const StateVector& state, const ComplexMatrix& u) {
  if (std::abs(state.squaredNorm() - 1.0) > 1e-9)
    throw std::invalid_argument("hadamard_expectation: state must be normalized");
  if (u.rows() != state.size())
    throw std::invalid_argument("hadamard_expectation: dimension mismatch");
  const StateVector applied = u * state;
  const double p0 = 0.25 * (state + applied).squaredNorm();
  const double p1 = 0.25 * (state - applied).squaredNorm();
  return p0 - p1;
}

/// Shot-sampled estimator: ancilla measured n times; unbiased with variance
/// (1 - Re^2)/n <= 1/n.
inline double hadamard_expectation_shots(const StateVector& state, const ComplexMatrix& u,
                                         std::uint64_t shots, optim::Rng& rng) {
  if (shots == 0) throw std::invalid_argument("hadamard_expectation: zero shots");
  const StateVector applied = u * state;
  const double p0 = std::clamp(0.25 * (state + applied).squaredNorm(), 0.0, 1.0);
  const std::uint64_t zeros = rng.binomial(shots, p0);
  return 2.0 * double(zeros) / double(shots) - 1.0;
}

// ---------------------------------------------------------------------------
// Mapped Hamiltonians
// ---------------------------------------------------------------------------

struct MappedTerm {
  double coefficient = 0.0;                 // g_mu
  std::vector<std::string> subwords;        // per qumode (snap route)
  std::vector<ComplexMatrix> snap_factors;  // chain unitaries per qumode
  std::vector<double> lambdas;              // ecd route
  std::vector<ComplexMatrix> lcu_blocks;    // ancilla-|0> blocks per unitary
};

struct MappedHamiltonian {
  compiler::CompileMethod method = compiler::CompileMethod::Snap;
  double constant = 0.0;
  std::vector<int> partition;  // qubits per qumode
  std::vector<int> cutoffs;    // 2^{N_Q,j}
  std::vector<MappedTerm> terms;

  Eigen::Index dim() const {
    Eigen::Index d = 1;
    for (int l : cutoffs) d *= l;
    return d;
  }

  /// Dense sum of the decomposed terms (without the constant).
  ComplexMatrix effective_matrix() const {
    const Eigen::Index d = dim();
    ComplexMatrix h = ComplexMatrix::Zero(d, d);
    for (const auto& t : terms) {
      if (method == compiler::CompileMethod::Snap) {
        ComplexMatrix factor = fock::identity(1);
        for (const auto& f : t.snap_factors) factor = fock::kron(factor, f);
        h += t.coefficient * factor;
      } else {
        for (size_t j = 0; j < t.lambdas.size(); ++j)
          h += t.coefficient * t.lambdas[j] * t.lcu_blocks[j];
      }
    }
    return h;
  }
};

struct LibraryMissError : std::runtime_error {
  explicit LibraryMissError(const std::string& word)
      : std::runtime_error("parameter library has no entry for word " + word) {}
};

/// Split each Pauli word across the partition and attach the compiled
/// SNAP-displacement chain unitaries from the library. Missing entries are
/// compiled on demand when `compile_on_miss` is set (and added to `lib`).
inline MappedHamiltonian partition_hamiltonian(const fermion::PauliSum& sum,
                                               const std::vector<int>& partition,
                                               compiler::ParamLibrary& lib,
                                               bool compile_on_miss = true,
                                               compiler::CompileHyper hyper = {}) {
  int total = 0;
  for (int p : partition) {
    if (p < 1 || p > 4)
      throw std::invalid_argument("partition_hamiltonian: blocks must have 1..4 qubits");
    total += p;
  }
  if (total != sum.n_qubits)
    throw std::invalid_argument("partition_hamiltonian: partition must cover all qubits");

  MappedHamiltonian mapped;
  mapped.method = compiler::CompileMethod::Snap;
  mapped.partition = partition;
  for (int p : partition) mapped.cutoffs.push_back(1 << p);

  for (const auto& term : sum.terms) {
    if (std::abs(term.coeff.imag()) > 1e-10)
      throw std::invalid_argument("partition_hamiltonian: complex coefficient");
    if (term.word.is_identity()) {
      mapped.constant += term.coeff.real();
      continue;
    }
    MappedTerm mt;
    mt.coefficient = term.coeff.real();
    int offset = 0;
    for (int p : partition) {
      const std::string sub = term.word.str().substr(size_t(offset), size_t(p));
      offset += p;
      mt.subwords.push_back(sub);
      const int cutoff = 1 << p;
      if (sub.find_first_not_of('I') == std::string::npos) {
        mt.snap_factors.push_back(fock::identity(cutoff));
        continue;
      }
      if (!lib.contains(sub)) {
        if (!compile_on_miss) throw LibraryMissError(sub);
        compiler::CompileHyper h = hyper;
        h.seed = compiler::mix_seed(hyper.seed, compiler::fnv1a64(sub));
        auto res = compiler::compile_target(compiler::word_target(sub),
                                            compiler::CompileMethod::Snap, h);
        res.seed = h.seed;
        lib.entries[sub] = std::move(res);
      }
      mt.snap_factors.push_back(compiler::snap_chain_unitary(lib.entries.at(sub).snap));
    }
    mapped.terms.push_back(std::move(mt));
  }
  return mapped;
}

/// Map a grouped Pauli sum through per-group ECD-LCU compilations
/// (single-qumode route; the cutoff is 2^{N_Q}).
inline MappedHamiltonian map_grouped_ecd(
    const fermion::GroupedPauliSum& grouped,
    const std::vector<compiler::CompileResult>& per_group) {
  if (per_group.size() != grouped.groups.size())
    throw std::invalid_argument("map_grouped_ecd: one compile result per group required");
  MappedHamiltonian mapped;
  mapped.method = compiler::CompileMethod::EcdLcu;
  mapped.constant = grouped.constant;
  mapped.partition = {grouped.n_qubits};
  mapped.cutoffs = {1 << grouped.n_qubits};
  for (size_t g = 0; g < grouped.groups.size(); ++g) {
    MappedTerm mt;
    mt.coefficient = grouped.groups[g].coefficient;
    const auto& lcu = per_group[g].lcu;
    for (size_t j = 0; j < lcu.chains.size(); ++j) {
      mt.lambdas.push_back(lcu.lambda[j]);
      const int l = lcu.chains[j].cutoff;
      mt.lcu_blocks.push_back(
          compiler::ecd_chain_unitary(lcu.chains[j]).topLeftCorner(l, l));
    }
    mapped.terms.push_back(std::move(mt));
  }
  return mapped;
}

// ---------------------------------------------------------------------------
// Energy assembly
// ---------------------------------------------------------------------------

struct TermValue {
  int term = 0;  // index into MappedHamiltonian::terms
  int j = 0;     // LCU unitary index (0 for the snap route)
  double value = 0.0;
};

struct AssembledEnergy {
  double energy = 0.0;
  std::vector<TermValue> term_values;
};

/// energy = constant + sum_mu g_mu sum_j lambda_{mu,j} M_{mu,j} (ecd route)
///        = constant + sum_mu g_mu Re<psi| (x)_k U_mu^(k) |psi>   (snap route)
inline AssembledEnergy assemble_energy(const StateVector& state, const MappedHamiltonian& mapped) {
  if (state.size() != mapped.dim())
    throw std::invalid_argument("assemble_energy: state/mapping dimension mismatch");
  AssembledEnergy out;
  out.energy = mapped.constant;
  for (size_t t = 0; t < mapped.terms.size(); ++t) {
    const auto& term = mapped.terms[t];
    if (mapped.method == compiler::CompileMethod::Snap) {
      ComplexMatrix factor = fock::identity(1);
      for (const auto& f : term.snap_factors) factor = fock::kron(factor, f);
      const double m = (state.adjoint() * (factor * state)).value().real();
      out.term_values.push_back({int(t), 0, m});
      out.energy += term.coefficient * m;
    } else {
      for (size_t j = 0; j < term.lambdas.size(); ++j) {
        const double m = (state.adjoint() * (term.lcu_blocks[j] * state)).value().real();
        out.term_values.push_back({int(t), int(j), m});
        out.energy += term.coefficient * term.lambdas[j] * m;
      }
    }
  }
  return out;
}

struct Constraint {
  ComplexMatrix op;            // effective matrix of the mapped symmetry operator
  double op_constant = 0.0;    // identity share of the mapped operator
  double target = 0.0;         // N, or S(S+1)
  double multiplier = 10.0;    // Lagrange weight (Hartree)
};

/// C = E + lambda [<op> - target]^2
inline double constrained_cost(const StateVector& state, const MappedHamiltonian& mapped,
                               const Constraint& constraint) {
  const double e = assemble_energy(state, mapped).energy;
  const double v = constraint.op_constant +
                   (state.adjoint() * (constraint.op * state)).value().real();
  const double dev = v - constraint.target;
  return e + constraint.multiplier * dev * dev;
}

// ---------------------------------------------------------------------------
// VQE outer loop
// ---------------------------------------------------------------------------

struct VqeHyper {
  int restarts = 5;
  int max_iterations = 4000;
  std::uint64_t seed = 1;
  std::optional<Constraint> constraint;
};

struct VqeResult {
  double energy = 0.0;
  Eigen::VectorXd params;
  std::vector<std::pair<int, double>> trace;  // (iteration, energy) of best restart
  std::vector<TermValue> term_values;
  int restarts_used = 0;
  bool converged = true;  // false when every restart ended on a failed line search
};

namespace detail {

/// Value and analytic gradient of E(params) = const + Re<psi|H|psi> plus the
/// optional quadratic constraint penalty, back-propagated through the stack.
inline double energy_and_gradient(const TrialAnsatz& ansatz, const Eigen::VectorXd& x,
                                  const ComplexMatrix& h_eff, double constant,
                                  const Constraint* constraint, Eigen::VectorXd& grad) {
  const LayerStack st = build_stack(ansatz, x);
  const ForwardResult f = forward(st);
  const StateVector& psi = f.trial;

  const StateVector h_psi = h_eff * psi;
  const double e_quad = (psi.adjoint() * h_psi).value().real();
  double value = constant + e_quad;

  // phi accumulates d(value)/d<psi| contributions of every quadratic form
  StateVector phi_small = h_psi + h_eff.adjoint() * psi;
  if (constraint) {
    const double v = constraint->op_constant +
                     (psi.adjoint() * (constraint->op * psi)).value().real();
    const double dev = v - constraint->target;
    value += constraint->multiplier * dev * dev;
    phi_small += (2.0 * constraint->multiplier * dev) *
                 (constraint->op * psi + constraint->op.adjoint() * psi);
  }

  // lift the projection/renormalization, if any
  const StateVector& full = f.states.back();
  StateVector phi;
  if (st.project_first_block) {
    const double n = f.projection_norm_sq;
    const double quad_total = (psi.adjoint() * phi_small).value().real();
    phi = StateVector::Zero(full.size());
    // d/d<Psi| of Re<u|A|u>/n with u = P0 Psi: (A + A^dag)u/n - <..>*2 P0 u/n
    phi.head(st.block) = phi_small / std::sqrt(n);
    phi.head(st.block) -= (quad_total / n) * full.head(st.block);
  } else {
    phi = phi_small;
  }

  grad.setZero(x.size());
  // backward sweep
  StateVector back = phi;
  int param_at = int(x.size());
  for (int k = int(st.layers.size()) - 1; k >= 0; --k) {
    const auto& dv = st.derivs[size_t(k)];
    param_at -= int(dv.size());
    for (size_t i = 0; i < dv.size(); ++i) {
      const StateVector dpsi = dv[i] * f.states[size_t(k)];
      grad(param_at + int(i)) = (dpsi.adjoint() * back).value().real();
    }
    back = st.layers[size_t(k)].adjoint() * back;
  }
  return value;
}

}  // namespace detail

/// Best-of-restarts quasi-Newton minimization of the assembled energy.
inline VqeResult run_vqe(const MappedHamiltonian& mapped, const TrialAnsatz& ansatz,
                         const VqeHyper& hyper) {
  if (ansatz.state_dim() != mapped.dim())
    throw std::invalid_argument("run_vqe: ansatz/mapping dimension mismatch");
  const ComplexMatrix h_eff = mapped.effective_matrix();
  const Constraint* constraint = hyper.constraint ? &*hyper.constraint : nullptr;

  VqeResult best;
  best.energy = std::numeric_limits<double>::infinity();
  bool any_converged = false;
  for (int r = 0; r < hyper.restarts; ++r) {
    optim::Rng rng(compiler::mix_seed(hyper.seed, std::uint64_t(r)));
    Eigen::VectorXd x0(ansatz.parameter_count());
    // identity start for phases, small random displacements
    x0.setZero();
    switch (ansatz.kind) {
      case AnsatzKind::SnapDisp:
      case AnsatzKind::MultimodeBsSnap: {
        // alpha (and beam-splitter beta) entries get small random values;
        // walk the layout to find them
        const TrialAnsatz& a = ansatz;
        int at = 0;
        for (int k = 0; k < a.depth; ++k) {
          for (int l : a.cutoffs) {
            x0(at) = rng.uniform(-0.2, 0.2);
            at += 1 + l;
          }
          if (a.kind == AnsatzKind::MultimodeBsSnap) {
            const int n = int(a.cutoffs.size());
            for (int pair = 0; pair < n * (n - 1) / 2; ++pair) {
              x0(at++) = rng.uniform(-0.2, 0.2);  // beta
              x0(at++) = rng.uniform(-M_PI, M_PI);  // phi
            }
          }
        }
        break;
      }
      case AnsatzKind::EcdRot:
      case AnsatzKind::DmsEcdTwoMode:
        for (int k = 0; k < ansatz.depth; ++k) {
          x0(4 * k) = rng.uniform(-0.2, 0.2);
          x0(4 * k + 1) = rng.uniform(-0.2, 0.2);
          x0(4 * k + 2) = rng.uniform(-M_PI, M_PI);
          x0(4 * k + 3) = rng.uniform(-M_PI, M_PI);
        }
        break;
      case AnsatzKind::DmsQutrit:
        x0(0) = rng.uniform(-0.5, 0.5);
        break;
    }

    std::vector<std::pair<int, double>> trace;
    optim::MinimizeOptions opts;
    opts.max_iterations = hyper.max_iterations;
    opts.gradient_tol = 1e-10;
    opts.on_iteration = [&trace](int it, double v) { trace.push_back({it, v}); };
    const auto res = optim::minimize_bfgs(
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
          return detail::energy_and_gradient(ansatz, x, h_eff, mapped.constant, constraint, g);
        },
        x0, opts);
    any_converged = any_converged || res.converged || res.iterations > 0;
    if (res.value < best.energy) {
      best.energy = res.value;
      best.params = res.x;
      best.trace = std::move(trace);
      best.restarts_used = r + 1;
    }
  }
  best.converged = any_converged;
  // reported energy and term values are recomputed from the returned params
  const StateVector psi = prepare_trial_state(ansatz, best.params);
  const AssembledEnergy ae = assemble_energy(psi, mapped);
  if (hyper.constraint) {
    best.energy = constrained_cost(psi, mapped, *hyper.constraint);
  } else {
    best.energy = ae.energy;
  }
  best.term_values = ae.term_values;
  return best;
}

// ---------------------------------------------------------------------------
// PES scan
// ---------------------------------------------------------------------------

struct MissingFixtureError : std::runtime_error {
  explicit MissingFixtureError(const std::string& path)
      : std::runtime_error("missing integral fixture: " + path) {}
};

struct PesRow {
  double r_angstrom = 0.0;
  double e_vqe = 0.0;
  double e_fci = 0.0;
  double abs_error = 0.0;
};

struct PesConfig {
  compiler::CompileMethod method = compiler::CompileMethod::Snap;
  AnsatzKind ansatz = AnsatzKind::SnapDisp;
  int depth = 4;
  std::vector<int> partition;  // empty: single block over all qubits
  VqeHyper hyper;
  compiler::CompileHyper compile_hyper;
  compiler::ParamLibrary* library = nullptr;  // snap route; owned by caller
  // per-group compile cache for the ecd route, keyed by group signature
  std::map<std::string, compiler::CompileResult> group_cache;
};

inline std::string group_signature(const fermion::PauliGroup& g) {
  std::string s;
  for (const auto& [sign, word] : g.members) {
    s += sign >= 0 ? '+' : '-';
    s += word.str();
  }
  return s;
}

inline ComplexMatrix group_target(const fermion::PauliGroup& g) {
  const Eigen::Index dim = Eigen::Index(1) << g.members.front().second.n_qubits();
  ComplexMatrix t = ComplexMatrix::Zero(dim, dim);
  for (const auto& [sign, word] : g.members) t += sign * fermion::pauli_word_matrix(word);
  return t;
}

/// Map one geometry's qubit Hamiltonian through the configured pipeline.
inline MappedHamiltonian map_for_config(const fermion::PauliSum& qubit_ham, PesConfig& cfg) {
  if (cfg.method == compiler::CompileMethod::Snap) {
    std::vector<int> partition = cfg.partition;
    if (partition.empty()) partition = {qubit_ham.n_qubits};
    if (!cfg.library) throw std::invalid_argument("snap pipeline requires a parameter library");
    return partition_hamiltonian(qubit_ham, partition, *cfg.library, true, cfg.compile_hyper);
  }
  const fermion::GroupedPauliSum grouped = fermion::group_pauli_sum(qubit_ham);
  std::vector<compiler::CompileResult> per_group;
  for (const auto& g : grouped.groups) {
    const std::string sig = group_signature(g);
    auto it = cfg.group_cache.find(sig);
    if (it == cfg.group_cache.end()) {
      compiler::CompileHyper h = cfg.compile_hyper;
      h.seed = compiler::mix_seed(cfg.compile_hyper.seed, compiler::fnv1a64(sig));
      auto res = compiler::compile_target(group_target(g), compiler::CompileMethod::EcdLcu, h);
      res.seed = h.seed;
      it = cfg.group_cache.emplace(sig, std::move(res)).first;
    }
    per_group.push_back(it->second);
  }
  return map_grouped_ecd(grouped, per_group);
}

inline std::vector<PesRow> pes_scan(
    const std::vector<std::pair<double, std::string>>& geometries, PesConfig& cfg) {
  std::vector<PesRow> rows;
  for (const auto& [r, path] : geometries) {
    std::ifstream probe(path);
    if (!probe) throw MissingFixtureError(path);
    probe.close();
    const auto ints = fermion::load_fcidump_file(path);
    const auto qubit_ham = fermion::jordan_wigner(fermion::build_molecular_hamiltonian(ints));
    const double e_fci =
        fermion::exact_ground_state(fermion::pauli_sum_to_matrix(qubit_ham)).energy;
    MappedHamiltonian mapped = map_for_config(qubit_ham, cfg);
    TrialAnsatz ansatz{cfg.ansatz, cfg.depth, {}};
    for (int l : mapped.cutoffs) ansatz.cutoffs.push_back(l);
    const VqeResult res = run_vqe(mapped, ansatz, cfg.hyper);
    rows.push_back({r, res.energy, e_fci, std::abs(res.energy - e_fci)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Subspace tomography
// ---------------------------------------------------------------------------

/// Reconstruct T = <psi| (|j><k| + h.c.) |psi> from the displaced, projected
/// density matrix and photon-counting probabilities, exactly as measured on
/// the truncated space. `alpha` is the (real) displacement applied to every
/// mode and `p` the photon-number projection indices.
inline double tomography_transfer_expectation(const StateVector& state,
                                              const std::vector<int>& cutoffs,
                                              const std::vector<int>& j,
                                              const std::vector<int>& k, double alpha,
                                              const std::vector<int>& p) {
  const size_t n_modes = cutoffs.size();
  if (j.size() != n_modes || k.size() != n_modes || p.size() != n_modes)
    throw std::invalid_argument("tomography: index vectors must match the mode count");
  Eigen::Index dim = 1;
  for (int l : cutoffs) dim *= l;
  if (state.size() != dim) throw std::invalid_argument("tomography: state dimension mismatch");

  auto flat = [&](const std::vector<int>& idx) {
    Eigen::Index at = 0;
    for (size_t m = 0; m < n_modes; ++m) {
      if (idx[m] < 0 || idx[m] >= cutoffs[m])
        throw std::invalid_argument("tomography: index outside the cutoff");
      at = at * cutoffs[m] + idx[m];
    }
    return at;
  };
  const Eigen::Index fj = flat(j), fk = flat(k), fp = flat(p);
  const Complex cj = state(fj), ck = state(fk);

  // displacement coefficients c^D_{n,p} = <p|D(alpha)|n>, real for real alpha
  ComplexMatrix disp_full = fock::identity(1);
  std::vector<ComplexMatrix> disp;
  for (int l : cutoffs) {
    disp.push_back(gates::displacement(Complex(alpha, 0.0), l));
    disp_full = fock::kron(disp_full, disp.back());
  }
  double coef_j = 1.0, coef_k = 1.0;
  for (size_t m = 0; m < n_modes; ++m) {
    coef_j *= disp[m](p[m], j[m]).real();
    coef_k *= disp[m](p[m], k[m]).real();
  }
  if (std::abs(coef_j) < 1e-8 || std::abs(coef_k) < 1e-8)
    throw std::domain_error("tomography: vanishing displacement coefficient; "
                            "reconstruction is ill-conditioned");

  if (fj == fk) {
    // diagonal case: photon counting in the displaced frame
    const StateVector u = cj * StateVector::Unit(dim, fj);
    const StateVector w = disp_full * u;
    const double r2 = std::norm(w(fp));
    return r2 / (coef_j * coef_j) + std::norm(cj);
  }

  // subspace density matrix as a rank<=2 vector pair
  StateVector u = StateVector::Zero(dim);
  u(fj) = cj;
  u(fk) = ck;
  const StateVector w = disp_full * u;
  const double r2 = std::norm(w(fp));  // <p| D rho D^dag |p>
  return (r2 - coef_j * coef_j * std::norm(cj) - coef_k * coef_k * std::norm(ck)) /
         (coef_j * coef_k);
}

}  // namespace bosonq::vqe
