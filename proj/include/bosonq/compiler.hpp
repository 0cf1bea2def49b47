#pragma once

#include <atomic>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fermion.hpp"
#include "fock.hpp"
#include "gates.hpp"
#include "optim.hpp"

// Gate synthesis: optimize ECD-rotation chains (combined linearly) and
// SNAP-displacement chains to approximate target multi-qubit operators, and
// persist the compiled parameters as a reusable library. Gradients of both
// losses are computed analytically by differentiating through the chain, so
// the optimizer sees exact derivatives of the truncated-space matrices.

namespace bosonq::compiler {

// ---------------------------------------------------------------------------
// Chain types
// ---------------------------------------------------------------------------

struct EcdChain {
  int depth = 0;
  int cutoff = 0;
  std::vector<Complex> beta;
  std::vector<double> theta;
  std::vector<double> phi;
};

struct LcuDecomposition {
  std::vector<double> lambda;
  std::vector<EcdChain> chains;  // all share depth and cutoff
};

struct SnapChain {
  int depth = 0;
  int cutoff = 0;
  std::vector<double> alpha;                // real displacement amplitudes
  std::vector<std::vector<double>> theta;   // depth rows of length cutoff
};

inline ComplexMatrix ecd_chain_unitary(const EcdChain& c) {
  ComplexMatrix u = fock::identity(2 * c.cutoff);
  for (int k = 0; k < c.depth; ++k)
    u = gates::ecd_rotation(c.beta[size_t(k)], c.theta[size_t(k)], c.phi[size_t(k)],
                            c.cutoff) *
        u;
  return u;
}

inline ComplexMatrix lcu_matrix(const LcuDecomposition& d) {
  if (d.chains.empty()) throw std::invalid_argument("lcu_matrix: empty decomposition");
  ComplexMatrix v = ComplexMatrix::Zero(2 * d.chains[0].cutoff, 2 * d.chains[0].cutoff);
  for (size_t j = 0; j < d.chains.size(); ++j)
    v += d.lambda[j] * ecd_chain_unitary(d.chains[j]);
  return v;
}

inline ComplexMatrix snap_chain_unitary(const SnapChain& c) {
  ComplexMatrix u = fock::identity(c.cutoff);
  for (int k = 0; k < c.depth; ++k)
    u = gates::snap(c.theta[size_t(k)], c.cutoff) *
        gates::displacement(c.alpha[size_t(k)], c.cutoff) * u;
  return u;
}

// ---------------------------------------------------------------------------
// Losses. The ECD-LCU cost scores only the ancilla-|0> block against the
// target; the SNAP cost scores the full truncated block.
// ---------------------------------------------------------------------------

inline double loss_ecd(const LcuDecomposition& d, const ComplexMatrix& target) {
  const int l = d.chains.empty() ? 0 : d.chains[0].cutoff;
  if (target.rows() != l || target.cols() != l)
    throw std::invalid_argument("loss_ecd: target dimension must equal the cutoff");
  const ComplexMatrix v = lcu_matrix(d);
  return (v.topLeftCorner(l, l) - target).squaredNorm() / double(l) / double(l);
}

inline double loss_snap(const SnapChain& c, const ComplexMatrix& target) {
  if (target.rows() != c.cutoff || target.cols() != c.cutoff)
    throw std::invalid_argument("loss_snap: target dimension must equal the cutoff");
  const ComplexMatrix u = snap_chain_unitary(c);
  return (u - target).squaredNorm() / double(c.cutoff) / double(c.cutoff);
}

// ---------------------------------------------------------------------------
// Cached eigensystem of the displacement generator: with H0 = -i(b^dag - b),
// D(r e^{i phi}) = P(phi) V e^{i r Lambda} V^dag P(phi)^dag where P is the
// number-operator phase diag(e^{i phi n}).
// ---------------------------------------------------------------------------

namespace detail {

struct DispEigen {
  ComplexMatrix v;        // eigenvectors of H0
  Eigen::VectorXd lam;    // eigenvalues of H0
  ComplexMatrix gen;      // b^dag - b
};

inline const DispEigen& disp_eigen(int cutoff) {
  static std::map<int, DispEigen> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(cutoff);
  if (it == cache.end()) {
    DispEigen de;
    de.gen = fock::boson_create(cutoff) - fock::boson_annihilate(cutoff);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(Complex(0.0, -1.0) * de.gen);
    de.v = es.eigenvectors();
    de.lam = es.eigenvalues();
    it = cache.emplace(cutoff, std::move(de)).first;
  }
  return it->second;
}

/// exp(i mu) divided-difference matrix for the Daleckii-Krein derivative,
/// in the cancellation-free form i e^{i(a+b)/2} sinc((a-b)/2).
inline ComplexMatrix phase_divided_difference(const Eigen::VectorXd& mu) {
  const Eigen::Index n = mu.size();
  ComplexMatrix phi(n, n);
  const Complex i(0.0, 1.0);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      const double half = 0.5 * (mu(a) - mu(b));
      const double sinc = std::abs(half) < 1e-8 ? 1.0 - half * half / 6.0
                                                : std::sin(half) / half;
      phi(a, b) = i * std::exp(i * (0.5 * (mu(a) + mu(b)))) * sinc;
    }
  return phi;
}

/// One ECD-rotation layer together with its four parameter derivatives
/// (d/d Re(beta), d/d Im(beta), d/d theta, d/d phi).
struct EcdLayer {
  ComplexMatrix mat;                 // 2L x 2L
  std::array<ComplexMatrix, 4> grad; // 2L x 2L each
};

inline EcdLayer ecd_layer_with_grad(Complex beta, double theta, double phi, int l,
                                    bool with_grad = true) {
  const DispEigen& de = disp_eigen(l);
  const Complex i(0.0, 1.0);
  const double r = 0.5 * std::abs(beta);
  const double ang = (r == 0.0) ? 0.0 : std::arg(beta);

  StateVector phase(l);
  for (int n = 0; n < l; ++n) phase(n) = std::exp(i * (ang * n));
  const ComplexMatrix vt = phase.asDiagonal() * de.v;  // eigenvectors of H(beta/2)
  const Eigen::VectorXd mu = r * de.lam;

  StateVector ep(l), em(l);
  for (int n = 0; n < l; ++n) {
    ep(n) = std::exp(i * mu(n));
    em(n) = std::conj(ep(n));
  }
  const ComplexMatrix dp = vt * ep.asDiagonal() * vt.adjoint();  // D(beta/2)
  const ComplexMatrix dm = vt * em.asDiagonal() * vt.adjoint();  // D(-beta/2)

  const ComplexMatrix rot = gates::rotation(theta, phi);
  auto assemble = [l](const ComplexMatrix& dpp, const ComplexMatrix& dmm,
                      const ComplexMatrix& rr) {
    ComplexMatrix out(2 * l, 2 * l);
    out.topLeftCorner(l, l) = rr(1, 0) * dmm;
    out.topRightCorner(l, l) = rr(1, 1) * dmm;
    out.bottomLeftCorner(l, l) = rr(0, 0) * dpp;
    out.bottomRightCorner(l, l) = rr(0, 1) * dpp;
    return out;
  };

  EcdLayer layer;
  layer.mat = assemble(dp, dm, rot);
  if (!with_grad) return layer;

  // dH/d Re(beta) = -i ((1/2) b^dag - (1/2) b); dH/d Im(beta) = -i (i/2 b^dag + i/2 b)
  const ComplexMatrix bdag = fock::boson_create(l);
  const ComplexMatrix bann = fock::boson_annihilate(l);
  const std::array<ComplexMatrix, 2> dh = {
      -i * 0.5 * (bdag - bann),
      -i * (i * 0.5 * bdag + i * 0.5 * bann),
  };
  const ComplexMatrix phi_p = phase_divided_difference(mu);
  const ComplexMatrix phi_m = phase_divided_difference((-mu).eval());

  const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
  const Complex expm = std::exp(-i * phi), expp = std::exp(i * phi);
  ComplexMatrix drot_dtheta(2, 2), drot_dphi(2, 2);
  drot_dtheta << -0.5 * s, -0.5 * i * expm * c, -0.5 * i * expp * c, -0.5 * s;
  drot_dphi << 0.0, -expm * s, expp * s, 0.0;

  for (int dir = 0; dir < 2; ++dir) {
    const ComplexMatrix wp = vt.adjoint() * dh[size_t(dir)] * vt;
    const ComplexMatrix ddp = vt * phi_p.cwiseProduct(wp) * vt.adjoint();
    const ComplexMatrix ddm = vt * phi_m.cwiseProduct((-wp).eval()) * vt.adjoint();
    layer.grad[size_t(dir)] = assemble(ddp, ddm, rot);
  }
  layer.grad[2] = assemble(dp, dm, drot_dtheta);
  layer.grad[3] = assemble(dp, dm, drot_dphi);
  return layer;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parameter packing
// ---------------------------------------------------------------------------

inline Eigen::VectorXd pack_snap(const SnapChain& c) {
  Eigen::VectorXd x(c.depth * (1 + c.cutoff));
  for (int k = 0; k < c.depth; ++k) x(k) = c.alpha[size_t(k)];
  int at = c.depth;
  for (int k = 0; k < c.depth; ++k)
    for (int n = 0; n < c.cutoff; ++n) x(at++) = c.theta[size_t(k)][size_t(n)];
  return x;
}

inline SnapChain unpack_snap(const Eigen::VectorXd& x, int depth, int cutoff) {
  SnapChain c;
  c.depth = depth;
  c.cutoff = cutoff;
  c.alpha.assign(size_t(depth), 0.0);
  c.theta.assign(size_t(depth), std::vector<double>(size_t(cutoff), 0.0));
  for (int k = 0; k < depth; ++k) c.alpha[size_t(k)] = x(k);
  int at = depth;
  for (int k = 0; k < depth; ++k)
    for (int n = 0; n < cutoff; ++n) c.theta[size_t(k)][size_t(n)] = x(at++);
  return c;
}

inline Eigen::VectorXd pack_lcu(const LcuDecomposition& d) {
  const int nt = int(d.chains.size());
  const int nd = d.chains.empty() ? 0 : d.chains[0].depth;
  Eigen::VectorXd x(nt + nt * nd * 4);
  for (int j = 0; j < nt; ++j) x(j) = d.lambda[size_t(j)];
  int at = nt;
  for (int j = 0; j < nt; ++j) {
    const EcdChain& ch = d.chains[size_t(j)];
    for (int k = 0; k < nd; ++k) {
      x(at++) = ch.beta[size_t(k)].real();
      x(at++) = ch.beta[size_t(k)].imag();
      x(at++) = ch.theta[size_t(k)];
      x(at++) = ch.phi[size_t(k)];
    }
  }
  return x;
}

inline LcuDecomposition unpack_lcu(const Eigen::VectorXd& x, int n_terms, int depth,
                                   int cutoff) {
  LcuDecomposition d;
  d.lambda.assign(size_t(n_terms), 0.0);
  d.chains.assign(size_t(n_terms), EcdChain{depth, cutoff, {}, {}, {}});
  for (int j = 0; j < n_terms; ++j) d.lambda[size_t(j)] = x(j);
  int at = n_terms;
  for (int j = 0; j < n_terms; ++j) {
    EcdChain& ch = d.chains[size_t(j)];
    ch.beta.assign(size_t(depth), Complex(0, 0));
    ch.theta.assign(size_t(depth), 0.0);
    ch.phi.assign(size_t(depth), 0.0);
    for (int k = 0; k < depth; ++k) {
      const double br = x(at++), bi = x(at++);
      ch.beta[size_t(k)] = Complex(br, bi);
      ch.theta[size_t(k)] = x(at++);
      ch.phi[size_t(k)] = x(at++);
    }
  }
  return d;
}

/// Optimal LCU weights for fixed chains: the loss is quadratic in lambda, so
/// the minimizing real weights solve the normal equations
/// Re tr(B_j^dag B_k) lambda_k = Re tr(B_j^dag T).
inline Eigen::VectorXd solve_lcu_weights(const std::vector<ComplexMatrix>& blocks,
                                         const ComplexMatrix& target) {
  const int nt = int(blocks.size());
  Eigen::MatrixXd gram(nt, nt);
  Eigen::VectorXd rhs(nt);
  for (int j = 0; j < nt; ++j) {
    rhs(j) = blocks[size_t(j)].conjugate().cwiseProduct(target).sum().real();
    for (int k = j; k < nt; ++k) {
      gram(j, k) = gram(k, j) =
          blocks[size_t(j)].conjugate().cwiseProduct(blocks[size_t(k)]).sum().real();
    }
  }
  gram.diagonal().array() += 1e-13 * std::max(1.0, gram.diagonal().maxCoeff());
  return gram.ldlt().solve(rhs);
}

// ---------------------------------------------------------------------------
// Least-squares residuals for the compile losses. Residuals are the scaled
// real and imaginary parts of (block - target)/L stacked, so the squared
// residual norm equals the loss exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_entries(const ComplexMatrix& m, double scale, Eigen::VectorXd& out,
                          Eigen::Index offset) {
  const Eigen::Index l2 = m.size();
  Eigen::Index at = 0;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r, ++at) {
      out(offset + at) = scale * m(r, c).real();
      out(offset + at + l2) = scale * m(r, c).imag();
    }
}

inline void write_jac_col(const ComplexMatrix& m, double scale, Eigen::MatrixXd& jac,
                          int col) {
  const Eigen::Index l2 = m.size();
  Eigen::Index at = 0;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r, ++at) {
      jac(at, col) = scale * m(r, c).real();
      jac(at + l2, col) = scale * m(r, c).imag();
    }
}

}  // namespace detail

/// Residual (and Jacobian) of the SNAP loss in pack_snap layout.
inline void snap_residual(const SnapChain& c, const ComplexMatrix& target,
                          Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
  const int l = c.cutoff, nd = c.depth;
  const auto& de = detail::disp_eigen(l);
  const Complex i(0.0, 1.0);
  const double scale = 1.0 / double(l);

  std::vector<ComplexMatrix> disp(static_cast<size_t>(nd));
  std::vector<ComplexMatrix> layer(static_cast<size_t>(nd));
  std::vector<ComplexMatrix> prefix(static_cast<size_t>(nd) + 1);
  prefix[0] = fock::identity(l);
  for (int k = 0; k < nd; ++k) {
    StateVector e(l);
    for (int n = 0; n < l; ++n) e(n) = std::exp(i * (c.alpha[size_t(k)] * de.lam(n)));
    disp[size_t(k)] = de.v * e.asDiagonal() * de.v.adjoint();
    StateVector s(l);
    for (int n = 0; n < l; ++n) s(n) = std::exp(i * c.theta[size_t(k)][size_t(n)]);
    layer[size_t(k)] = s.asDiagonal() * disp[size_t(k)];
    prefix[size_t(k) + 1] = layer[size_t(k)] * prefix[size_t(k)];
  }
  r.resize(2 * l * l);
  detail::write_entries(prefix[size_t(nd)] - target, scale, r, 0);
  if (!jac) return;

  jac->setZero(2 * l * l, nd * (1 + l));
  ComplexMatrix suffix = fock::identity(l);
  for (int k = nd - 1; k >= 0; --k) {
    // alpha column: suffix * (S (b^dag - b) D) * prefix
    StateVector s(l);
    for (int n = 0; n < l; ++n) s(n) = std::exp(i * c.theta[size_t(k)][size_t(n)]);
    const ComplexMatrix dalpha =
        suffix * (s.asDiagonal() * (de.gen * disp[size_t(k)])) * prefix[size_t(k)];
    detail::write_jac_col(dalpha, scale, *jac, k);
    // theta columns: i * outer(suffix col n, row n of layer*prefix)
    const ComplexMatrix w = prefix[size_t(k) + 1];
    for (int n = 0; n < l; ++n) {
      const ComplexMatrix dn = i * (suffix.col(n) * w.row(n));
      detail::write_jac_col(dn, scale, *jac, nd + k * l + n);
    }
    suffix = suffix * layer[size_t(k)];
  }
}

/// Residual (and Jacobian) of the ECD-LCU loss in pack_lcu layout.
inline void lcu_residual(const LcuDecomposition& d, const ComplexMatrix& target,
                         Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
  const int nt = int(d.chains.size());
  const int nd = d.chains[0].depth;
  const int l = d.chains[0].cutoff;
  const double scale = 1.0 / double(l);

  std::vector<std::vector<detail::EcdLayer>> layers(static_cast<size_t>(nt));
  std::vector<std::vector<ComplexMatrix>> prefix(static_cast<size_t>(nt));
  ComplexMatrix vblock = ComplexMatrix::Zero(l, l);
  for (int j = 0; j < nt; ++j) {
    const EcdChain& ch = d.chains[size_t(j)];
    layers[size_t(j)].reserve(size_t(nd));
    prefix[size_t(j)].assign(size_t(nd) + 1, ComplexMatrix());
    prefix[size_t(j)][0] = fock::identity(2 * l);
    for (int k = 0; k < nd; ++k) {
      layers[size_t(j)].push_back(detail::ecd_layer_with_grad(
          ch.beta[size_t(k)], ch.theta[size_t(k)], ch.phi[size_t(k)], l, jac != nullptr));
      prefix[size_t(j)][size_t(k) + 1] =
          layers[size_t(j)][size_t(k)].mat * prefix[size_t(j)][size_t(k)];
    }
    vblock += d.lambda[size_t(j)] * prefix[size_t(j)][size_t(nd)].topLeftCorner(l, l);
  }
  r.resize(2 * l * l);
  detail::write_entries(vblock - target, scale, r, 0);
  if (!jac) return;

  jac->setZero(2 * l * l, nt + nt * nd * 4);
  for (int j = 0; j < nt; ++j) {
    detail::write_jac_col(prefix[size_t(j)][size_t(nd)].topLeftCorner(l, l), scale, *jac, j);
    // top L rows of the suffix product above each layer
    ComplexMatrix top = ComplexMatrix::Zero(l, 2 * l);
    top.leftCols(l).setIdentity();
    for (int k = nd - 1; k >= 0; --k) {
      const int base = nt + (j * nd + k) * 4;
      for (int p = 0; p < 4; ++p) {
        const ComplexMatrix col =
            d.lambda[size_t(j)] * (top * layers[size_t(j)][size_t(k)].grad[size_t(p)] *
                                   prefix[size_t(j)][size_t(k)].leftCols(l));
        detail::write_jac_col(col, scale, *jac, base + p);
      }
      top = top * layers[size_t(j)][size_t(k)].mat;
    }
  }
}

// ---------------------------------------------------------------------------
// compile_target
// ---------------------------------------------------------------------------

enum class CompileMethod { EcdLcu, Snap };

inline std::string method_name(CompileMethod m) {
  return m == CompileMethod::EcdLcu ? "ecd_lcu" : "snap";
}

inline CompileMethod method_from_name(const std::string& s) {
  if (s == "ecd_lcu") return CompileMethod::EcdLcu;
  if (s == "snap") return CompileMethod::Snap;
  throw std::invalid_argument("unknown compile method '" + s + "'");
}

struct CompileHyper {
  int depth = 16;               // N_d
  int n_terms = 15;             // N_t, ECD-LCU only
  int restarts = 10;
  int max_iterations = 600;     // Levenberg-Marquardt steps per restart
  std::uint64_t seed = 1;
  double threshold = 1e-8;      // convergence gate
  double stop_loss = 1e-13;     // optimizer target
  double quality_stop = 3e-12;  // stop restarting once reached
};

struct CompileResult {
  CompileMethod method = CompileMethod::Snap;
  SnapChain snap;
  LcuDecomposition lcu;
  double final_loss = 0.0;
  int iterations = 0;
  int restarts_used = 0;
  std::uint64_t seed = 0;
  bool converged = false;  // final_loss <= threshold

  ComplexMatrix block_matrix() const {
    if (method == CompileMethod::Snap) return snap_chain_unitary(snap);
    const int l = lcu.chains[0].cutoff;
    return lcu_matrix(lcu).topLeftCorner(l, l);
  }
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline CompileResult compile_target(const ComplexMatrix& target, CompileMethod method,
                                    const CompileHyper& hyper) {
  const int l = int(target.rows());
  if (target.rows() != target.cols())
    throw std::invalid_argument("compile_target: target must be square");
  if (l < 2 || l > 16 || (l & (l - 1)) != 0)
    throw std::invalid_argument("compile_target: dimension must be a power of two <= 16");

  CompileResult best;
  best.method = method;
  best.seed = hyper.seed;
  best.final_loss = std::numeric_limits<double>::infinity();

  // identity shortcut: an all-zero SNAP chain (or an even-depth all-zero ECD
  // chain, whose qubit flips cancel pairwise) already has zero loss
  const bool is_identity =
      (target - ComplexMatrix::Identity(l, l)).cwiseAbs().maxCoeff() == 0.0;
  if (is_identity && (method == CompileMethod::Snap || hyper.depth % 2 == 0)) {
    if (method == CompileMethod::Snap) {
      best.snap = unpack_snap(Eigen::VectorXd::Zero(hyper.depth * (1 + l)), hyper.depth, l);
      best.final_loss = loss_snap(best.snap, target);
    } else {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(hyper.n_terms + hyper.n_terms * hyper.depth * 4);
      x(0) = 1.0;
      best.lcu = unpack_lcu(x, hyper.n_terms, hyper.depth, l);
      best.final_loss = loss_ecd(best.lcu, target);
    }
    best.converged = best.final_loss <= hyper.threshold;
    return best;
  }

  for (int r = 0; r < hyper.restarts; ++r) {
    optim::Rng rng(mix_seed(hyper.seed, std::uint64_t(r)));
    Eigen::VectorXd x0;
    optim::ResidualFunction residual;
    if (method == CompileMethod::Snap) {
      x0.resize(hyper.depth * (1 + l));
      for (int k = 0; k < hyper.depth; ++k) x0(k) = rng.uniform(-0.2, 0.2);
      for (int k = hyper.depth; k < x0.size(); ++k) x0(k) = rng.uniform(-M_PI, M_PI);
      residual = [&, l](const Eigen::VectorXd& x, Eigen::VectorXd& rv, Eigen::MatrixXd* jac) {
        snap_residual(unpack_snap(x, hyper.depth, l), target, rv, jac);
      };
    } else {
      x0.resize(hyper.n_terms + hyper.n_terms * hyper.depth * 4);
      int at = hyper.n_terms;
      for (int j = 0; j < hyper.n_terms; ++j)
        for (int k = 0; k < hyper.depth; ++k) {
          x0(at++) = rng.uniform(-0.2, 0.2);  // Re beta
          x0(at++) = rng.uniform(-0.2, 0.2);  // Im beta
          x0(at++) = rng.uniform(-M_PI, M_PI);
          x0(at++) = rng.uniform(-M_PI, M_PI);
        }
      // warm-start the linear weights at their least-squares optimum
      {
        x0.head(hyper.n_terms).setZero();
        const LcuDecomposition d0 = unpack_lcu(x0, hyper.n_terms, hyper.depth, l);
        std::vector<ComplexMatrix> blocks;
        for (const auto& ch : d0.chains)
          blocks.push_back(ecd_chain_unitary(ch).topLeftCorner(l, l));
        x0.head(hyper.n_terms) = solve_lcu_weights(blocks, target);
      }
      residual = [&, l](const Eigen::VectorXd& x, Eigen::VectorXd& rv, Eigen::MatrixXd* jac) {
        lcu_residual(unpack_lcu(x, hyper.n_terms, hyper.depth, l), target, rv, jac);
      };
    }

    optim::LmOptions opts;
    opts.max_iterations = hyper.max_iterations;
    opts.value_target = hyper.stop_loss;
    const optim::LmResult res = optim::minimize_levenberg_marquardt(residual, x0, opts);

    // the reported loss is always recomputed from the returned parameters
    double true_loss;
    SnapChain sc;
    LcuDecomposition lc;
    if (method == CompileMethod::Snap) {
      sc = unpack_snap(res.x, hyper.depth, l);
      true_loss = loss_snap(sc, target);
    } else {
      lc = unpack_lcu(res.x, hyper.n_terms, hyper.depth, l);
      true_loss = loss_ecd(lc, target);
    }
    if (true_loss < best.final_loss) {
      best.final_loss = true_loss;
      best.iterations = res.iterations;
      best.snap = sc;
      best.lcu = lc;
      best.restarts_used = r + 1;
    }
    if (best.final_loss <= hyper.quality_stop) break;
  }
  best.converged = best.final_loss <= hyper.threshold;
  return best;
}

/// Zero-parameter chain representing the identity word.
inline CompileResult identity_compile_result(CompileMethod method, int depth, int cutoff,
                                             int n_terms = 1) {
  CompileResult r;
  r.method = method;
  if (method == CompileMethod::Snap) {
    r.snap = unpack_snap(Eigen::VectorXd::Zero(depth * (1 + cutoff)), depth, cutoff);
  } else {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_terms + n_terms * depth * 4);
    x(0) = 1.0;
    r.lcu = unpack_lcu(x, n_terms, depth, cutoff);
  }
  r.converged = true;
  return r;
}

// ---------------------------------------------------------------------------
// Pauli parameter library
// ---------------------------------------------------------------------------

struct ParamLibrary {
  CompileMethod method = CompileMethod::Snap;
  int depth = 16;
  int n_terms = 0;                     // ECD-LCU only
  double threshold = 1e-8;
  std::string endianness = "qubit0_msb";
  int version = 1;
  std::map<std::string, CompileResult> entries;  // keyed by Pauli word string

  bool contains(const std::string& word) const { return entries.count(word) != 0; }
};

/// Deterministic digest over entry parameters, for load-time validation.
inline std::uint64_t library_checksum(const ParamLibrary& lib) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  auto mixd = [&](double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    mix(bits);
  };
  for (const auto& [word, res] : lib.entries) {
    mix(fnv1a64(word));
    mixd(res.final_loss);
    if (res.method == CompileMethod::Snap) {
      for (double a : res.snap.alpha) mixd(a);
      for (const auto& row : res.snap.theta)
        for (double t : row) mixd(t);
    } else {
      for (double v : res.lcu.lambda) mixd(v);
      for (const auto& ch : res.lcu.chains) {
        for (Complex b : ch.beta) {
          mixd(b.real());
          mixd(b.imag());
        }
        for (double t : ch.theta) mixd(t);
        for (double p : ch.phi) mixd(p);
      }
    }
  }
  return h;
}

inline nlohmann::json compile_result_to_json(const CompileResult& r) {
  nlohmann::json params;
  if (r.method == CompileMethod::Snap) {
    params["alpha"] = r.snap.alpha;
    params["theta"] = r.snap.theta;
  } else {
    params["lambda"] = r.lcu.lambda;
    nlohmann::json chains = nlohmann::json::array();
    for (const auto& ch : r.lcu.chains) {
      nlohmann::json jb = nlohmann::json::array();
      for (Complex b : ch.beta) jb.push_back({b.real(), b.imag()});
      chains.push_back({{"beta", jb}, {"theta", ch.theta}, {"phi", ch.phi}});
    }
    params["chains"] = chains;
  }
  return nlohmann::json{{"loss", r.final_loss},
                        {"seed", r.seed},
                        {"iterations", r.iterations},
                        {"restarts_used", r.restarts_used},
                        {"converged", r.converged},
                        {"params", params}};
}

inline CompileResult compile_result_from_json(const nlohmann::json& j, CompileMethod method,
                                              int depth, int cutoff) {
  CompileResult r;
  r.method = method;
  r.final_loss = j.at("loss").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.iterations = j.value("iterations", 0);
  r.restarts_used = j.value("restarts_used", 0);
  r.converged = j.value("converged", true);
  const auto& params = j.at("params");
  if (method == CompileMethod::Snap) {
    r.snap.depth = depth;
    r.snap.cutoff = cutoff;
    r.snap.alpha = params.at("alpha").get<std::vector<double>>();
    r.snap.theta = params.at("theta").get<std::vector<std::vector<double>>>();
  } else {
    r.lcu.lambda = params.at("lambda").get<std::vector<double>>();
    for (const auto& jc : params.at("chains")) {
      EcdChain ch;
      ch.depth = depth;
      ch.cutoff = cutoff;
      for (const auto& b : jc.at("beta"))
        ch.beta.push_back(Complex(b.at(0).get<double>(), b.at(1).get<double>()));
      ch.theta = jc.at("theta").get<std::vector<double>>();
      ch.phi = jc.at("phi").get<std::vector<double>>();
      r.lcu.chains.push_back(std::move(ch));
    }
  }
  return r;
}

inline nlohmann::json library_to_json(const ParamLibrary& lib) {
  nlohmann::json entries;
  size_t max_len = 0;
  for (const auto& [word, res] : lib.entries) {
    entries[word] = compile_result_to_json(res);
    max_len = std::max(max_len, word.size());
  }
  nlohmann::json meta{{"method", method_name(lib.method)},
                      {"N_d", lib.depth},
                      {"L", 1 << max_len},
                      {"endianness", lib.endianness},
                      {"threshold", lib.threshold},
                      {"version", lib.version},
                      {"checksum", library_checksum(lib)}};
  if (lib.method == CompileMethod::EcdLcu) meta["N_t"] = lib.n_terms;
  return nlohmann::json{{"metadata", meta}, {"entries", entries}};
}

inline void save_library(const ParamLibrary& lib, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write library file: " + path);
  f << library_to_json(lib).dump(1) << "\n";
}

/// Target matrix for a library word at its native cutoff 2^len.
inline ComplexMatrix word_target(const std::string& word) {
  return fermion::pauli_word_matrix(fermion::PauliWord(word));
}

/// Load and validate: checksum plus loss recomputation on a deterministic
/// sample of entries.
inline ParamLibrary load_library(const std::string& path, int verify_samples = 8) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open library file: " + path);
  nlohmann::json j;
  f >> j;
  ParamLibrary lib;
  const auto& meta = j.at("metadata");
  lib.method = method_from_name(meta.at("method").get<std::string>());
  lib.depth = meta.at("N_d").get<int>();
  lib.n_terms = meta.value("N_t", 0);
  lib.threshold = meta.at("threshold").get<double>();
  lib.endianness = meta.at("endianness").get<std::string>();
  lib.version = meta.at("version").get<int>();
  if (lib.endianness != "qubit0_msb")
    throw std::runtime_error("library endianness mismatch: " + lib.endianness);
  for (const auto& [word, entry] : j.at("entries").items()) {
    const int cutoff = 1 << word.size();
    lib.entries[word] = compile_result_from_json(entry, lib.method, lib.depth, cutoff);
  }
  const std::uint64_t expect = meta.at("checksum").get<std::uint64_t>();
  if (library_checksum(lib) != expect)
    throw std::runtime_error("library checksum mismatch");
  // spot-check stored losses by recomputation
  int step = std::max(1, int(lib.entries.size()) / std::max(1, verify_samples));
  int idx = 0;
  for (const auto& [word, res] : lib.entries) {
    if (idx++ % step != 0) continue;
    const ComplexMatrix target = word_target(word);
    const double recomputed = res.method == CompileMethod::Snap
                                  ? loss_snap(res.snap, target)
                                  : loss_ecd(res.lcu, target);
    if (std::abs(recomputed - res.final_loss) > 1e-14)
      throw std::runtime_error("library loss mismatch for word " + word);
  }
  return lib;
}

/// All non-identity Pauli words of the given length.
inline std::vector<std::string> all_pauli_words(int n_qubits) {
  std::vector<std::string> words;
  const std::string letters = "IXYZ";
  const long total = long(std::pow(4.0, n_qubits));
  for (long v = 0; v < total; ++v) {
    long rem = v;
    std::string w(size_t(n_qubits), 'I');
    for (int q = n_qubits - 1; q >= 0; --q) {
      w[size_t(q)] = letters[size_t(rem % 4)];
      rem /= 4;
    }
    if (w.find_first_not_of('I') == std::string::npos) continue;
    words.push_back(w);
  }
  return words;
}

/// Compile every non-trivial Pauli word of 1..max_qubits qubits at its
/// native cutoff. Words are distributed over `threads` workers with
/// per-word seeds, so the result is independent of scheduling.
inline ParamLibrary build_pauli_library(int max_qubits = 4,
                                        CompileMethod method = CompileMethod::Snap,
                                        CompileHyper hyper = {}, int threads = 1,
                                        bool lower_arity = true) {
  ParamLibrary lib;
  lib.method = method;
  lib.depth = hyper.depth;
  lib.n_terms = method == CompileMethod::EcdLcu ? hyper.n_terms : 0;
  lib.threshold = hyper.threshold;

  std::vector<std::string> words;
  for (int n = lower_arity ? 1 : max_qubits; n <= max_qubits; ++n) {
    auto w = all_pauli_words(n);
    words.insert(words.end(), w.begin(), w.end());
  }

  std::mutex collect;
  std::atomic<size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = cursor.fetch_add(1);
      if (i >= words.size()) return;
      const std::string& word = words[i];
      CompileHyper h = hyper;
      h.seed = mix_seed(hyper.seed, fnv1a64(word));
      CompileResult res = compile_target(word_target(word), method, h);
      res.seed = h.seed;
      std::lock_guard<std::mutex> lock(collect);
      lib.entries[word] = std::move(res);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return lib;
}

}  // namespace bosonq::compiler
