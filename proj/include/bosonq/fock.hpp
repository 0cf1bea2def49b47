#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

// Dense complex linear algebra over truncated Fock / qubit spaces. All
// operators are built directly in the L-dimensional truncated basis and
// exponentiated there; unitarity at the cutoff boundary is approximate for
// large displacement amplitudes, which is the caller's responsibility.

namespace bosonq {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

namespace fock {

inline constexpr double kUnitaryTol = 1e-10;
inline constexpr double kEqualityTol = 1e-12;

inline ComplexMatrix identity(Eigen::Index dim) {
  return ComplexMatrix::Identity(dim, dim);
}

/// Bosonic annihilation operator on the truncated basis: <n-1|a|n> = sqrt(n).
inline ComplexMatrix boson_annihilate(int cutoff) {
  if (cutoff < 1) throw std::invalid_argument("boson_annihilate: cutoff must be >= 1");
  ComplexMatrix a = ComplexMatrix::Zero(cutoff, cutoff);
  for (int n = 1; n < cutoff; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}

inline ComplexMatrix dagger(const ComplexMatrix& a) { return a.adjoint(); }

inline ComplexMatrix boson_create(int cutoff) {
  return dagger(boson_annihilate(cutoff));
}

/// diag(0, 1, ..., L-1)
inline ComplexMatrix number_operator(int cutoff) {
  if (cutoff < 1) throw std::invalid_argument("number_operator: cutoff must be >= 1");
  ComplexMatrix n = ComplexMatrix::Zero(cutoff, cutoff);
  for (int k = 0; k < cutoff; ++k) n(k, k) = double(k);
  return n;
}

/// Kronecker product; (A (x) B)[i*dB + k, j*dB + l] = A[i,j] * B[k,l].
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  const Eigen::Index ra = a.rows(), ca = a.cols(), rb = b.rows(), cb = b.cols();
  ComplexMatrix out(ra * rb, ca * cb);
  for (Eigen::Index i = 0; i < ra; ++i)
    for (Eigen::Index j = 0; j < ca; ++j)
      out.block(i * rb, j * cb, rb, cb) = a(i, j) * b;
  return out;
}

namespace detail {

inline void pade13(const ComplexMatrix& a, ComplexMatrix& u, ComplexMatrix& v) {
  static const double b[] = {64764752532480000., 32382376266240000., 7771770303897600.,
                             1187353796428800.,  129060195264000.,   10559470521600.,
                             670442572800.,      33522128640.,       1323241920.,
                             40840800.,          960960.,            16380.,
                             182.,               1.};
  const Eigen::Index n = a.rows();
  const ComplexMatrix a2 = a * a;
  const ComplexMatrix a4 = a2 * a2;
  const ComplexMatrix a6 = a4 * a2;
  const ComplexMatrix eye = ComplexMatrix::Identity(n, n);
  u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
           b[3] * a2 + b[1] * eye);
  v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
      b[2] * a2 + b[0] * eye;
}

inline void pade_low(const ComplexMatrix& a, int degree, ComplexMatrix& u,
                     ComplexMatrix& v) {
  static const double b3[] = {120., 60., 12., 1.};
  static const double b5[] = {30240., 15120., 3360., 420., 30., 1.};
  static const double b7[] = {17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.};
  static const double b9[] = {17643225600., 8821612800., 2075673600., 302702400.,
                              30270240., 2162160., 110880., 3960., 90., 1.};
  const double* b = degree == 3 ? b3 : degree == 5 ? b5 : degree == 7 ? b7 : b9;
  const Eigen::Index n = a.rows();
  const ComplexMatrix eye = ComplexMatrix::Identity(n, n);
  std::vector<ComplexMatrix> pow;  // A^2, A^4, ...
  pow.push_back(a * a);
  for (int k = 4; k <= degree - 1; k += 2) pow.push_back(pow.back() * pow.front());
  ComplexMatrix su = b[1] * eye, sv = b[0] * eye;
  for (int k = 0; 2 * (k + 1) <= degree - 1; ++k) {
    su += b[2 * k + 3] * pow[size_t(k)];
    sv += b[2 * k + 2] * pow[size_t(k)];
  }
  u = a * su;
  v = sv;
}

}  // namespace detail

/// Matrix exponential by Pade approximation with scaling and squaring
/// (Higham's degree-13 scheme). Relative accuracy ~1e-13 for well-scaled
/// inputs; throws std::range_error if the result overflows.
inline ComplexMatrix matexp(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("matexp: matrix must be square");
  if (!a.allFinite()) throw std::range_error("matexp: non-finite input");
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  ComplexMatrix u, v;
  int squarings = 0;
  if (norm1 < 1.495585217958292e-2) {
    detail::pade_low(a, 3, u, v);
  } else if (norm1 < 2.539398330063230e-1) {
    detail::pade_low(a, 5, u, v);
  } else if (norm1 < 9.504178996162932e-1) {
    detail::pade_low(a, 7, u, v);
  } else if (norm1 < 2.097847961257068) {
    detail::pade_low(a, 9, u, v);
  } else {
    const double theta13 = 5.371920351148152;
    squarings = std::max(0, int(std::ceil(std::log2(norm1 / theta13))));
    detail::pade13(a / std::pow(2.0, squarings), u, v);
  }
  ComplexMatrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  if (!r.allFinite()) throw std::range_error("matexp: overflow");
  return r;
}

/// Entrywise squared Frobenius distance: sum_ij |A_ij - B_ij|^2.
inline double squared_frobenius_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("squared_frobenius_distance: dimension mismatch");
  return (a - b).squaredNorm();
}

/// Largest entrywise deviation of A^dag A from the identity.
inline double unitarity_defect(const ComplexMatrix& a) {
  return (a.adjoint() * a - ComplexMatrix::Identity(a.cols(), a.cols()))
      .cwiseAbs()
      .maxCoeff();
}

inline bool is_unitary(const ComplexMatrix& a, double tol = kUnitaryTol) {
  if (a.rows() != a.cols()) return false;
  return unitarity_defect(a) <= tol;
}

inline bool is_hermitian(const ComplexMatrix& a, double tol = kUnitaryTol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline StateVector basis_state(Eigen::Index dim, Eigen::Index n) {
  if (n < 0 || n >= dim) throw std::invalid_argument("basis_state: index out of range");
  StateVector v = StateVector::Zero(dim);
  v(n) = 1.0;
  return v;
}

/// |n><m| on a dim-dimensional space.
inline ComplexMatrix ketbra(Eigen::Index dim, Eigen::Index n, Eigen::Index m) {
  ComplexMatrix p = ComplexMatrix::Zero(dim, dim);
  p(n, m) = 1.0;
  return p;
}

}  // namespace fock
}  // namespace bosonq
