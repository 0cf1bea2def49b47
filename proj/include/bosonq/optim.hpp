#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>

// Deterministic random numbers and a dense BFGS quasi-Newton minimizer with
// a strong-Wolfe line search. The RNG avoids std::uniform_real_distribution
// so that streams are bit-identical across standard library implementations.

namespace bosonq::optim {

/// splitmix64-seeded xoshiro256** generator with portable uniform doubles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      s = z ^ (z >> 31);
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Bernoulli(p) counter: number of successes in n trials.
  std::uint64_t binomial(std::uint64_t n, double p) {
    std::uint64_t k = 0;
    for (std::uint64_t i = 0; i < n; ++i)
      if (uniform() < p) ++k;
    return k;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4]{};
};

struct MinimizeOptions {
  int max_iterations = 20000;
  double gradient_tol = 1e-10;   // stop when ||g||_inf below this
  double value_target = -std::numeric_limits<double>::infinity();  // stop when f below this
  double step_tol = 1e-16;       // stop when the line search collapses
  std::function<void(int, double)> on_iteration;  // called once per accepted iterate
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;  // gradient_tol or value_target reached
};

/// Objective: returns f(x) and writes the gradient into `grad`.
using Objective =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

namespace detail {

struct LineSearchResult {
  double step = 0.0;
  double value = 0.0;
  bool ok = false;
};

/// Minimizer of the cubic through (a, fa, da) and (b, fb, db), safeguarded
/// into the middle of the interval; falls back to bisection.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (disc < 0.0 || !std::isfinite(disc)) return 0.5 * (a + b);
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  double t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double pad = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + pad || t > hi - pad) t = 0.5 * (a + b);
  return t;
}

/// Strong-Wolfe line search (Nocedal & Wright alg. 3.5/3.6). On success,
/// x_out/g_out/value all describe the accepted point.
inline LineSearchResult wolfe_line_search(const Objective& f,
                                          const Eigen::VectorXd& x0, double f0,
                                          const Eigen::VectorXd& g0,
                                          const Eigen::VectorXd& dir,
                                          Eigen::VectorXd& x_out,
                                          Eigen::VectorXd& g_out) {
  const double c1 = 1e-4, c2 = 0.9;
  const double d0 = g0.dot(dir);
  if (d0 >= 0.0) return {};
  const int max_evals = 50;
  int evals = 0;

  auto eval = [&](double a, double& fv, double& dv) {
    x_out = x0 + a * dir;
    fv = f(x_out, g_out);
    dv = g_out.dot(dir);
    ++evals;
  };

  auto zoom = [&](double alo, double flo, double dlo, double ahi, double fhi,
                  double dhi) -> LineSearchResult {
    // invariant: alo satisfies the sufficient-decrease condition
    while (evals < max_evals) {
      if (std::abs(ahi - alo) < 1e-14 * std::max(1.0, std::abs(alo))) break;
      const double aj = cubic_step(alo, flo, dlo, ahi, fhi, dhi);
      double fj, dj;
      eval(aj, fj, dj);
      if (fj > f0 + c1 * aj * d0 || fj >= flo) {
        ahi = aj;
        fhi = fj;
        dhi = dj;
      } else {
        if (std::abs(dj) <= -c2 * d0) return {aj, fj, true};
        if (dj * (ahi - alo) >= 0.0) {
          ahi = alo;
          fhi = flo;
          dhi = dlo;
        }
        alo = aj;
        flo = fj;
        dlo = dj;
      }
    }
    // curvature never satisfied: fall back to the best sufficient-decrease
    // point, re-evaluating so the outputs describe it
    if (alo > 0.0) {
      double fj, dj;
      eval(alo, fj, dj);
      if (fj <= f0 + c1 * alo * d0) return {alo, fj, true};
    }
    return {};
  };

  double a_prev = 0.0, f_prev = f0, d_prev = d0;
  double a = 1.0;
  while (evals < max_evals) {
    double fv, dv;
    eval(a, fv, dv);
    if (fv > f0 + c1 * a * d0 || (a_prev > 0.0 && fv >= f_prev))
      return zoom(a_prev, f_prev, d_prev, a, fv, dv);
    if (std::abs(dv) <= -c2 * d0) return {a, fv, true};
    if (dv >= 0.0) return zoom(a, fv, dv, a_prev, f_prev, d_prev);
    a_prev = a;
    f_prev = fv;
    d_prev = dv;
    a *= 2.0;
  }
  return {};
}

}  // namespace detail

/// Dense BFGS with strong-Wolfe line search. Deterministic: no randomness,
/// iteration order fixed by the inputs.
inline MinimizeResult minimize_bfgs(const Objective& f,
                                    const Eigen::VectorXd& x0,
                                    const MinimizeOptions& opts = {}) {
  const Eigen::Index n = x0.size();
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x = x0, g(n), x_new(n), g_new(n);
  double fx = f(x, g);
  bool h_scaled = false;

  MinimizeResult res;
  if (opts.on_iteration) opts.on_iteration(0, fx);
  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it;
    if (fx <= opts.value_target || g.cwiseAbs().maxCoeff() <= opts.gradient_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -(h_inv * g);
    auto ls = detail::wolfe_line_search(f, x, fx, g, dir, x_new, g_new);
    if (!ls.ok) {
      // retry on the steepest-descent direction once before giving up
      h_inv.setIdentity();
      dir = -g;
      ls = detail::wolfe_line_search(f, x, fx, g, dir, x_new, g_new);
      if (!ls.ok) break;
    }
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    x = x_new;
    fx = ls.value;
    g = g_new;
    if (opts.on_iteration) opts.on_iteration(it + 1, fx);
    if (s.lpNorm<Eigen::Infinity>() < opts.step_tol) {
      res.converged = fx <= opts.value_target;
      break;
    }
    if (sy > 1e-14 * s.norm() * y.norm()) {
      if (!h_scaled) {
        // curvature-scaled initial inverse Hessian (Nocedal & Wright 6.20)
        h_inv *= sy / y.squaredNorm();
        h_scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      // Sherman-Morrison form of the BFGS inverse update
      h_inv.noalias() -= rho * (hy * s.transpose() + s * hy.transpose());
      h_inv.noalias() += rho * rho * (y.dot(hy) + sy) * (s * s.transpose());
    }
  }
  res.x = x;
  res.value = fx;
  return res;
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt for nonlinear least squares f(x) = ||r(x)||^2
// ---------------------------------------------------------------------------

/// Fills the residual vector, and the Jacobian when `jac` is non-null.
using ResidualFunction =
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd*)>;

struct LmOptions {
  int max_iterations = 400;
  double value_target = 0.0;     // stop when ||r||^2 at or below this
  double gradient_tol = 1e-14;   // stop when ||J^T r||_inf below this
  double initial_mu_scale = 1e-3;
};

struct LmResult {
  Eigen::VectorXd x;
  double value = 0.0;  // ||r||^2
  int iterations = 0;
  bool converged = false;
};

/// Damped Gauss-Newton with Nielsen's mu adaptation. Deterministic.
inline LmResult minimize_levenberg_marquardt(const ResidualFunction& fn,
                                             const Eigen::VectorXd& x0,
                                             const LmOptions& opts = {}) {
  LmResult res;
  res.x = x0;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  fn(res.x, r, &jac);
  double f = r.squaredNorm();
  double mu = -1.0, nu = 2.0;

  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it;
    if (f <= opts.value_target) {
      res.converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    if (jtr.cwiseAbs().maxCoeff() <= opts.gradient_tol) {
      res.converged = true;
      break;
    }
    if (mu < 0.0) mu = opts.initial_mu_scale * jtj.diagonal().maxCoeff();

    bool accepted = false;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      Eigen::MatrixXd a = jtj;
      a.diagonal().array() += mu;
      const Eigen::VectorXd delta = a.ldlt().solve(-jtr);
      Eigen::VectorXd r_new;
      fn(res.x + delta, r_new, nullptr);
      const double f_new = r_new.squaredNorm();
      const double predicted = delta.dot(mu * delta - jtr);
      if (f_new < f && predicted > 0.0) {
        const double rho = (f - f_new) / predicted;
        res.x += delta;
        f = f_new;
        mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        accepted = true;
      } else {
        mu *= nu;
        nu *= 2.0;
      }
    }
    if (!accepted) break;  // no descent direction left at any damping
    fn(res.x, r, &jac);
    f = r.squaredNorm();
  }
  res.value = f;
  res.converged = res.converged || f <= opts.value_target;
  return res;
}

}  // namespace bosonq::optim
