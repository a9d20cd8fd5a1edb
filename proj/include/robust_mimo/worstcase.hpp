#pragma once

// Inner maximization of the robust MSE problem: for a fixed transceiver
// (F, G), find the channel error E with ||E||_F <= epsilon that maximizes
//
//   mse(F, G, E) = ||G (H~ + E) F - I||_F^2 + noise_var ||G||_F^2.
//
// After vectorizing E the objective is a convex quadratic in vec(E), so the
// maximum sits on the sphere ||E||_F = epsilon and is characterized by the
// trust-region optimality system
//
//   (omega I - K) e = c,   omega >= lambda_max(K),   ||e|| = epsilon,
//
// with K = (F^T kron G)^H (F^T kron G) and c = (F^T kron G)^H vec(G H~ F - I).
// Both the per-stream (diagonal) form and the general matrix form reduce to
// the same secular equation, solved by secular_solve.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "robust_mimo/errors.hpp"
#include "robust_mimo/linalg.hpp"

namespace robust_mimo {

/// One robust-design instance.
struct DesignProblem {
  ComplexMatrix h_tilde;  // M x N channel estimate
  double epsilon = 0.0;   // Frobenius radius of the channel error
  double noise_var = 1.0;
  double power = 1.0;
  int streams = 1;

  Eigen::Index rx_antennas() const { return h_tilde.rows(); }
  Eigen::Index tx_antennas() const { return h_tilde.cols(); }
};

/// Throws PreconditionError unless every DesignProblem invariant holds,
/// including 1 <= streams <= numerical rank of h_tilde.
inline void validate(const DesignProblem& p) {
  require(p.h_tilde.rows() > 0 && p.h_tilde.cols() > 0, "DesignProblem: empty channel");
  require(p.h_tilde.allFinite(), "DesignProblem: non-finite channel entry");
  require(std::isfinite(p.epsilon) && p.epsilon >= 0.0, "DesignProblem: epsilon must be >= 0");
  require(std::isfinite(p.noise_var) && p.noise_var > 0.0, "DesignProblem: noise_var must be > 0");
  require(std::isfinite(p.power) && p.power > 0.0, "DesignProblem: power must be > 0");
  require(p.streams >= 1, "DesignProblem: streams must be >= 1");
  const auto rank = numerical_rank(svd(p.h_tilde).sigma);
  require(p.streams <= rank, "DesignProblem: streams exceeds the numerical rank of h_tilde");
}

struct WorstCaseCertificate {
  ComplexMatrix e_star;     // M x N maximizing error
  double omega = 0.0;       // multiplier of the norm constraint
  double lambda_max = 0.0;  // largest eigenvalue of the quadratic form
  double mse_value = 0.0;
  double kkt_residual = 0.0;  // ||(omega I - K) e - c|| / max(1, ||c||)
  bool hard_case = false;
  bool converged = true;
};

/// ||G (H~ + E) F - I||_F^2 + noise_var ||G||_F^2.
inline double mse(const ComplexMatrix& F, const ComplexMatrix& G, const ComplexMatrix& E,
                  const DesignProblem& problem) {
  const auto& H = problem.h_tilde;
  require(F.cols() == G.rows(), "mse: F and G disagree on the stream count");
  require(F.rows() == H.cols(), "mse: F must have N rows");
  require(G.cols() == H.rows(), "mse: G must have M columns");
  require(E.rows() == H.rows() && E.cols() == H.cols(), "mse: E must be M x N");
  const Eigen::Index L = F.cols();
  const ComplexMatrix residual = G * (H + E) * F - ComplexMatrix::Identity(L, L);
  return residual.squaredNorm() + problem.noise_var * G.squaredNorm();
}

// ---------------------------------------------------------------------------
// Secular equation

struct SecularRoot {
  double omega = 0.0;
  double shift = 0.0;  // omega - max(lambdas), computed without cancellation
  bool hard_case = false;
  bool converged = true;
  int iterations = 0;
  double residual = 0.0;  // |sum c^2/(omega - lambda)^2 - eps^2| / eps^2
};

inline constexpr int kSecularIterationCap = 200;

/// Finds omega >= max(lambdas) with sum_j coeffs_j^2 / (omega - lambdas_j)^2 =
/// epsilon^2. When the coefficients on every lambda equal to the maximum are
/// zero and the remaining sum evaluated at omega = max(lambdas) is already
/// <= epsilon^2, the equation has no root above the maximum: this is the hard
/// case, reported with omega = max(lambdas).
///
/// The root is found by Newton's method on phi(t) = 1/sqrt(s(t)) - 1/epsilon in
/// the shift t = omega - max(lambdas). phi is increasing and concave, so
/// Newton steps from the right of the root land on its left and then increase
/// monotonically; a bisection bracket guards every step.
inline SecularRoot secular_solve(const RealVector& lambdas, const RealVector& coeffs, double epsilon) {
  require(lambdas.size() == coeffs.size() && lambdas.size() > 0, "secular_solve: size mismatch");
  require(lambdas.allFinite() && coeffs.allFinite(), "secular_solve: non-finite input");
  require(std::isfinite(epsilon) && epsilon > 0.0, "secular_solve: epsilon must be > 0");

  const double lmax = lambdas.maxCoeff();
  const RealVector gaps = (RealVector::Constant(lambdas.size(), lmax) - lambdas).cwiseMax(0.0);
  const double eps2 = epsilon * epsilon;

  SecularRoot out;
  bool top_has_weight = false;
  double limit_sum = 0.0;
  for (Eigen::Index j = 0; j < gaps.size(); ++j) {
    if (coeffs(j) == 0.0) continue;
    if (gaps(j) == 0.0) {
      top_has_weight = true;
    } else {
      const double r = coeffs(j) / gaps(j);
      limit_sum += r * r;
    }
  }
  if (!top_has_weight && limit_sum <= eps2) {
    out.omega = lmax;
    out.shift = 0.0;
    out.hard_case = true;
    out.residual = 0.0;
    return out;
  }

  auto sums = [&](double t, double& s, double& s3) {
    s = 0.0;
    s3 = 0.0;
    for (Eigen::Index j = 0; j < gaps.size(); ++j) {
      if (coeffs(j) == 0.0) continue;
      const double d = t + gaps(j);
      const double q = coeffs(j) / d;
      s += q * q;
      s3 += q * q / d;
    }
  };

  double lo = 0.0;
  double hi = coeffs.norm() / epsilon;  // s(hi) <= eps2
  double t = hi;
  double best_t = hi;
  double best_res = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= kSecularIterationCap; ++it) {
    out.iterations = it;
    double s = 0.0;
    double s3 = 0.0;
    sums(t, s, s3);
    const double res = std::abs(s - eps2) / eps2;
    if (res < best_res) {
      best_res = res;
      best_t = t;
    }
    if (res <= 1e-14) break;
    if (s > eps2) {
      lo = t;
    } else {
      hi = t;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(hi, 1e-300)) break;

    // phi(t) = s^{-1/2} - 1/eps, phi'(t) = s^{-3/2} * sum c^2/(t+gap)^3
    const double phi = 1.0 / std::sqrt(s) - 1.0 / epsilon;
    const double dphi = s3 / (s * std::sqrt(s));
    double next = t - phi / dphi;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }

  out.shift = best_t;
  out.omega = lmax + best_t;
  out.residual = best_res;
  out.converged = best_res <= 1e-12;
  return out;
}

// ---------------------------------------------------------------------------
// Per-stream worst case

struct DiagonalWorstCase {
  RealVector x;  // diagonal of the worst-case error in the channel eigenbasis
  double omega = 0.0;
  bool hard_case = false;
  bool converged = true;
};

/// sum_i (f_i g_i (gamma_i + x_i) - 1)^2 + noise_var * sum_i g_i^2.
inline double diagonal_mse(const RealVector& f, const RealVector& g, const RealVector& gamma,
                           const RealVector& x, double noise_var) {
  require(f.size() == g.size() && g.size() == gamma.size() && gamma.size() == x.size(),
          "diagonal_mse: size mismatch");
  const RealVector m = f.cwiseProduct(g);
  const RealVector r = m.cwiseProduct(gamma + x) - RealVector::Ones(m.size());
  return r.squaredNorm() + noise_var * g.squaredNorm();
}

/// Worst real diagonal error x (sum x_i^2 <= epsilon^2) for the
/// channel-diagonalized link with stream gains f_i g_i. Solves
/// (omega - f_i^2 g_i^2) x_i = f_i g_i (f_i g_i gamma_i - 1) with
/// ||x|| = epsilon and omega >= max_i f_i^2 g_i^2.
inline DiagonalWorstCase worst_case_error_diagonal(const RealVector& f, const RealVector& g,
                                                   const RealVector& gamma, double epsilon) {
  const Eigen::Index L = f.size();
  require(L > 0 && g.size() == L && gamma.size() == L, "worst_case_error_diagonal: size mismatch");
  require((f.array() >= 0.0).all() && (g.array() >= 0.0).all() && (gamma.array() >= 0.0).all(),
          "worst_case_error_diagonal: f, g, gamma must be nonnegative");
  require(std::isfinite(epsilon) && epsilon >= 0.0, "worst_case_error_diagonal: epsilon must be >= 0");

  const RealVector m = f.cwiseProduct(g);
  const RealVector lambdas = m.cwiseAbs2();
  const RealVector d = m.cwiseProduct(m.cwiseProduct(gamma) - RealVector::Ones(L));
  const double lmax = lambdas.maxCoeff();

  DiagonalWorstCase out{RealVector::Zero(L), lmax, false, true};
  if (epsilon == 0.0) return out;

  const SecularRoot root = secular_solve(lambdas, d, epsilon);
  out.omega = root.omega;
  out.hard_case = root.hard_case;
  out.converged = root.converged;

  if (!root.hard_case) {
    for (Eigen::Index i = 0; i < L; ++i) {
      out.x(i) = d(i) / (root.shift + (lmax - lambdas(i)));
    }
    return out;
  }

  Eigen::Index first_top = -1;
  for (Eigen::Index i = 0; i < L; ++i) {
    const double gap = lmax - lambdas(i);
    if (gap > 0.0) {
      out.x(i) = d(i) / gap;
    } else if (first_top < 0) {
      first_top = i;
    }
  }
  out.x(first_top) = std::sqrt(std::max(0.0, epsilon * epsilon - out.x.squaredNorm()));
  return out;
}

// ---------------------------------------------------------------------------
// General worst case

/// The vectorized quadratic form of the inner maximization for a fixed (F, G).
struct ErrorQuadraticForm {
  ComplexMatrix K;  // (F^T kron G)^H (F^T kron G), MN x MN
  ComplexVector c;  // (F^T kron G)^H vec(G H~ F - I)
};

inline ErrorQuadraticForm error_quadratic_form(const ComplexMatrix& F, const ComplexMatrix& G,
                                               const ComplexMatrix& H) {
  const Eigen::Index L = F.cols();
  const ComplexMatrix A = kronecker(F.transpose(), G);
  const ComplexMatrix nominal = G * H * F - ComplexMatrix::Identity(L, L);
  return {A.adjoint() * A, A.adjoint() * vec(nominal)};
}

/// Worst-case error over ||E||_F <= epsilon for an arbitrary (F, G).
inline WorstCaseCertificate worst_case_error_general(const ComplexMatrix& F, const ComplexMatrix& G,
                                                     const DesignProblem& problem) {
  const auto& H = problem.h_tilde;
  const Eigen::Index M = H.rows();
  const Eigen::Index N = H.cols();
  require(F.cols() == G.rows() && F.rows() == N && G.cols() == M,
          "worst_case_error_general: dimensions do not conform");
  require(F.allFinite() && G.allFinite() && H.allFinite(), "worst_case_error_general: non-finite input");
  require(std::isfinite(problem.epsilon) && problem.epsilon >= 0.0,
          "worst_case_error_general: epsilon must be >= 0");

  ErrorQuadraticForm form = error_quadratic_form(F, G, H);
  // K is Hermitian by construction; remove rounding asymmetry.
  form.K = 0.5 * (form.K + form.K.adjoint()).eval();
  const HermitianEigen eig = hermitian_eigen(form.K);
  const double lmax = std::max(eig.values(0), 0.0);

  WorstCaseCertificate cert;
  cert.lambda_max = lmax;
  cert.omega = lmax;
  cert.e_star = ComplexMatrix::Zero(M, N);

  const double eps = problem.epsilon;
  const double c_norm = form.c.norm();
  if (eps > 0.0) {
    const Eigen::Index n = eig.values.size();
    const ComplexVector c_hat = eig.vectors.adjoint() * form.c;

    // Eigenvalues within rounding of lambda_max form the top group, and
    // coefficients at rounding level are zero; this separates the genuine
    // hard case from a nearly-hard regular one.
    const double lambda_cut = 1e-12 * std::max(lmax, 1e-300);
    const double coeff_cut = 1e-12 * c_norm;
    RealVector lambdas(n);
    RealVector coeffs(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      lambdas(j) = (lmax - eig.values(j) <= lambda_cut) ? lmax : eig.values(j);
      coeffs(j) = std::abs(c_hat(j)) <= coeff_cut ? 0.0 : std::abs(c_hat(j));
    }

    ComplexVector e_hat = ComplexVector::Zero(n);
    if (c_norm == 0.0) {
      // Purely quadratic objective: any top eigenvector is a maximizer.
      cert.hard_case = true;
      e_hat(0) = eps;
    } else {
      const SecularRoot root = secular_solve(lambdas, coeffs, eps);
      cert.omega = root.omega;
      cert.hard_case = root.hard_case;
      cert.converged = root.converged;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (coeffs(j) == 0.0) continue;
        const double denom = root.shift + (lmax - lambdas(j));
        if (denom > 0.0) e_hat(j) = c_hat(j) / denom;
      }
      if (root.hard_case) {
        Eigen::Index first_top = 0;
        while (first_top < n && lambdas(first_top) != lmax) ++first_top;
        const double rest = e_hat.squaredNorm();
        e_hat(first_top) = std::sqrt(std::max(0.0, eps * eps - rest));
      }
    }
    const ComplexVector e = eig.vectors * e_hat;
    cert.e_star = unvec(e, M, N);
  }

  const ComplexVector e = vec(cert.e_star);
  const ComplexVector stationarity = cert.omega * e - form.K * e - form.c;
  cert.kkt_residual = eps > 0.0 ? stationarity.norm() / std::max(1.0, c_norm) : 0.0;
  cert.mse_value = mse(F, G, cert.e_star, problem);
  return cert;
}

}  // namespace robust_mimo
