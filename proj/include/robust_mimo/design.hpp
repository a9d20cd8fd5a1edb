#pragma once

// Transceiver designs for the robust MIMO link. Every design here has the
// channel-diagonalizing structure
//
//   F = V_h [diag(f); 0],   G = [diag(g), 0] U_h^H,
//
// built from the SVD H~ = U_h Sigma_h V_h^H, so a design is fully described
// by the per-stream gains (f, g) on the L strongest singular values gamma.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "robust_mimo/conic.hpp"
#include "robust_mimo/errors.hpp"
#include "robust_mimo/linalg.hpp"
#include "robust_mimo/worstcase.hpp"

namespace robust_mimo {

/// Design that produced a transceiver. unstructured_search marks the output
/// of the brute-force oracle and is not a benchmark method.
enum class Method { robust_optimal, alternating_I, alternating_II, alternating_III, nonrobust, unstructured_search };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::robust_optimal: return "robust_optimal";
    case Method::alternating_I: return "alternating_I";
    case Method::alternating_II: return "alternating_II";
    case Method::alternating_III: return "alternating_III";
    case Method::nonrobust: return "nonrobust";
    case Method::unstructured_search: return "unstructured_search";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::robust_optimal, Method::alternating_I, Method::alternating_II, Method::alternating_III,
                   Method::nonrobust, Method::unstructured_search}) {
    if (s == to_string(m)) return m;
  }
  throw PreconditionError("unknown method '" + s + "'");
}

/// Initial precoder gains of the alternating baseline: I equal split,
/// II non-robust water-filling, III random direction at full power.
enum class InitScheme { I, II, III };

struct Transceiver {
  ComplexMatrix F;  // N x L
  ComplexMatrix G;  // L x M
  double worst_case_mse = 0.0;
  Method method = Method::robust_optimal;
};

struct ScalarDesign {
  RealVector gamma;
  RealVector f;
  RealVector g;
};

/// Raised when a conic subproblem does not reach an optimal status.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, conic::SolveStatus status) : NumericalError(what), status_(status) {}
  conic::SolveStatus status() const { return status_; }

 private:
  conic::SolveStatus status_;
};

// ---------------------------------------------------------------------------
// Structure helpers

struct ChannelModes {
  SvdFactors svd;
  RealVector gamma;  // the L largest singular values
};

inline ChannelModes channel_modes(const DesignProblem& problem) {
  validate(problem);
  ChannelModes cm{svd(problem.h_tilde), {}};
  cm.gamma = cm.svd.sigma.head(problem.streams);
  return cm;
}

/// F = V_h [diag(f); 0] and G = [diag(g), 0] U_h^H.
inline std::pair<ComplexMatrix, ComplexMatrix> lift(const ChannelModes& cm, const RealVector& f, const RealVector& g) {
  const Eigen::Index L = f.size();
  const ComplexMatrix F = cm.svd.V.leftCols(L) * f.cast<Complex>().asDiagonal();
  const ComplexMatrix G = g.cast<Complex>().asDiagonal() * cm.svd.U.leftCols(L).adjoint();
  return {F, G};
}

/// Certificate for the structured design: E* = U_h diag(x, 0) V_h^H with x
/// the per-stream worst case. The KKT residual is measured against the full
/// vectorized quadratic form, so it also confirms that the diagonal error is
/// the worst case among all M x N errors.
inline WorstCaseCertificate diagonal_certificate(const DesignProblem& problem, const ChannelModes& cm,
                                                 const ScalarDesign& sd) {
  const DiagonalWorstCase wc = worst_case_error_diagonal(sd.f, sd.g, sd.gamma, problem.epsilon);
  const Eigen::Index L = sd.f.size();
  const auto [F, G] = lift(cm, sd.f, sd.g);

  WorstCaseCertificate cert;
  cert.e_star = cm.svd.U.leftCols(L) * wc.x.cast<Complex>().asDiagonal() * cm.svd.V.leftCols(L).adjoint();
  cert.omega = wc.omega;
  cert.lambda_max = sd.f.cwiseAbs2().maxCoeff() * sd.g.cwiseAbs2().maxCoeff();
  cert.hard_case = wc.hard_case;
  cert.converged = wc.converged;
  cert.mse_value = mse(F, G, cert.e_star, problem);

  if (problem.epsilon > 0.0) {
    const ErrorQuadraticForm form = error_quadratic_form(F, G, problem.h_tilde);
    const ComplexVector e = vec(cert.e_star);
    const ComplexVector r = cert.omega * e - form.K * e - form.c;
    cert.kkt_residual = r.norm() / std::max(1.0, form.c.norm());
  }
  return cert;
}

/// f_i = m_i / sqrt(n_i), g_i = sqrt(n_i). A stream with m_i = n_i = 0 is
/// pruned (f_i = g_i = 0); power on a stream with n_i = 0 is an error.
inline std::pair<RealVector, RealVector> recover_scalars(const RealVector& m, const RealVector& n) {
  require(m.size() == n.size(), "recover_scalars: size mismatch");
  RealVector f(m.size());
  RealVector g(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    require(std::isfinite(m(i)) && std::isfinite(n(i)) && n(i) >= 0.0, "recover_scalars: n must be >= 0");
    if (n(i) == 0.0) {
      if (m(i) != 0.0) throw NumericalError("recover_scalars: stream carries power with a zero equalizer");
      f(i) = 0.0;
      g(i) = 0.0;
      continue;
    }
    g(i) = std::sqrt(n(i));
    f(i) = m(i) / g(i);
  }
  return {f, g};
}

namespace detail {

// Streams whose m and n both sit at solver noise level are idle.
inline void snap_idle_streams(RealVector& m, RealVector& n, double tol) {
  const double m_floor = tol * std::max(1.0, m.maxCoeff());
  const double n_floor = tol * std::max(1.0, n.maxCoeff());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m(i) <= m_floor && n(i) <= n_floor) {
      m(i) = 0.0;
      n(i) = 0.0;
    }
  }
}

inline void enforce_power(RealVector& f, double power) {
  const double used = f.squaredNorm();
  if (used > power) f *= std::sqrt(power / used);
}

inline RealVector mmse_equalizer(const RealVector& gamma, const RealVector& f, double noise_var) {
  RealVector g(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double gf = gamma(i) * f(i);
    g(i) = gf / (gf * gf + noise_var);
  }
  return g;
}

inline void require_optimal(const conic::ConeSolution& sol, const char* what) {
  if (sol.status != conic::SolveStatus::optimal) {
    throw SolverError(std::string(what) + ": conic solver returned " + conic::to_string(sol.status), sol.status);
  }
}

inline Transceiver finish(const DesignProblem& problem, const ChannelModes& cm, const ScalarDesign& sd, Method method) {
  auto [F, G] = lift(cm, sd.f, sd.g);
  const double wc = worst_case_error_general(F, G, problem).mse_value;
  return {std::move(F), std::move(G), wc, method};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Non-robust baseline

/// Perfect-CSI MMSE water-filling on the nominal gains:
/// f_i^2 = max(0, sigma / (gamma_i sqrt(nu)) - sigma^2 / gamma_i^2) with the
/// water level nu chosen so that sum f_i^2 = P, and the MMSE equalizer
/// g_i = gamma_i f_i / (gamma_i^2 f_i^2 + sigma^2).
inline ScalarDesign water_filling(const RealVector& gamma, double noise_var, double power) {
  require(gamma.size() >= 1 && (gamma.array() > 0.0).all(), "water_filling: gamma must be positive");
  require(noise_var > 0.0 && power > 0.0, "water_filling: noise_var and power must be positive");
  const Eigen::Index L = gamma.size();
  std::vector<Eigen::Index> order(L);
  for (Eigen::Index i = 0; i < L; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return gamma(a) > gamma(b); });

  const double sigma = std::sqrt(noise_var);
  RealVector f2 = RealVector::Zero(L);
  for (Eigen::Index k = L; k >= 1; --k) {
    double inv_gamma = 0.0;
    double inv_gamma2 = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      inv_gamma += 1.0 / gamma(order[j]);
      inv_gamma2 += 1.0 / (gamma(order[j]) * gamma(order[j]));
    }
    // 1 / sqrt(nu) for the k strongest streams.
    const double level = (power + noise_var * inv_gamma2) / (sigma * inv_gamma);
    const double weakest = gamma(order[k - 1]);
    if (sigma * level / weakest - noise_var / (weakest * weakest) > 0.0) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const double gj = gamma(order[j]);
        f2(order[j]) = sigma * level / gj - noise_var / (gj * gj);
      }
      break;
    }
  }
  ScalarDesign sd{gamma, f2.cwiseSqrt(), {}};
  sd.g = detail::mmse_equalizer(gamma, sd.f, noise_var);
  return sd;
}

/// Nominal MSE of a structured design on the estimated channel.
inline double nominal_scalar_mse(const ScalarDesign& sd, double noise_var) {
  return diagonal_mse(sd.f, sd.g, sd.gamma, RealVector::Zero(sd.f.size()), noise_var);
}

struct NonrobustDesign {
  Transceiver transceiver;
  ScalarDesign scalars;
};

inline NonrobustDesign nonrobust_design(const DesignProblem& problem) {
  const ChannelModes cm = channel_modes(problem);
  ScalarDesign sd = water_filling(cm.gamma, problem.noise_var, problem.power);
  Transceiver t = detail::finish(problem, cm, sd, Method::nonrobust);
  return {std::move(t), std::move(sd)};
}

// ---------------------------------------------------------------------------
// Globally optimal robust design

struct RobustDesign {
  Transceiver transceiver;
  WorstCaseCertificate certificate;
  ScalarDesign scalars;
  conic::ConeSolution solution;
};

/// Solves the scalar robust program on the top-L singular values and lifts
/// the gains through the channel-diagonalizing structure.
inline RobustDesign robust_design(const DesignProblem& problem, const conic::SolverOptions& opts = {}) {
  const ChannelModes cm = channel_modes(problem);
  const int L = problem.streams;
  // Solved at unit power: f = sqrt(P) f', g = g' / sqrt(P) with noise_var / P.
  const double root_p = std::sqrt(problem.power);
  const conic::ConeProgram prog =
      conic::build_robust_program(cm.gamma, problem.epsilon, problem.noise_var / problem.power, 1.0);
  conic::ConeSolution sol = conic::solve(prog, opts);
  detail::require_optimal(sol, "robust_design");

  const conic::Layout layout = conic::robust_layout(L, problem.epsilon);
  // Gains are nonnegative; the solver may return -1e-12 for an idle stream.
  RealVector m = sol.primal.segment(layout.m, L).cwiseMax(0.0);
  RealVector n = sol.primal.segment(layout.n, L).cwiseMax(0.0);
  detail::snap_idle_streams(m, n, opts.acceptable_tol);
  auto [f, g] = recover_scalars(m, n);
  f *= root_p;
  g /= root_p;
  detail::enforce_power(f, problem.power);

  ScalarDesign sd{cm.gamma, std::move(f), std::move(g)};
  WorstCaseCertificate cert = diagonal_certificate(problem, cm, sd);
  Transceiver t = detail::finish(problem, cm, sd, Method::robust_optimal);
  return {std::move(t), std::move(cert), std::move(sd), std::move(sol)};
}

// ---------------------------------------------------------------------------
// Alternating-optimization baseline

enum class StepKind { f_step, g_step };

struct IterationStep {
  int iteration = 0;
  double objective = 0.0;
  StepKind kind = StepKind::f_step;
  int solver_iterations = 0;
  double duality_gap = 0.0;
  double max_violation = 0.0;
};

struct IterationTrace {
  double initial_objective = 0.0;
  std::vector<IterationStep> steps;
};

struct AlternatingOptions {
  int max_iters = 100;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  conic::SolverOptions solver;
};

struct AlternatingDesign {
  Transceiver transceiver;
  IterationTrace trace;
  ScalarDesign scalars;
  int iterations = 0;
  bool converged = false;
  /// Empty on success; otherwise the subproblem failure that stopped the run.
  /// The transceiver then holds the last completed iterate.
  std::string failure;
};

inline Method method_for(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::I: return Method::alternating_I;
    case InitScheme::II: return Method::alternating_II;
    case InitScheme::III: return Method::alternating_III;
  }
  return Method::alternating_I;
}

/// Starting precoder gains for the alternating baseline.
inline RealVector initial_precoder(const RealVector& gamma, double noise_var, double power, InitScheme scheme,
                                   std::uint64_t seed) {
  const Eigen::Index L = gamma.size();
  switch (scheme) {
    case InitScheme::I:
      return RealVector::Constant(L, std::sqrt(power / static_cast<double>(L)));
    case InitScheme::II:
      return water_filling(gamma, noise_var, power).f;
    case InitScheme::III: {
      // Uniform direction on the nonnegative part of the sphere.
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      RealVector d(L);
      do {
        for (Eigen::Index i = 0; i < L; ++i) d(i) = std::abs(normal(rng));
      } while (d.norm() == 0.0);
      return d.normalized() * std::sqrt(power);
    }
  }
  return RealVector::Zero(L);
}

/// Block-coordinate descent on the scalar robust problem: each block (f with
/// g fixed, then g with f fixed) is a convex program solved to optimality.
/// Stops when one full sweep lowers the worst-case MSE by less than
/// tol * (current value), or after max_iters sweeps.
inline AlternatingDesign alternating_design(const DesignProblem& problem, InitScheme scheme,
                                            const AlternatingOptions& opts = {}) {
  require(opts.tol > 0.0, "alternating_design: tol must be > 0");
  require(opts.max_iters >= 1, "alternating_design: max_iters must be >= 1");
  const ChannelModes cm = channel_modes(problem);
  const RealVector& gamma = cm.gamma;
  const double eps = problem.epsilon;
  const double nv = problem.noise_var;
  // Subproblems are solved at unit power, as in robust_design.
  const double root_p = std::sqrt(problem.power);
  const double unit_nv = nv / problem.power;

  ScalarDesign sd{gamma, initial_precoder(gamma, nv, problem.power, scheme, opts.seed), {}};
  sd.g = detail::mmse_equalizer(gamma, sd.f, nv);
  auto objective = [&](const RealVector& f, const RealVector& g) {
    const DiagonalWorstCase wc = worst_case_error_diagonal(f, g, gamma, eps);
    return diagonal_mse(f, g, gamma, wc.x, nv);
  };

  AlternatingDesign out;
  out.trace.initial_objective = objective(sd.f, sd.g);
  double previous = out.trace.initial_objective;

  auto log_step = [&](int it, StepKind kind, const conic::ConeSolution& sol, double value) {
    out.trace.steps.push_back({it, value, kind, sol.iterations, sol.duality_gap, sol.max_violation});
  };

  try {
    for (int it = 1; it <= opts.max_iters; ++it) {
      out.iterations = it;
      {
        const conic::ScalarProgram sp = conic::build_fixed_g_program(gamma, sd.g * root_p, eps, unit_nv, 1.0);
        const conic::ConeSolution sol = conic::solve(sp.program, opts.solver);
        detail::require_optimal(sol, "alternating f-step");
        RealVector f = RealVector::Zero(gamma.size());
        for (std::size_t k = 0; k < sp.streams.size(); ++k) {
          f(sp.streams[k]) = root_p * std::max(0.0, sol.primal(sp.layout.m + static_cast<int>(k)));
        }
        detail::enforce_power(f, problem.power);
        sd.f = std::move(f);
        log_step(it, StepKind::f_step, sol, objective(sd.f, sd.g));
      }
      {
        const conic::ScalarProgram sp = conic::build_fixed_f_program(gamma, sd.f / root_p, eps, unit_nv);
        const conic::ConeSolution sol = conic::solve(sp.program, opts.solver);
        detail::require_optimal(sol, "alternating g-step");
        RealVector g = RealVector::Zero(gamma.size());
        for (std::size_t k = 0; k < sp.streams.size(); ++k) {
          g(sp.streams[k]) = std::max(0.0, sol.primal(sp.layout.m + static_cast<int>(k))) / root_p;
        }
        sd.g = std::move(g);
        log_step(it, StepKind::g_step, sol, objective(sd.f, sd.g));
      }
      const double current = out.trace.steps.back().objective;
      if (previous - current < opts.tol * current) {
        out.converged = true;
        break;
      }
      previous = current;
    }
  } catch (const NumericalError& err) {
    out.failure = err.what();
  }

  out.transceiver = detail::finish(problem, cm, sd, method_for(scheme));
  out.scalars = std::move(sd);
  return out;
}

}  // namespace robust_mimo
